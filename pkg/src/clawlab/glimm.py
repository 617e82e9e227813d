"""Glimm scheme on the grid (n*eps, m*eps) with interval-valued wave sets.

Waves form the continuum (0, TV] parametrized by total variation, but with a
piecewise affine flux every split the scheme performs lands on the lattice of
multiples of the value grid step.  The wave set is therefore represented
exactly as finitely many half-open lattice intervals, each carrying a sign,
an affine state map of slope +-1, a grid position, and history bounds (L, R).
All integrals over the wave set reduce to finite sums over unit cells, so no
quadrature error enters any check.

Per step, each occupied node solves its Riemann problem; the sampling value
theta splits every node group at the level set {speed <= theta} (ties stay,
matching the non-strict inequality of the construction); movers advance one
cell; the survival window of the restart removes cancelled waves; histories
merge per node group; node events are classified interaction / cancellation /
no-collision.  Speeds are envelope chord slopes shared bitwise between an
envelope and its restriction at a contact point, which makes the speed change
at a no-collision node exactly zero, not merely small.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datum import StepDatum
from .envelope import EnvelopeResult, PiecewiseAffineFn, lower_envelope_idx, upper_envelope_idx

__all__ = ["van_der_corput", "SamplingSequence", "GlimmPiece", "GlimmNodeEvent",
           "GlimmScheme", "node_speed_variation"]


def van_der_corput(n: int) -> float:
    """Binary radical inverse of n >= 1."""
    if n < 1:
        raise ValueError("index must be >= 1")
    q, bk = 0.0, 0.5
    while n > 0:
        q += (n & 1) * bk
        n >>= 1
        bk *= 0.5
    return q


@dataclass(frozen=True)
class SamplingSequence:
    """Source of the restart sampling values theta_n, n >= 1."""

    kind: str = "van-der-corput"          # | "seeded-uniform" | "explicit"
    seed: int = 0
    values: tuple[float, ...] = ()

    def theta(self, n: int) -> float:
        if self.kind == "van-der-corput":
            return van_der_corput(n)
        if self.kind == "seeded-uniform":
            rng = np.random.default_rng(self.seed + n)
            return float(rng.random())
        if self.kind == "explicit":
            if n > len(self.values):
                raise ValueError("explicit sampling list exhausted")
            th = float(self.values[n - 1])
            if not 0.0 <= th <= 1.0:
                raise ValueError("sampling values must lie in [0, 1]")
            return th
        raise ValueError(f"unknown sampling kind {self.kind!r}")


@dataclass
class GlimmPiece:
    """Lattice interval (s_lo, s_hi] of waves with an affine state map.

    ``j0`` is the state index at the (excluded) lower end; the wave cell
    (s_lo+k-1, s_lo+k] has flux cell j0 + k for positive sign, j0 - k + 1 for
    negative.  ``pos`` is the grid node index, None once removed.  (L, R] is
    the interval of wave coordinates ever co-located with this piece.
    """

    s_lo: int
    s_hi: int
    sign: int
    j0: int
    pos: int | None
    L: int
    R: int

    @property
    def size(self) -> int:
        return self.s_hi - self.s_lo

    def cells(self) -> np.ndarray:
        """Flux cell index of each unit wave cell, in s order."""
        k = np.arange(1, self.size + 1)
        return self.j0 + k if self.sign > 0 else self.j0 - k + 1

    def state_span(self) -> tuple[int, int]:
        """(low, high) state indices of the covered value interval."""
        if self.sign > 0:
            return self.j0, self.j0 + self.size
        return self.j0 - self.size, self.j0

    def clip(self, s_a: int, s_b: int) -> "GlimmPiece | None":
        """Sub-piece with s in (max(s_lo, s_a), min(s_hi, s_b)], or None."""
        lo = max(self.s_lo, s_a)
        hi = min(self.s_hi, s_b)
        if lo >= hi:
            return None
        return replace(self, s_lo=lo, s_hi=hi, j0=self.j0 + self.sign * (lo - self.s_lo))


@dataclass
class GlimmNodeEvent:
    n: int                      # time index after the step
    m: int                      # node index
    kind: str                   # "I" | "C" | "N"
    w1_units: int               # measure of movers arriving from node m-1
    w0_units: int               # measure of stayers of node m
    canc_units: int
    cancellation: float
    speed_variation: float
    changed_movers: list[tuple[int, int]]     # s intervals with speed change
    changed_stayers: list[tuple[int, int]]


def _fan_state(env: EnvelopeResult, sign: int, theta: float, j_l: int, j_r: int) -> int:
    """State index reached by the waves of speed <= theta (the sampled value)."""
    runs = env.pieces()
    if sign > 0:
        j = j_l
        for (_, hi, s) in runs:
            if s <= theta:
                j = hi
            else:
                break
        return j
    j = j_l                      # j_l is the top state of a negative node
    for (lo, _, s) in reversed(runs):
        if s <= theta:
            j = lo
        else:
            break
    return j


@dataclass
class GlimmSnapshot:
    """Immutable view of the wave set handed to the potentials."""

    flux: PiecewiseAffineFn
    pieces: list[GlimmPiece]
    u: np.ndarray
    m_base: int
    node_env: dict[int, EnvelopeResult]
    n: int

    def total_units(self) -> int:
        return sum(p.size for p in self.pieces)

    def sigma_of_piece(self, p: GlimmPiece) -> np.ndarray:
        env = self.node_env[p.pos]
        return env.slopes_at_cells(p.cells())


class GlimmScheme:
    """One Glimm run; state mutated in place by :meth:`step`."""

    def __init__(self, flux: PiecewiseAffineFn, datum: StepDatum, eps_x: float,
                 n_steps: int, sampling: SamplingSequence | None = None):
        self.flux = flux
        self.eps_x = float(eps_x)
        self.sampling = sampling or SamplingSequence()
        self.n = 0
        self.planned_steps = int(n_steps)

        jumps = datum.jumps()
        if not jumps:
            raise ValueError("datum has no jumps")
        m_first = int(np.floor(jumps[0][0] / self.eps_x)) - 1
        m_last = int(np.ceil(jumps[-1][0] / self.eps_x)) + n_steps + 2
        self.m_base = m_first
        self.u = np.array(
            [flux.index_of(datum.value_at(m * self.eps_x)) for m in range(m_first, m_last + 1)],
            dtype=np.int64)

        lo, hi = int(self.u.min()), int(self.u.max())
        slopes = flux.cell_slopes(lo, hi)
        if slopes.size and not (np.all(slopes > 0.0) and np.all(slopes < 1.0)):
            raise ValueError("flux slopes must lie in (0, 1) on the datum range")

        self.pieces: list[GlimmPiece] = []
        self.node_env: dict[int, EnvelopeResult] = {}
        c = 0
        for k in range(1, self.u.size):
            jl, jr = int(self.u[k - 1]), int(self.u[k])
            if jl == jr:
                continue
            m = self.m_base + k
            size = abs(jr - jl)
            sgn = 1 if jr > jl else -1
            self.pieces.append(GlimmPiece(c, c + size, sgn, jl, m, c, c + size))
            self.node_env[m] = self._node_envelope(jl, jr)
            c += size
        self.total_units0 = c
        self.events: list[GlimmNodeEvent] = []

    def _node_envelope(self, jl: int, jr: int) -> EnvelopeResult:
        if jl < jr:
            return lower_envelope_idx(self.flux, jl, jr)
        return upper_envelope_idx(self.flux, jr, jl)

    def _u_at(self, m: int) -> int:
        return int(self.u[m - self.m_base])

    def snapshot(self) -> GlimmSnapshot:
        return GlimmSnapshot(self.flux, [replace(p) for p in self.pieces],
                             self.u.copy(), self.m_base, dict(self.node_env), self.n)

    def tv_units(self) -> int:
        return sum(p.size for p in self.pieces)

    # -- one restart --------------------------------------------------------

    def step(self, theta: float | None = None) -> list[GlimmNodeEvent]:
        if theta is None:
            theta = self.sampling.theta(self.n + 1)
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        flux, u = self.flux, self.u

        # phase A: split every node group at the level set {speed <= theta}
        by_node: dict[int, list[GlimmPiece]] = {}
        for p in self.pieces:
            by_node.setdefault(p.pos, []).append(p)

        u_new = u.copy()
        stay: dict[int, list[GlimmPiece]] = {}
        move: dict[int, list[GlimmPiece]] = {}
        if by_node and max(by_node) + 1 - self.m_base >= self.u.size:
            raise RuntimeError("spatial grid exhausted; increase the planned step count")
        for m, group in sorted(by_node.items()):
            jl, jr = self._u_at(m - 1), self._u_at(m)
            sgn = group[0].sign
            env = self.node_env[m]
            j_star = _fan_state(env, sgn, theta, jl, jr)
            u_new[m - self.m_base] = j_star
            s_first = group[0].s_lo
            q = s_first + abs(j_star - jl)
            stays, moves = [], []
            for p in group:
                a = p.clip(p.s_lo, q)
                b = p.clip(q, p.s_hi)
                if a is not None:
                    stays.append(a)
                if b is not None:
                    moves.append(replace(b, pos=m + 1))
            stay[m] = stays
            move[m + 1] = moves

        # phase B: survival window, history merge, classification per node
        events: list[GlimmNodeEvent] = []
        new_pieces: list[GlimmPiece] = []
        new_env: dict[int, EnvelopeResult] = {}
        positions = sorted(set(stay) | set(move))
        for m in positions:
            movers = move.get(m, [])
            stayers = stay.get(m, [])
            if not movers and not stayers:
                continue
            a = int(u_new[m - 1 - self.m_base])
            b = int(u_new[m - self.m_base])
            w1 = sum(p.size for p in movers)
            w0 = sum(p.size for p in stayers)
            canc = w1 + w0 - abs(b - a)
            if w1 and w0:
                kind = "I" if movers[0].sign == stayers[0].sign else "C"
            else:
                kind = "N"

            net = b - a
            survivors: list[GlimmPiece] = []
            if net != 0:
                sgn = 1 if net > 0 else -1
                for p in movers + stayers:
                    if p.sign != sgn:
                        continue
                    lo_state, hi_state = p.state_span()
                    keep_lo = max(lo_state, min(a, b))
                    keep_hi = min(hi_state, max(a, b))
                    if keep_hi <= keep_lo:
                        continue
                    if sgn > 0:
                        k_lo, k_hi = keep_lo - p.j0, keep_hi - p.j0
                    else:
                        k_lo, k_hi = p.j0 - keep_hi, p.j0 - keep_lo
                    sub = p.clip(p.s_lo + k_lo, p.s_lo + k_hi)
                    if sub is not None:
                        survivors.append(sub)
            if survivors:
                lm = min(p.L for p in survivors)
                rm = max(p.R for p in survivors)
                for p in survivors:
                    p.L, p.R = lm, rm
                env_new = self._node_envelope(a, b)
                new_env[m] = env_new
                variation, ch_movers, ch_stayers = self._node_variation(
                    survivors, movers, stayers, env_new, m)
            else:
                variation, ch_movers, ch_stayers = 0.0, [], []

            new_pieces.extend(survivors)
            events.append(GlimmNodeEvent(
                n=self.n + 1, m=m, kind=kind, w1_units=w1, w0_units=w0,
                canc_units=canc, cancellation=canc * flux.grid_step,
                speed_variation=variation,
                changed_movers=ch_movers, changed_stayers=ch_stayers))

        new_pieces.sort(key=lambda p: p.s_lo)
        self.pieces = new_pieces
        self.u = u_new
        self.node_env = new_env
        self.n += 1
        self.events.extend(events)
        return events

    def _node_variation(self, survivors, movers, stayers, env_new, m):
        """Exact integral of |new speed - old speed| over the node survivors.

        Also returns the s intervals of (pre-survival) movers and stayers
        whose speed actually changed, the building blocks of the interaction
        domain.
        """
        step = self.flux.grid_step
        mover_hi = max((p.s_hi for p in movers), default=None)
        total = 0.0
        ch_movers: list[tuple[int, int]] = []
        ch_stayers: list[tuple[int, int]] = []
        for p in survivors:
            was_mover = mover_hi is not None and p.s_hi <= mover_hi
            env_old = self.node_env[m - 1] if was_mover else self.node_env[m]
            cells = p.cells()
            old = env_old.slopes_at_cells(cells)
            new = env_new.slopes_at_cells(cells)
            diff = np.abs(new - old)
            total += float(diff.sum()) * step
            changed = diff > 0.0
            target = ch_movers if was_mover else ch_stayers
            for s0, s1 in _runs(p.s_lo, changed):
                target.append((s0, s1))
        return total, _merge_runs(ch_movers), _merge_runs(ch_stayers)

    # -- driving ------------------------------------------------------------

    def run(self) -> list[GlimmNodeEvent]:
        for _ in range(self.planned_steps):
            self.step()
        return self.events


def _runs(s_lo: int, mask: np.ndarray) -> list[tuple[int, int]]:
    """Half-open lattice intervals of consecutive True cells."""
    out = []
    start = None
    for k, flag in enumerate(mask):
        if flag and start is None:
            start = k
        elif not flag and start is not None:
            out.append((s_lo + start, s_lo + k))
            start = None
    if start is not None:
        out.append((s_lo + start, s_lo + mask.size))
    return out


def _merge_runs(runs: list[tuple[int, int]]) -> list[tuple[int, int]]:
    runs = sorted(runs)
    out: list[tuple[int, int]] = []
    for a, b in runs:
        if out and out[-1][1] >= a:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def node_speed_variation(before: GlimmSnapshot, after: GlimmSnapshot, m: int) -> float:
    """Exact integral of |speed(n+1, s) - speed(n, s)| over the waves at node m.

    Both speed profiles are piecewise constant in s with lattice breakpoints,
    so the integral is a finite sum over unit cells.
    """
    step = after.flux.grid_step
    old_sorted = sorted(before.pieces, key=lambda p: p.s_lo)
    total = 0.0
    for p in after.pieces:
        if p.pos != m:
            continue
        new = after.node_env[m].slopes_at_cells(p.cells())
        for q in old_sorted:
            lo, hi = max(p.s_lo, q.s_lo), min(p.s_hi, q.s_hi)
            if lo >= hi:
                continue
            sub_new = new[lo - p.s_lo:hi - p.s_lo]
            q_sub = q.clip(lo, hi)
            old = before.node_env[q.pos].slopes_at_cells(q_sub.cells())
            total += float(np.sum(np.abs(sub_new - old))) * step
    return total
