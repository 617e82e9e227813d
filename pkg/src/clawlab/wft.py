"""Event-driven wavefront tracking with full per-wave bookkeeping.

The initial datum is cut into unit waves of strength equal to the value grid
step.  Wave s keeps, for its whole life, a state index uhat(s) and a sign;
its position and speed change at collision events, and a cancellation removes
it (position and speed become +inf).  Per wave we also maintain history
bounds (L, R): the smallest and largest wave id that ever shared a position
with s.  The interval [L(s'), R(s)] intersected with the live waves is the
common interaction history of a pair s < s', which the pair potentials are
built from.

Wave ids are 0-based internally and never relabelled.  Co-located waves are
always a contiguous id range (minus removed ids), so every per-event update
is a slice operation.

Collisions are resolved pairwise in principle; when three or more fronts
meet within the collision tolerance they are processed as one composite
event whose survivors are determined by folding the §-by-§ survival window
over the incoming fronts from left to right.  This is the deterministic
stand-in for the usual "perturb the speeds" argument and is flagged on the
event record.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .datum import StepDatum
from .envelope import PiecewiseAffineFn
from .riemann import Wavefront, solve_idx

__all__ = ["REMOVED", "WaveTable", "Event", "WavefrontTracker",
           "init", "next_event", "apply_event", "speed_variation"]

REMOVED = float("inf")


@dataclass
class WaveTable:
    """Per-wave state arrays; index = wave id."""

    flux: PiecewiseAffineFn
    uhat: np.ndarray      # int64 grid index of the wave state
    sign: np.ndarray      # int8, +-1
    pos: np.ndarray       # float64, +inf once removed
    speed: np.ndarray     # float64, +inf once removed
    alive: np.ndarray     # bool
    L: np.ndarray         # int64 wave ids
    R: np.ndarray         # int64 wave ids

    @property
    def n(self) -> int:
        return self.uhat.size

    @property
    def step(self) -> float:
        return self.flux.grid_step

    def copy(self) -> "WaveTable":
        return WaveTable(self.flux, self.uhat.copy(), self.sign.copy(),
                         self.pos.copy(), self.speed.copy(), self.alive.copy(),
                         self.L.copy(), self.R.copy())

    def live_ids(self) -> np.ndarray:
        return np.nonzero(self.alive)[0]

    def tv(self) -> float:
        return float(np.count_nonzero(self.alive)) * self.step

    def u_profile(self, left_idx: int) -> tuple[np.ndarray, np.ndarray]:
        """Reconstruct u from the push-forward of the signed wave measure.

        Returns (positions of live waves ordered, state index after each).
        """
        ids = self.live_ids()
        order = np.argsort(self.pos[ids], kind="stable")
        ids = ids[order]
        states = left_idx + np.cumsum(self.sign[ids].astype(np.int64))
        return self.pos[ids], states


@dataclass
class Event:
    """One collision: every quantity the checks need, nothing more."""

    time: float
    x: float
    kind: str                      # "I" interaction | "C" cancellation
    incoming: list[Wavefront]
    outgoing: list[Wavefront]
    u_left: int
    u_right: int
    canc_units: int                # TV drop in grid units
    cancellation: float            # TV drop in value units
    removed: np.ndarray            # wave ids removed here
    group_ids: np.ndarray          # live ids involved (before removal)
    survivor_ids: np.ndarray
    speed_variation: float         # sum over live waves of |dsigma| * |s|
    composite: bool = False
    time_exact: Fraction | None = None

    @property
    def is_splitting(self) -> bool:
        return self.kind == "C" and len(self.outgoing) > 1


@dataclass
class _Front:
    x: object            # float, or Fraction in exact mode
    sigma: float
    left: int
    right: int
    lo: int              # smallest wave id in the front
    hi: int              # largest wave id in the front


class WavefrontTracker:
    """Owns one run; single-threaded, state mutated in place."""

    def __init__(self, flux: PiecewiseAffineFn, datum: StepDatum,
                 exact_time: bool = False, time_tol: float = 1e-12):
        self.flux = flux
        self.exact_time = exact_time
        self.time_tol = time_tol
        self.t: object = Fraction(0) if exact_time else 0.0
        self.waves, self.fronts = _build_initial_state(flux, datum, exact_time)
        self.left_idx = flux.index_of(datum.left)
        self.events: list[Event] = []

    # -- scheduling ---------------------------------------------------------

    def _collision_dts(self):
        if not self.exact_time:
            x = np.array([f.x for f in self.fronts], dtype=np.float64)
            s = np.array([f.sigma for f in self.fronts], dtype=np.float64)
            gap = x[1:] - x[:-1]
            rel = s[:-1] - s[1:]
            with np.errstate(divide="ignore", invalid="ignore"):
                dts = np.where(rel > 0.0, np.maximum(gap, 0.0) / rel, np.inf)
            return dts
        dts = []
        for a, b in zip(self.fronts, self.fronts[1:]):
            rel = Fraction(a.sigma) - Fraction(b.sigma)
            if rel > 0:
                gap = Fraction(b.x) - Fraction(a.x)
                dts.append(gap / rel if gap > 0 else Fraction(0))
            else:
                dts.append(None)
        return dts

    def peek_next_event(self):
        """(dt, front index range) of the next cluster, or None when ordered."""
        if len(self.fronts) < 2:
            return None
        dts = self._collision_dts()
        if not self.exact_time:
            i_min = int(np.argmin(dts))
            dt_min = dts[i_min]
            if not np.isfinite(dt_min):
                return None
            scale = max(1.0, abs(float(self.t)) + float(dt_min))
            tol = self.time_tol * scale
            hits = dts <= dt_min + tol
            i0 = int(np.argmax(hits))
            i1 = i0
            while i1 + 1 < hits.size and hits[i1 + 1]:
                i1 += 1
            return dt_min, (i0, i1 + 1)
        finite = [(dt, i) for i, dt in enumerate(dts) if dt is not None]
        if not finite:
            return None
        dt_min = min(dt for dt, _ in finite)
        hit_set = {i for dt, i in finite if dt == dt_min}
        i0 = min(hit_set)
        i1 = i0
        while i1 + 1 in hit_set:
            i1 += 1
        return dt_min, (i0, i1 + 1)

    def _advance(self, dt):
        for f in self.fronts:
            if self.exact_time:
                f.x = Fraction(f.x) + Fraction(f.sigma) * dt
            else:
                f.x = f.x + f.sigma * dt
        self.t = self.t + dt

    # -- event processing ---------------------------------------------------

    def step(self) -> Event | None:
        """Advance to the next collision, resolve it, return the Event."""
        nxt = self.peek_next_event()
        if nxt is None:
            return None
        dt, (i0, i1) = nxt
        self._advance(dt)
        ev = self._resolve(i0, i1)
        self.events.append(ev)
        return ev

    def run(self, max_events: int = 1_000_000) -> list[Event]:
        while True:
            if len(self.events) > max_events:
                raise RuntimeError("event budget exceeded; solver did not terminate")
            if self.step() is None:
                return self.events

    def _live_of(self, f: _Front) -> np.ndarray:
        ids = np.arange(f.lo, f.hi + 1)
        return ids[self.waves.alive[ids]]

    def _resolve(self, i0: int, i1: int) -> Event:
        w = self.waves
        cluster = self.fronts[i0:i1 + 1]
        x_star = cluster[0].x
        u_l, u_r = cluster[0].left, cluster[-1].right

        group = np.concatenate([self._live_of(f) for f in cluster])
        surv = self._live_of(cluster[0])
        for f in cluster[1:]:
            cand = np.concatenate([surv, self._live_of(f)])
            net = f.right - u_l
            if net == 0:
                surv = cand[:0]
                continue
            sgn = 1 if net > 0 else -1
            uh = w.uhat[cand]
            keep = (w.sign[cand] == sgn) & (sgn * uh >= sgn * u_l + 1) & (sgn * uh <= sgn * f.right)
            surv = cand[keep]
        removed = np.setdiff1d(group, surv, assume_unique=True)

        size_in = sum(abs(f.right - f.left) for f in cluster)
        canc_units = size_in - abs(u_r - u_l)
        kind = "I" if canc_units == 0 else "C"

        outgoing = solve_idx(self.flux, u_l, u_r)
        old_speed = w.speed[surv]
        if outgoing:
            sgn = 1 if u_r > u_l else -1
            rights = np.array([sgn * piece.right for piece in outgoing])
            piece_idx = np.searchsorted(rights, sgn * w.uhat[surv], side="left")
            new_speed = np.array([piece.speed for piece in outgoing])[piece_idx]
        else:
            new_speed = old_speed[:0]

        variation = float(np.sum(np.abs(new_speed - old_speed))) * w.step

        if removed.size:
            w.alive[removed] = False
            w.pos[removed] = REMOVED
            w.speed[removed] = REMOVED
        if surv.size:
            w.pos[surv] = float(x_star)
            w.speed[surv] = new_speed
            w.L[surv] = w.L[surv].min()
            w.R[surv] = w.R[surv].max()

        new_fronts = []
        if outgoing:
            bounds = np.searchsorted(piece_idx, np.arange(len(outgoing) + 1), side="left")
            for k, piece in enumerate(outgoing):
                ids = surv[bounds[k]:bounds[k + 1]]
                new_fronts.append(_Front(x_star, piece.speed, piece.left, piece.right,
                                         int(ids.min()), int(ids.max())))
        self.fronts[i0:i1 + 1] = new_fronts

        incoming = [Wavefront(f.left, f.right, float(f.sigma), "incoming") for f in cluster]
        return Event(
            time=float(self.t), x=float(x_star), kind=kind,
            incoming=incoming, outgoing=outgoing, u_left=u_l, u_right=u_r,
            canc_units=canc_units, cancellation=canc_units * w.step,
            removed=removed, group_ids=group, survivor_ids=surv,
            speed_variation=variation, composite=len(cluster) > 2,
            time_exact=self.t if self.exact_time else None,
        )

    def front_list(self) -> list[Wavefront]:
        return [Wavefront(f.left, f.right, float(f.sigma), "live") for f in self.fronts]

    def tv_units(self) -> int:
        return int(np.count_nonzero(self.waves.alive))


def _build_initial_state(flux, datum, exact_time):
    jumps = datum.index_jumps(flux)
    if not jumps:
        raise ValueError("datum has no jumps")
    counts = [abs(ir - il) for _, il, ir in jumps]
    n = sum(counts)
    uhat = np.empty(n, dtype=np.int64)
    sign = np.empty(n, dtype=np.int8)
    pos = np.empty(n, dtype=np.float64)
    speed = np.empty(n, dtype=np.float64)
    L = np.empty(n, dtype=np.int64)
    R = np.empty(n, dtype=np.int64)
    fronts: list[_Front] = []
    c = 0
    for (x, il, ir), cnt in zip(jumps, counts):
        sgn = 1 if ir > il else -1
        ids = np.arange(c, c + cnt)
        uhat[ids] = il + sgn * np.arange(1, cnt + 1)
        sign[ids] = sgn
        pos[ids] = x
        L[ids] = c
        R[ids] = c + cnt - 1
        pieces = solve_idx(flux, il, ir)
        rights = np.array([sgn * p.right for p in pieces])
        piece_idx = np.searchsorted(rights, sgn * uhat[ids], side="left")
        speed[ids] = np.array([p.speed for p in pieces])[piece_idx]
        bounds = np.searchsorted(piece_idx, np.arange(len(pieces) + 1), side="left")
        for k, p in enumerate(pieces):
            sub = ids[bounds[k]:bounds[k + 1]]
            x0 = Fraction(x) if exact_time else float(x)
            fronts.append(_Front(x0, p.speed, p.left, p.right, int(sub.min()), int(sub.max())))
        c += cnt
    table = WaveTable(flux, uhat, sign, pos, speed, np.ones(n, dtype=bool), L, R)
    return table, fronts


# -- spec-level operation surface ------------------------------------------

def init(datum: StepDatum, flux: PiecewiseAffineFn) -> WavefrontTracker:
    """Build the initial wave table and front list."""
    return WavefrontTracker(flux, datum)


def next_event(state: WavefrontTracker):
    """Earliest upcoming collision as (time, x) or None if speeds are ordered."""
    nxt = state.peek_next_event()
    if nxt is None:
        return None
    dt, (i0, _) = nxt
    f = state.fronts[i0]
    return float(state.t + dt), float(f.x + f.sigma * dt)


def apply_event(state: WavefrontTracker, _peeked=None) -> Event:
    """Resolve the next collision in place."""
    ev = state.step()
    if ev is None:
        raise ValueError("no pending event")
    return ev


def speed_variation(before: WaveTable, after: WaveTable, event: Event | None = None) -> float:
    """Sum over waves live after the event of |speed change| * wave strength."""
    live = after.alive
    return float(np.sum(np.abs(after.speed[live] - before.speed[live]))) * after.step
