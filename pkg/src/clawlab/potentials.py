"""Functionals over wave pairs: Glimm, cubic, and quadratic pair potentials.

The quadratic potential sums (integrates, for the Glimm scheme) a weight over
ordered wave pairs s < s'.  A pair that never shared a position weighs the
flux curvature bound; a pair that did weighs the speed gap assigned to the
two waves by the Riemann problem of their common interaction history, divided
by the total variation sitting between them.  Histories are intervals in
wave-id space, so the weight is block-constant over runs of equal history
bounds and the whole functional reduces to a modest number of envelope
evaluations plus closed-form sums.

For the Glimm scheme every block integral has the form c * (v'-v)^(-1) on a
rectangle in state space, integrated exactly with the primitive
G(x) = x*(log x - 1) composed at the rectangle corners (G(0) = 0 covers
corner-touching rectangles), so the checks downstream carry no quadrature
error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .envelope import EnvelopeResult, PiecewiseAffineFn, lower_envelope_idx, upper_envelope_idx
from .glimm import GlimmPiece, GlimmSnapshot
from .wft import WaveTable

__all__ = [
    "PairWeightContext", "q_weight", "quadratic_potential", "Q_frak",
    "glimm_potential", "Q_gl", "cubic_potential", "Q_bb",
    "interaction_height", "HeightResult", "interaction_domain_DI",
    "log_overlap_integral", "cross_pair_integral", "restricted_quadratic_potential",
]


@dataclass
class PairWeightContext:
    """Scheme flag, flux, curvature bound, and an envelope cache."""

    scheme: str
    flux: PiecewiseAffineFn
    f2norm: float
    _cache: dict = field(default_factory=dict, repr=False)

    def envelope(self, lo: int, hi: int, kind: str) -> EnvelopeResult:
        key = (lo, hi, kind)
        env = self._cache.get(key)
        if env is None:
            if kind == "lower":
                env = lower_envelope_idx(self.flux, lo, hi)
            else:
                env = upper_envelope_idx(self.flux, lo, hi)
            self._cache[key] = env
        return env


# ---------------------------------------------------------------------------
# wavefront tracking side: finitely many unit waves
# ---------------------------------------------------------------------------

def _wft_classes(table: WaveTable, ids: np.ndarray):
    """Runs of live ids with identical history bounds (and hence sign)."""
    if ids.size == 0:
        return []
    key_change = np.flatnonzero(
        (np.diff(table.L[ids]) != 0) | (np.diff(table.R[ids]) != 0))
    bounds = np.concatenate(([0], key_change + 1, [ids.size]))
    out = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        sub = ids[a:b]
        out.append((sub, int(table.sign[sub[0]]), int(table.L[sub[0]]), int(table.R[sub[0]])))
    return out


def _wft_history_envelope(ctx: PairWeightContext, table: WaveTable,
                          live: np.ndarray, L: int, R: int, sign: int) -> EnvelopeResult:
    """Envelope of the Riemann problem spanned by the live waves in [L, R]."""
    lo_pos = np.searchsorted(live, L, side="left")
    hi_pos = np.searchsorted(live, R, side="right") - 1
    first, last = int(live[lo_pos]), int(live[hi_pos])
    if sign > 0:
        return ctx.envelope(int(table.uhat[first]) - 1, int(table.uhat[last]), "lower")
    return ctx.envelope(int(table.uhat[last]), int(table.uhat[first]) + 1, "upper")


def q_weight_wft(ctx: PairWeightContext, table: WaveTable, s: int, sp: int) -> float:
    """Reference per-pair weight; s < sp are live wave ids."""
    if not (table.alive[s] and table.alive[sp]):
        raise ValueError("weights are defined for live waves only")
    if s == sp:
        raise ValueError("pair requires two distinct waves")
    if s > sp:
        s, sp = sp, s
    if table.sign[s] != table.sign[sp] or sp > table.R[s]:
        return ctx.f2norm
    sign = int(table.sign[s])
    live = table.live_ids()
    env = _wft_history_envelope(ctx, table, live, int(table.L[sp]), int(table.R[s]), sign)
    if sign > 0:
        sig_s = env.slope_at_cell(int(table.uhat[s]))
        sig_sp = env.slope_at_cell(int(table.uhat[sp]))
        denom = (int(table.uhat[sp]) - int(table.uhat[s]) + 1) * table.step
    else:
        sig_s = env.slope_at_cell(int(table.uhat[s]) + 1)
        sig_sp = env.slope_at_cell(int(table.uhat[sp]) + 1)
        denom = (int(table.uhat[s]) - int(table.uhat[sp]) + 1) * table.step
    return abs(sig_sp - sig_s) / denom


def quadratic_potential_wft(ctx: PairWeightContext, table: WaveTable,
                            subset: np.ndarray | None = None) -> float:
    """Quadratic pair potential; ``subset`` restricts the pair set, not the state."""
    live = table.live_ids()
    ids = live if subset is None else subset
    classes = _wft_classes(table, ids)
    eps2 = table.step * table.step
    total = 0.0
    pair_count = ids.size * (ids.size - 1) // 2
    interacted_pairs = 0
    for ka, (ids_a, sg_a, L_a, R_a) in enumerate(classes):
        for kb in range(ka, len(classes)):
            ids_b, sg_b, L_b, R_b = classes[kb]
            diagonal = kb == ka
            if sg_a != sg_b:
                continue
            if ids_b[-1] > R_a:
                if not diagonal and ids_b[0] <= R_a:
                    raise AssertionError("history class split a pair block")
                continue
            env = _wft_history_envelope(ctx, table, live, L_b, R_a, sg_a)
            ua = table.uhat[ids_a]
            ub = table.uhat[ids_b]
            if sg_a > 0:
                sa = env.slopes_at_cells(ua)
                sb = env.slopes_at_cells(ub)
                denom = (ub[None, :] - ua[:, None] + 1).astype(np.float64) * table.step
            else:
                sa = env.slopes_at_cells(ua + 1)
                sb = env.slopes_at_cells(ub + 1)
                denom = (ua[:, None] - ub[None, :] + 1).astype(np.float64) * table.step
            q = np.abs(sb[None, :] - sa[:, None]) / denom
            if diagonal:
                iu = np.triu_indices(ids_a.size, k=1)
                total += float(q[iu].sum()) * eps2
                interacted_pairs += ids_a.size * (ids_a.size - 1) // 2
            else:
                total += float(q.sum()) * eps2
                interacted_pairs += ids_a.size * ids_b.size
    total += ctx.f2norm * eps2 * (pair_count - interacted_pairs)
    return total


# ---------------------------------------------------------------------------
# Glimm side: exact integrals over lattice interval pairs
# ---------------------------------------------------------------------------

def _G(x: float) -> float:
    return 0.0 if x <= 0.0 else x * (math.log(x) - 1.0)


def _rect_recip_integral(c0: float, c1: float, d0: float, d1: float) -> float:
    """Integral of 1/(v'-v) over v in [c0,c1], v' in [d0,d1], with d0 >= c1."""
    return _G(d1 - c0) - _G(d1 - c1) - _G(d0 - c0) + _G(d0 - c1)


def log_overlap_integral(a: float, xi: float, b: float) -> float:
    """Integral of 1/(u'-u) over a <= u <= xi <= u' <= b.

    Its maximum over xi is log(2) * (b - a), attained at the midpoint.
    """
    if not a <= xi <= b:
        raise ValueError("xi must lie inside [a, b]")
    return _rect_recip_integral(a, xi, xi, b)


def _env_runs_within(env: EnvelopeResult, lo: int, hi: int):
    """Constant-slope runs of env clipped to the state interval [lo, hi]."""
    out = []
    for (i, j, s) in env.pieces():
        a, b = max(i, lo), min(j, hi)
        if a < b:
            out.append((a, b, s))
    return out


def _block_integral(env: EnvelopeResult, x0: int, x1: int, y0: int, y1: int,
                    step: float, triangular: bool) -> float:
    """Exact integral of the slope-gap kernel over [x0,x1] x [y0,y1] (states).

    The kernel is |sigma(v') - sigma(v)| / (v' - v) with sigma the envelope
    derivative.  ``triangular`` integrates over v < v' inside a single square.
    """
    if not triangular and y0 < x1:
        raise AssertionError("pair blocks must be value-ordered")
    xs = _env_runs_within(env, x0, x1)
    ys = xs if triangular else _env_runs_within(env, y0, y1)
    total = 0.0
    for ia, (c0, c1, sc) in enumerate(xs):
        start = ia + 1 if triangular else 0
        for (d0, d1, sd) in ys[start:]:
            gap = abs(sd - sc)
            if gap == 0.0:
                continue
            # |ds| = |dv|, so this is already the ds ds' integral
            total += gap * _rect_recip_integral(c0 * step, c1 * step, d0 * step, d1 * step)
    return total


def _glimm_classes(pieces: list[GlimmPiece]):
    """Runs of consecutive pieces with identical history bounds."""
    out = []
    for p in pieces:
        if out and out[-1][0][-1].L == p.L and out[-1][0][-1].R == p.R:
            out[-1][0].append(p)
        else:
            out.append(([p], p.sign))
    return [(grp, sgn, grp[0].L, grp[0].R) for grp, sgn in out]


def _glimm_history_envelope(ctx: PairWeightContext, all_pieces: list[GlimmPiece],
                            L: int, R: int, sign: int) -> EnvelopeResult:
    parts = [p.clip(L, R) for p in all_pieces]
    parts = [p for p in parts if p is not None]
    spans = [p.state_span() for p in parts]
    lo = min(s for s, _ in spans)
    hi = max(e for _, e in spans)
    if sign > 0:
        return ctx.envelope(lo, hi, "lower")
    return ctx.envelope(lo, hi, "upper")


def _pair_area(pa: GlimmPiece, pb: GlimmPiece, step: float, diagonal: bool) -> float:
    if diagonal:
        return 0.5 * (pa.size * step) ** 2
    return (pa.size * step) * (pb.size * step)


def quadratic_potential_glimm(ctx: PairWeightContext, snap: GlimmSnapshot,
                              subset: list[tuple[int, int]] | None = None) -> float:
    """Exact double integral of the pair weight over s < s'.

    ``subset`` is a list of half-open lattice s-intervals restricting the pair
    domain; the weights themselves are always those of the full snapshot.
    """
    pieces = snap.pieces
    if subset is not None:
        clipped = []
        for (a, b) in subset:
            for p in pieces:
                c = p.clip(a, b)
                if c is not None:
                    clipped.append(c)
        clipped.sort(key=lambda p: p.s_lo)
        domain = clipped
    else:
        domain = pieces
    return _integrate_pairs(ctx, snap, domain, domain, same=True)


def cross_pair_integral(ctx: PairWeightContext, snap: GlimmSnapshot,
                        A: list[tuple[int, int]], B: list[tuple[int, int]]) -> float:
    """Integral of the pair weight over s in A, s' in B (A entirely left of B)."""
    pa = [c for (a, b) in A for p in snap.pieces if (c := p.clip(a, b)) is not None]
    pb = [c for (a, b) in B for p in snap.pieces if (c := p.clip(a, b)) is not None]
    pa.sort(key=lambda p: p.s_lo)
    pb.sort(key=lambda p: p.s_lo)
    if pa and pb and pa[-1].s_hi > pb[0].s_lo:
        raise ValueError("A must lie entirely left of B")
    return _integrate_pairs(ctx, snap, pa, pb, same=False)


def restricted_quadratic_potential(ctx, snap, subset):
    return quadratic_potential_glimm(ctx, snap, subset=subset)


def _integrate_pairs(ctx, snap, dom_a, dom_b, same: bool) -> float:
    step = snap.flux.grid_step
    cls_a = _glimm_classes(dom_a)
    cls_b = cls_a if same else _glimm_classes(dom_b)
    total = 0.0
    never_area = 0.0
    for ka, (grp_a, sg_a, L_a, R_a) in enumerate(cls_a):
        kb_start = ka if same else 0
        for kb in range(kb_start, len(cls_b)):
            grp_b, sg_b, L_b, R_b = cls_b[kb]
            diagonal = same and kb == ka
            area = 0.0
            for ia, pa in enumerate(grp_a):
                for ib, pb in enumerate(grp_b):
                    if diagonal and ib < ia:
                        continue
                    area += _pair_area(pa, pb, step, diagonal and ib == ia)
            if sg_a != sg_b:
                never_area += area
                continue
            sup_b = grp_b[-1].s_hi
            if sup_b > R_a:
                if not diagonal and grp_b[0].s_lo < R_a:
                    raise AssertionError("history class split a pair block")
                never_area += area
                continue
            env = _glimm_history_envelope(ctx, snap.pieces, L_b, R_a, sg_a)
            for ia, pa in enumerate(grp_a):
                for ib, pb in enumerate(grp_b):
                    if diagonal and ib < ia:
                        continue
                    a0, a1 = pa.state_span()
                    b0, b1 = pb.state_span()
                    if diagonal and ib == ia:
                        total += _block_integral(env, a0, a1, a0, a1, step, True)
                    else:
                        lo_first = (a0, a1) <= (b0, b1)
                        (x0, x1), (y0, y1) = ((a0, a1), (b0, b1)) if lo_first else ((b0, b1), (a0, a1))
                        total += _block_integral(env, x0, x1, y0, y1, step, False)
    total += ctx.f2norm * never_area
    return total


def q_weight_glimm(ctx: PairWeightContext, snap: GlimmSnapshot, s: float, sp: float) -> float:
    """Reference per-pair weight at wave coordinates s < sp (lattice units)."""
    if s > sp:
        s, sp = sp, s

    def piece_of(w):
        for p in snap.pieces:
            if p.s_lo < w <= p.s_hi:
                return p
        raise ValueError(f"wave coordinate {w} is not live")

    pa, pb = piece_of(s), piece_of(sp)
    if pa.sign != pb.sign or sp > pa.R:
        return ctx.f2norm
    env = _glimm_history_envelope(ctx, snap.pieces, pb.L, pa.R, pa.sign)
    step = snap.flux.grid_step

    def state_and_cell(p, w):
        # state at coordinate w, and the flux cell of the unit cell containing w
        k = math.ceil(w - p.s_lo)
        cell = p.j0 + k if p.sign > 0 else p.j0 - k + 1
        state = p.j0 + p.sign * (w - p.s_lo)
        return state * step + snap.flux.grid_origin, cell

    va, ca = state_and_cell(pa, s)
    vb, cb = state_and_cell(pb, sp)
    if va == vb:
        raise ValueError("coincident states have no pair weight")
    return abs(env.slope_at_cell(cb) - env.slope_at_cell(ca)) / abs(vb - va)


# ---------------------------------------------------------------------------
# dispatch surface
# ---------------------------------------------------------------------------

def q_weight(ctx: PairWeightContext, snapshot, s, sp) -> float:
    """Weight of the pair s < sp under the given scheme."""
    if ctx.scheme == "wft":
        return q_weight_wft(ctx, snapshot, s, sp)
    if ctx.scheme == "glimm":
        return q_weight_glimm(ctx, snapshot, s, sp)
    raise ValueError(f"unknown scheme {ctx.scheme!r}")


def quadratic_potential(ctx: PairWeightContext, snapshot, subset=None) -> float:
    if ctx.scheme == "wft":
        return quadratic_potential_wft(ctx, snapshot, subset)
    if ctx.scheme == "glimm":
        return quadratic_potential_glimm(ctx, snapshot, subset)
    raise ValueError(f"unknown scheme {ctx.scheme!r}")


Q_frak = quadratic_potential


# ---------------------------------------------------------------------------
# front-level functionals
# ---------------------------------------------------------------------------

def glimm_potential(strengths: np.ndarray) -> float:
    """Sum over unordered distinct front pairs of strength products."""
    m = np.asarray(strengths, dtype=np.float64)
    s = float(m.sum())
    return 0.5 * (s * s - float((m * m).sum()))


Q_gl = glimm_potential


def cubic_potential(strengths: np.ndarray, speeds: np.ndarray) -> float:
    """Sum over unordered distinct front pairs of |speed gap| * strength product."""
    m = np.asarray(strengths, dtype=np.float64)
    v = np.asarray(speeds, dtype=np.float64)
    order = np.argsort(v, kind="stable")
    m, v = m[order], v[order]
    w_before = np.concatenate(([0.0], np.cumsum(m)[:-1]))
    s_before = np.concatenate(([0.0], np.cumsum(m * v)[:-1]))
    return float(np.sum(m * (v * w_before - s_before)))


Q_bb = cubic_potential


class HeightResult(NamedTuple):
    envelope: float
    triangle: float


def interaction_height(fn: PiecewiseAffineFn, u_l: float, u_m: float, u_r: float) -> HeightResult:
    """Vertical gap at the middle state, from the envelope and from the chord.

    For a binary collision of two fronts [u_l, u_m], [u_m, u_r] the two values
    agree and equal |speed gap| * |w| * |w'| / (|w| + |w'|).
    """
    il, im, ir = fn.index_of(u_l), fn.index_of(u_m), fn.index_of(u_r)
    if not (il < im < ir or il > im > ir):
        raise ValueError("states must be strictly monotone")
    increasing = il < ir
    env = lower_envelope_idx(fn, il, ir) if increasing else upper_envelope_idx(fn, ir, il)
    pos = int(np.searchsorted(env.contact, im, side="right")) - 1
    c = int(env.contact[pos])
    env_val = fn.f(c) + env.seg_slopes[min(pos, env.seg_slopes.size - 1)] * (im - c) * fn.grid_step
    fl, fm, fr = fn.f(il), fn.f(im), fn.f(ir)
    chord = fl + (fr - fl) * (u_m - u_l) / (u_r - u_l)
    if increasing:
        return HeightResult(fm - env_val, fm - chord)
    return HeightResult(env_val - fm, chord - fm)


def interaction_domain_DI(step_events) -> list[tuple[list, list]]:
    """Per interaction node, the (movers, stayers) s-interval products whose
    speeds changed; products are disjoint across nodes."""
    out = []
    for ev in step_events:
        if ev.kind == "I" and ev.changed_movers and ev.changed_stayers:
            out.append((ev.changed_movers, ev.changed_stayers))
    return out
