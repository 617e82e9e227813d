"""Convex and concave envelopes of piecewise affine functions on a uniform value grid.

This is the numerical kernel of the package.  A flux is stored as samples
f(u_m) on the uniform grid u_m = grid_origin + m * grid_step, and its graph is
the piecewise affine interpolation of those samples.  The lower convex
envelope on an interval [a, b] (both endpoints on the grid) is then exactly
the lower convex hull of the sample points, which we compute with a single
monotone-chain pass.

Exactness conventions
---------------------
* Hull comparisons use the sign of 2x2 determinants of sample differences.
  The sign is computed with a floating-point filter and an exact rational
  fallback (every float is a rational, so `fractions.Fraction` settles the
  degenerate cases).  There is no tolerance knob.
* Sample points lying exactly on a hull edge are KEPT as contact points, so
  "envelope == f at u_m" is equivalent to "m is in the contact set".
* Each hull edge carries one slope double, shared by every cell under that
  edge.  Restricting an envelope at one of its contact points therefore
  reproduces bitwise identical slopes, a property the solvers rely on.

Value intervals are manipulated as integer grid indices throughout; floats
appear only in sample values and slopes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "DomainError",
    "DegenerateIntervalError",
    "OffGridError",
    "PiecewiseAffineFn",
    "EnvelopeResult",
    "lower_envelope",
    "upper_envelope",
    "lower_envelope_idx",
    "upper_envelope_idx",
    "envelope_slope",
]

_EPS = float(np.finfo(np.float64).eps)


class DomainError(ValueError):
    """Requested interval leaves the sampled domain."""


class DegenerateIntervalError(ValueError):
    """Zero-width interval where an envelope was requested."""


class OffGridError(ValueError):
    """A value that must sit on the grid does not."""


@dataclass(frozen=True)
class PiecewiseAffineFn:
    """Piecewise affine function from samples on a uniform value grid.

    ``values[k]`` is f at grid index ``m_lo + k``; the domain is the closed
    interval [u(m_lo), u(m_hi)].
    """

    grid_origin: float
    grid_step: float
    m_lo: int
    values: np.ndarray

    def __post_init__(self):
        if not self.grid_step > 0.0:
            raise ValueError("grid_step must be positive")
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 1 or vals.size < 2:
            raise ValueError("need at least two samples")
        if not np.all(np.isfinite(vals)):
            raise ValueError("flux samples must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, fn: Callable[[float], float], grid_origin: float,
                      grid_step: float, m_lo: int, m_hi: int) -> "PiecewiseAffineFn":
        us = grid_origin + grid_step * np.arange(m_lo, m_hi + 1)
        vals = np.array([fn(float(u)) for u in us], dtype=np.float64)
        return cls(grid_origin, grid_step, m_lo, vals)

    @property
    def m_hi(self) -> int:
        return self.m_lo + self.values.size - 1

    def u(self, m) -> float:
        """Grid value at index m (scalar or array)."""
        return self.grid_origin + self.grid_step * np.asarray(m, dtype=np.float64)

    def index_of(self, value: float) -> int:
        """Exact-ish inverse of :meth:`u`; raises OffGridError if off the lattice."""
        m = round((value - self.grid_origin) / self.grid_step)
        if abs(self.u(m) - value) > 1e-9 * self.grid_step:
            raise OffGridError(f"value {value!r} is not on the grid")
        if not (self.m_lo <= m <= self.m_hi):
            raise DomainError(f"value {value!r} outside the sampled domain")
        return int(m)

    def f(self, m) -> float:
        """Sample value at grid index m (scalar or array)."""
        idx = np.asarray(m) - self.m_lo
        if np.any(idx < 0) or np.any(idx >= self.values.size):
            raise DomainError("grid index outside the sampled domain")
        out = self.values[idx]
        return float(out) if np.isscalar(m) or np.asarray(m).ndim == 0 else out

    def f_at(self, value: float) -> float:
        """Piecewise affine interpolation at an arbitrary in-domain value."""
        x = (value - self.grid_origin) / self.grid_step - self.m_lo
        if x < -1e-12 or x > self.values.size - 1 + 1e-12:
            raise DomainError(f"value {value!r} outside the sampled domain")
        x = min(max(x, 0.0), self.values.size - 1.0)
        k = min(int(x), self.values.size - 2)
        frac = x - k
        return float(self.values[k] * (1.0 - frac) + self.values[k + 1] * frac)

    def cell_slope(self, m: int) -> float:
        """Slope on the open cell (u(m-1), u(m))."""
        if not (self.m_lo < m <= self.m_hi):
            raise DomainError("cell outside the sampled domain")
        k = m - self.m_lo
        return float((self.values[k] - self.values[k - 1]) / self.grid_step)

    def cell_slopes(self, m_a: int | None = None, m_b: int | None = None) -> np.ndarray:
        """Slopes of cells with right endpoints m_a+1 .. m_b."""
        m_a = self.m_lo if m_a is None else m_a
        m_b = self.m_hi if m_b is None else m_b
        ka, kb = m_a - self.m_lo, m_b - self.m_lo
        return np.diff(self.values[ka:kb + 1]) / self.grid_step

    def second_norm(self, m_a: int | None = None, m_b: int | None = None) -> float:
        """Surrogate for the sup of |f''|: max |slope(m+1) - slope(m)| / grid_step."""
        slopes = self.cell_slopes(m_a, m_b)
        if slopes.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(slopes))) / self.grid_step)

    def negated(self) -> "PiecewiseAffineFn":
        return PiecewiseAffineFn(self.grid_origin, self.grid_step, self.m_lo, -self.values)


def _cross_sign(dx1: int, dy1: float, dx2: int, dy2: float) -> int:
    """Exact sign of dx1*dy2 - dx2*dy1 for integer dx and float dy."""
    t1 = dx1 * dy2
    t2 = dx2 * dy1
    d = t1 - t2
    err = 8.0 * _EPS * (abs(t1) + abs(t2))
    if d > err:
        return 1
    if d < -err:
        return -1
    if err == 0.0:
        return 0
    exact = Fraction(dx1) * Fraction(dy2) - Fraction(dx2) * Fraction(dy1)
    return (exact > 0) - (exact < 0)


def _lower_hull(ys: np.ndarray) -> list[int]:
    """Monotone chain over points (k, ys[k]); keeps collinear boundary points."""
    chain: list[int] = [0]
    for k in range(1, ys.size):
        while len(chain) >= 2:
            a, b = chain[-2], chain[-1]
            # pop b only on a strictly concave turn a -> b -> k
            if _cross_sign(b - a, float(ys[b] - ys[a]), k - a, float(ys[k] - ys[a])) > 0:
                chain.pop()
            else:
                break
        chain.append(k)
    return chain


@dataclass(frozen=True)
class EnvelopeResult:
    """Envelope of ``fn`` on [u(m_a), u(m_b)].

    ``contact`` holds the grid indices where the envelope equals fn (always
    including both endpoints); ``seg_slopes[k]`` is the slope of the envelope
    between ``contact[k]`` and ``contact[k+1]``.  For kind "lower" the slopes
    are nondecreasing, for kind "upper" nonincreasing.
    """

    fn: PiecewiseAffineFn
    kind: str
    m_a: int
    m_b: int
    contact: np.ndarray
    seg_slopes: np.ndarray

    @property
    def contact_set(self) -> np.ndarray:
        """Grid values of all contact points."""
        return self.fn.u(self.contact)

    def _segment_of_cells(self, m) -> np.ndarray:
        m_arr = np.asarray(m)
        if np.any(m_arr <= self.m_a) or np.any(m_arr > self.m_b):
            raise DomainError("cell outside the envelope interval")
        return np.searchsorted(self.contact, m_arr, side="left") - 1

    def slope_at_cell(self, m: int) -> float:
        """Constant envelope derivative on the open cell (u(m-1), u(m))."""
        return float(self.seg_slopes[self._segment_of_cells(m)])

    def slopes_at_cells(self, ms: np.ndarray) -> np.ndarray:
        return self.seg_slopes[self._segment_of_cells(ms)]

    def values(self) -> np.ndarray:
        """Envelope values at every grid point of [m_a, m_b]."""
        out = np.empty(self.m_b - self.m_a + 1, dtype=np.float64)
        for k in range(self.contact.size - 1):
            i, j = int(self.contact[k]), int(self.contact[k + 1])
            yi = self.fn.f(i)
            rel = np.arange(i, j + 1) - i
            out[i - self.m_a:j - self.m_a + 1] = yi + self.seg_slopes[k] * rel * self.fn.grid_step
        out[0] = self.fn.f(self.m_a)
        out[-1] = self.fn.f(self.m_b)
        return out

    def shock_intervals(self) -> list[tuple[int, int]]:
        """Maximal open index intervals where the envelope is strictly off fn."""
        out = []
        for k in range(self.contact.size - 1):
            i, j = int(self.contact[k]), int(self.contact[k + 1])
            if j - i >= 2:
                out.append((i, j))
        return out

    def pieces(self) -> list[tuple[int, int, float]]:
        """Maximal constant-slope runs (i, j, slope), merging equal-slope edges."""
        out: list[tuple[int, int, float]] = []
        for k in range(self.contact.size - 1):
            i, j = int(self.contact[k]), int(self.contact[k + 1])
            s = float(self.seg_slopes[k])
            if out and out[-1][2] == s:
                out[-1] = (out[-1][0], j, s)
            else:
                out.append((i, j, s))
        return out

    def component_of_cells(self, ms: np.ndarray) -> np.ndarray:
        """Index of the constant-slope run each cell belongs to.

        Two waves are divided by this Riemann problem exactly when their
        cells map to different components.
        """
        seg = self._segment_of_cells(ms)
        # component id = number of strict slope changes before the segment
        changes = np.concatenate(([0], np.cumsum(self.seg_slopes[1:] != self.seg_slopes[:-1])))
        return changes[seg]


def _envelope_idx(fn: PiecewiseAffineFn, m_a: int, m_b: int, kind: str) -> EnvelopeResult:
    if m_a == m_b:
        raise DegenerateIntervalError("degenerate interval for envelope")
    if m_a > m_b:
        raise DomainError("interval endpoints out of order")
    if m_a < fn.m_lo or m_b > fn.m_hi:
        raise DomainError("interval outside the sampled domain")
    ys = fn.values[m_a - fn.m_lo:m_b - fn.m_lo + 1]
    if kind == "upper":
        ys = -ys
    chain = _lower_hull(ys)
    contact = np.asarray(chain, dtype=np.int64) + m_a
    ci = contact - fn.m_lo
    dy = np.diff(fn.values[ci])
    dx = np.diff(contact).astype(np.float64) * fn.grid_step
    seg = dy / dx
    return EnvelopeResult(fn, kind, m_a, m_b, contact, seg)


def lower_envelope_idx(fn: PiecewiseAffineFn, m_a: int, m_b: int) -> EnvelopeResult:
    return _envelope_idx(fn, m_a, m_b, "lower")


def upper_envelope_idx(fn: PiecewiseAffineFn, m_a: int, m_b: int) -> EnvelopeResult:
    return _envelope_idx(fn, m_a, m_b, "upper")


def lower_envelope(fn: PiecewiseAffineFn, a: float, b: float) -> EnvelopeResult:
    """Greatest convex minorant of fn on [a, b]; a, b must be grid values."""
    return lower_envelope_idx(fn, fn.index_of(a), fn.index_of(b))


def upper_envelope(fn: PiecewiseAffineFn, a: float, b: float) -> EnvelopeResult:
    """Least concave majorant of fn on [a, b]; a, b must be grid values."""
    return upper_envelope_idx(fn, fn.index_of(a), fn.index_of(b))


def envelope_slope(env: EnvelopeResult, m: int) -> float:
    """Constant derivative of the envelope on the open cell (u(m-1), u(m))."""
    return env.slope_at_cell(m)
