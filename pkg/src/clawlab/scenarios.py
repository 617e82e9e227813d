"""Named and randomized problem setups used by the demos, the CLI, and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datum import StepDatum
from .envelope import PiecewiseAffineFn

__all__ = [
    "burgers_flux", "counterexample_flux", "CounterexampleSetup",
    "counterexample_setup", "random_flux", "random_datum", "random_wft_scenario",
    "random_glimm_scenario",
]

SQRT2 = math.sqrt(2.0)
SQRT17 = math.sqrt(17.0)


def burgers_flux(grid_step: float, m_lo: int, m_hi: int,
                 grid_origin: float = 0.0) -> PiecewiseAffineFn:
    """Samples of u^2/2."""
    return PiecewiseAffineFn.from_callable(lambda u: 0.5 * u * u,
                                           grid_origin, grid_step, m_lo, m_hi)


def _counterexample_f(alpha: float, L: float, eps: float):
    def f(u: float) -> float:
        if u <= -L:
            return -0.5 * alpha * (u + 2.0 * L) ** 2 + alpha * L * L
        if u <= eps:
            return 0.5 * alpha * u * u
        if u <= 3.0 * eps:
            return -0.5 * alpha * (u - 2.0 * eps) ** 2 + alpha * eps * eps
        return -alpha * eps * (u - 3.0 * eps) + 0.5 * alpha * eps * eps
    return f


def counterexample_flux(alpha: float, L: float, eps: float, q: int = 4) -> PiecewiseAffineFn:
    """The concave/convex/concave/affine flux of the divergence study,
    sampled with grid step eps/q so that -L, eps, 3*eps and the middle state
    -2L land exactly on the grid."""
    if not (0.0 < eps < L < 1.0):
        raise ValueError("need 0 < eps << L << 1")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if q < 4:
        raise ValueError("q must be an integer >= 4")
    ratio = L / eps
    if abs(ratio - round(ratio)) > 1e-9:
        raise ValueError("L/eps must be an integer for exact grid placement")
    step = eps / q
    m_lo = int(math.floor(-L * (2.0 + SQRT2) / step)) - 2
    m_hi = 5 * q
    return PiecewiseAffineFn.from_callable(_counterexample_f(alpha, L, eps),
                                           0.0, step, m_lo, m_hi)


@dataclass(frozen=True)
class CounterexampleSetup:
    alpha: float
    L: float
    eps: float
    q: int
    flux: PiecewiseAffineFn
    datum: StepDatum
    # exact states and their grid-snapped versions
    u_minus_exact: float
    u_minus: float
    u_mid: float
    u_plus: float
    delta_exact: float

    @property
    def contact_position(self) -> float:
        return 1.0 + self.eps / self.delta_exact


def counterexample_setup(alpha: float, L: float, eps: float, q: int = 4) -> CounterexampleSetup:
    """Flux, datum, and reference states for the divergence scenario.

    The left state -L*(2+sqrt 2) is irrational in grid units and is snapped to
    the nearest grid value; everything else sits on the grid exactly.
    """
    flux = counterexample_flux(alpha, L, eps, q)
    step = flux.grid_step
    u_minus_exact = -L * (2.0 + SQRT2)
    u_minus = round(u_minus_exact / step) * step
    u_mid = -2.0 * L
    u_plus = 4.0 * eps
    delta_exact = eps * (SQRT17 - 4.0)
    datum = StepDatum(u_minus, (
        (0.0, u_mid),
        (1.0, u_plus),
        (1.0 + eps / delta_exact, 3.0 * eps),
    ))
    return CounterexampleSetup(alpha, L, eps, q, flux, datum,
                               u_minus_exact, u_minus, u_mid, u_plus, delta_exact)


def random_flux(rng: np.random.Generator, grid_step: float, m_lo: int, m_hi: int,
                max_kinks: int = 12, slope_range=(-1.0, 1.0)) -> PiecewiseAffineFn:
    """Piecewise affine flux with at most ``max_kinks`` slope changes."""
    n_cells = m_hi - m_lo
    n_kinks = int(rng.integers(0, max_kinks + 1))
    kinks = np.sort(rng.choice(np.arange(1, n_cells), size=min(n_kinks, n_cells - 1),
                               replace=False)) if n_cells > 1 and n_kinks else np.array([], dtype=int)
    bounds = np.concatenate(([0], kinks, [n_cells]))
    slopes = np.empty(n_cells)
    for a, b in zip(bounds[:-1], bounds[1:]):
        slopes[a:b] = rng.uniform(*slope_range)
    values = np.concatenate(([0.0], np.cumsum(slopes) * grid_step))
    values += rng.uniform(-1.0, 1.0)
    return PiecewiseAffineFn(0.0, grid_step, m_lo, values)


def random_datum(rng: np.random.Generator, flux: PiecewiseAffineFn,
                 max_fronts: int, max_jump_cells: int, margin: int = 2,
                 x_span: float = 10.0) -> StepDatum:
    """Step datum with grid values kept ``margin`` cells inside the flux domain."""
    lo, hi = flux.m_lo + margin, flux.m_hi - margin
    n_jumps = int(rng.integers(1, max_fronts + 1))
    xs = np.sort(rng.uniform(0.0, x_span, size=n_jumps))
    xs += np.arange(n_jumps) * 1e-6                      # break exact ties
    cur = int(rng.integers(lo, hi + 1))
    left = flux.u(cur)
    steps = []
    for x in xs:
        delta = int(rng.integers(1, max_jump_cells + 1)) * (1 if rng.random() < 0.5 else -1)
        nxt = min(max(cur + delta, lo), hi)
        if nxt == cur:
            nxt = cur + (1 if cur < hi else -1)
        steps.append((float(x), float(flux.u(nxt))))
        cur = nxt
    return StepDatum(float(left), tuple(steps))


def random_wft_scenario(seed: int):
    """Flux and datum for one randomized wavefront-tracking run."""
    rng = np.random.default_rng(seed)
    flux = random_flux(rng, grid_step=0.05, m_lo=-26, m_hi=26, max_kinks=12)
    datum = random_datum(rng, flux, max_fronts=40, max_jump_cells=5)
    return flux, datum


def random_glimm_scenario(seed: int, max_steps: int = 200):
    """Flux with slopes in (0, 1), datum, step count, for one Glimm run."""
    rng = np.random.default_rng(seed)
    flux = random_flux(rng, grid_step=0.05, m_lo=-26, m_hi=26,
                       max_kinks=12, slope_range=(0.05, 0.95))
    datum = random_datum(rng, flux, max_fronts=8, max_jump_cells=5)
    n_steps = int(rng.integers(20, max_steps + 1))
    return flux, datum, n_steps
