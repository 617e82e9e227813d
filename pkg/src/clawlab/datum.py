"""Piecewise constant initial data."""

from __future__ import annotations

from dataclasses import dataclass, field

from .envelope import PiecewiseAffineFn

__all__ = ["StepDatum"]


@dataclass(frozen=True)
class StepDatum:
    """Right-continuous step function: ``left`` before the first breakpoint,
    then value v_k on [x_k, x_{k+1})."""

    left: float
    steps: tuple[tuple[float, float], ...] = field(default_factory=tuple)

    def __post_init__(self):
        xs = [x for x, _ in self.steps]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("step positions must be strictly increasing")
        object.__setattr__(self, "steps", tuple((float(x), float(v)) for x, v in self.steps))

    def value_at(self, x: float) -> float:
        v = self.left
        for xk, vk in self.steps:
            if xk <= x:
                v = vk
            else:
                break
        return v

    def jumps(self) -> list[tuple[float, float, float]]:
        """(position, left value, right value) for every actual jump."""
        out = []
        v = self.left
        for xk, vk in self.steps:
            if vk != v:
                out.append((xk, v, vk))
            v = vk
        return out

    def tv(self) -> float:
        return sum(abs(r - l) for _, l, r in self.jumps())

    def index_jumps(self, flux: PiecewiseAffineFn) -> list[tuple[float, int, int]]:
        """Jumps with states converted to flux grid indices."""
        return [(x, flux.index_of(l), flux.index_of(r)) for x, l, r in self.jumps()]
