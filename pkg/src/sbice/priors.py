"""Uniform box priors over generator parameters, with an optional linear
equality constraint (e.g. the sum of two parameters held at a constant).

Constrained sampling draws the free parameters uniformly, solves for the
pivot parameter (the last one with a nonzero coefficient), and rejects
draws whose pivot leaves its bounds; every accepted sample satisfies the
constraint exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigurationError, SimulationError
from .rng import RandomStream

_CONSTRAINT_TOL = 1e-9
_MAX_REJECTION_TRIES = 100_000


@dataclass(frozen=True)
class LinearConstraint:
    """Sum_i coefficients[name_i] * theta[name_i] == constant."""

    coefficients: dict[str, float]
    constant: float

    def __post_init__(self) -> None:
        coeffs = {str(k): float(v) for k, v in self.coefficients.items()}
        if not any(v != 0.0 for v in coeffs.values()):
            raise ConfigurationError("constraint needs a nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "constant", float(self.constant))

    def residual(self, theta: dict[str, float]) -> float:
        total = sum(a * theta[name] for name, a in self.coefficients.items())
        return total - self.constant


@dataclass(frozen=True)
class PriorSpec:
    """Independent Uniform(lo, hi) bounds per parameter plus optional constraint."""

    bounds: dict[str, tuple[float, float]]
    constraint: LinearConstraint | None = None

    def __post_init__(self) -> None:
        clean: dict[str, tuple[float, float]] = {}
        for name, (lo, hi) in self.bounds.items():
            lo, hi = float(lo), float(hi)
            if not lo < hi:
                raise ConfigurationError(
                    f"prior for {name!r} needs lo < hi, got [{lo}, {hi}]")
            clean[str(name)] = (lo, hi)
        if not clean:
            raise ConfigurationError("prior declares no parameters")
        object.__setattr__(self, "bounds", clean)
        if self.constraint is not None:
            unknown = set(self.constraint.coefficients) - set(clean)
            if unknown:
                raise ConfigurationError(
                    f"constraint references unknown parameters {sorted(unknown)}")
            if not self._feasible():
                raise ConfigurationError("constraint has an empty feasible slice")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self.bounds)

    @property
    def pivot(self) -> str | None:
        """Parameter solved from the others under the constraint."""
        if self.constraint is None:
            return None
        nonzero = [n for n in self.names
                   if self.constraint.coefficients.get(n, 0.0) != 0.0]
        return nonzero[-1]

    @property
    def free_names(self) -> tuple[str, ...]:
        pivot = self.pivot
        return tuple(n for n in self.names if n != pivot)

    def _feasible(self) -> bool:
        c = self.constraint
        pivot = self.pivot
        a_p = c.coefficients[pivot]
        rest_lo = rest_hi = 0.0
        for name in self.free_names:
            a = c.coefficients.get(name, 0.0)
            lo, hi = self.bounds[name]
            rest_lo += min(a * lo, a * hi)
            rest_hi += max(a * lo, a * hi)
        # pivot = (constant - rest) / a_p over the free box
        cand = sorted(((c.constant - rest_hi) / a_p, (c.constant - rest_lo) / a_p))
        lo_p, hi_p = self.bounds[pivot]
        return cand[0] <= hi_p and cand[1] >= lo_p

    def solve_pivot(self, free_theta: dict[str, float]) -> float:
        c = self.constraint
        pivot = self.pivot
        rest = sum(c.coefficients.get(n, 0.0) * free_theta[n]
                   for n in self.free_names)
        return (c.constant - rest) / c.coefficients[pivot]

    def in_support(self, theta: dict[str, float]) -> bool:
        if set(theta) != set(self.bounds):
            return False
        for name, (lo, hi) in self.bounds.items():
            if not lo <= theta[name] <= hi:
                return False
        if self.constraint is not None:
            if abs(self.constraint.residual(theta)) > _CONSTRAINT_TOL:
                return False
        return True

    def mean(self) -> dict[str, float]:
        """Box midpoints (exact prior mean only without a constraint)."""
        return {n: (lo + hi) / 2.0 for n, (lo, hi) in self.bounds.items()}

    def variance(self) -> dict[str, float]:
        return {n: (hi - lo) ** 2 / 12.0 for n, (lo, hi) in self.bounds.items()}


def sample_prior(prior: PriorSpec, stream: RandomStream) -> dict[str, float]:
    """One draw: uniform on the box, or uniform on the constraint slice."""
    gen = stream.generator()
    if prior.constraint is None:
        return {name: float(gen.uniform(lo, hi))
                for name, (lo, hi) in prior.bounds.items()}
    pivot = prior.pivot
    for _ in range(_MAX_REJECTION_TRIES):
        theta = {name: float(gen.uniform(*prior.bounds[name]))
                 for name in prior.free_names}
        value = prior.solve_pivot(theta)
        lo, hi = prior.bounds[pivot]
        if lo <= value <= hi:
            theta[pivot] = value
            return {name: theta[name] for name in prior.names}
    raise SimulationError("constraint rejection sampling failed to find a "
                          "feasible point; slice is effectively empty")
