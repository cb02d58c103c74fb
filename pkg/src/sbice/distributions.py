"""Univariate distributions with sampling, CDF and quantile support.

These are the marginal building blocks of every data-generating process:
covariate margins, noise terms and the causal outcome margin. Each kind is
parameterized the way the generating equations write it (Gamma by mean and
dispersion, Exponential by rate). CDF/quantile pairs are exact inverses to
well below 1e-8, which the copula round-trips rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import ConfigurationError
from .rng import RandomStream

KINDS = ("normal", "uniform", "gamma", "beta", "student_t", "bernoulli", "exponential")


@dataclass(frozen=True)
class DistributionSpec:
    """One univariate distribution: a kind tag plus its parameter tuple."""

    kind: str
    params: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        _validate(self)


def normal(mean: float, sd: float) -> DistributionSpec:
    return DistributionSpec("normal", (mean, sd))


def uniform(lo: float, hi: float) -> DistributionSpec:
    return DistributionSpec("uniform", (lo, hi))


def gamma_mean_dispersion(mu: float, phi: float) -> DistributionSpec:
    """Gamma with mean ``mu`` and dispersion ``phi`` (shape 1/phi, scale mu*phi)."""
    return DistributionSpec("gamma", (mu, phi))


def beta(a: float, b: float) -> DistributionSpec:
    return DistributionSpec("beta", (a, b))


def student_t(loc: float, scale: float, df: float) -> DistributionSpec:
    return DistributionSpec("student_t", (loc, scale, df))


def bernoulli(p: float) -> DistributionSpec:
    return DistributionSpec("bernoulli", (p,))


def exponential(rate: float) -> DistributionSpec:
    return DistributionSpec("exponential", (rate,))


def _validate(spec: DistributionSpec) -> None:
    p = spec.params
    if any(not np.isfinite(v) for v in p):
        raise ConfigurationError(f"non-finite parameter in {spec.kind}{p}")
    kind = spec.kind
    if kind == "normal" and p[1] <= 0:
        raise ConfigurationError(f"normal sd must be > 0, got {p[1]}")
    # hi == lo is allowed as a degenerate point mass (used by edge-case tests)
    if kind == "uniform" and p[1] < p[0]:
        raise ConfigurationError(f"uniform needs hi >= lo, got [{p[0]}, {p[1]}]")
    if kind == "gamma" and (p[0] <= 0 or p[1] <= 0):
        raise ConfigurationError(f"gamma needs mu > 0 and phi > 0, got {p}")
    if kind == "beta" and (p[0] <= 0 or p[1] <= 0):
        raise ConfigurationError(f"beta needs a > 0 and b > 0, got {p}")
    if kind == "student_t" and (p[1] <= 0 or p[2] <= 0):
        raise ConfigurationError(f"student_t needs scale > 0 and df > 0, got {p}")
    if kind == "bernoulli" and not 0.0 <= p[0] <= 1.0:
        raise ConfigurationError(f"bernoulli needs 0 <= p <= 1, got {p[0]}")
    if kind == "exponential" and p[0] <= 0:
        raise ConfigurationError(f"exponential rate must be > 0, got {p[0]}")


def _gamma_shape_scale(params: tuple[float, ...]) -> tuple[float, float]:
    mu, phi = params
    return 1.0 / phi, mu * phi


def draw(spec: DistributionSpec, stream: RandomStream, count: int) -> np.ndarray:
    """Return ``count`` i.i.d. draws, reproducible per the stream contract."""
    if count < 0:
        raise ConfigurationError(f"draw count must be >= 0, got {count}")
    gen = stream.generator()
    kind, p = spec.kind, spec.params
    if kind == "normal":
        return gen.normal(p[0], p[1], count)
    if kind == "uniform":
        if p[1] == p[0]:
            return np.full(count, p[0])
        return gen.uniform(p[0], p[1], count)
    if kind == "gamma":
        shape, scale = _gamma_shape_scale(p)
        return gen.gamma(shape, scale, count)
    if kind == "beta":
        return gen.beta(p[0], p[1], count)
    if kind == "student_t":
        return p[0] + p[1] * gen.standard_t(p[2], count)
    if kind == "bernoulli":
        return (gen.random(count) < p[0]).astype(float)
    if kind == "exponential":
        return gen.exponential(1.0 / p[0], count)
    raise ConfigurationError(f"unknown kind {kind!r}")


def cdf(spec: DistributionSpec, x) -> np.ndarray | float:
    """P(X <= x); vectorized over ``x``."""
    x = np.asarray(x, dtype=float)
    kind, p = spec.kind, spec.params
    if kind == "normal":
        out = special.ndtr((x - p[0]) / p[1])
    elif kind == "uniform":
        if p[1] == p[0]:
            out = (x >= p[0]).astype(float)
        else:
            out = np.clip((x - p[0]) / (p[1] - p[0]), 0.0, 1.0)
    elif kind == "gamma":
        shape, scale = _gamma_shape_scale(p)
        out = np.where(x > 0, special.gammainc(shape, np.maximum(x, 0.0) / scale), 0.0)
    elif kind == "beta":
        out = special.betainc(p[0], p[1], np.clip(x, 0.0, 1.0))
    elif kind == "student_t":
        out = special.stdtr(p[2], (x - p[0]) / p[1])
    elif kind == "bernoulli":
        out = np.where(x < 0, 0.0, np.where(x < 1, 1.0 - p[0], 1.0))
    elif kind == "exponential":
        out = np.where(x > 0, -np.expm1(-p[0] * np.maximum(x, 0.0)), 0.0)
    else:
        raise ConfigurationError(f"unknown kind {kind!r}")
    return float(out) if out.ndim == 0 else out


def quantile(spec: DistributionSpec, u) -> np.ndarray | float:
    """Inverse CDF on (0, 1); exact inverse of :func:`cdf` for continuous kinds."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0.0) or np.any(u >= 1.0):
        raise ConfigurationError("quantile argument must lie strictly inside (0, 1)")
    kind, p = spec.kind, spec.params
    if kind == "normal":
        out = p[0] + p[1] * special.ndtri(u)
    elif kind == "uniform":
        out = p[0] + u * (p[1] - p[0])
    elif kind == "gamma":
        shape, scale = _gamma_shape_scale(p)
        out = special.gammaincinv(shape, u) * scale
    elif kind == "beta":
        out = special.betaincinv(p[0], p[1], u)
    elif kind == "student_t":
        out = p[0] + p[1] * special.stdtrit(p[2], u)
    elif kind == "bernoulli":
        out = (u > 1.0 - p[0]).astype(float)
    elif kind == "exponential":
        out = -np.log1p(-u) / p[0]
    else:
        raise ConfigurationError(f"unknown kind {kind!r}")
    return float(out) if out.ndim == 0 else out
