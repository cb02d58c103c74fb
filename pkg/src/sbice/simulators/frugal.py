"""Copula-coupled generators: covariate margins, a logistic treatment
model, and a causal outcome margin N(a + tau*T, sigma) tied to the
covariates through a Gaussian copula.

Sampling order: (1) latent covariate scores drawn jointly from the
Pearson-converted covariate block; (2) scores pushed through Phi and each
margin's quantile (Bernoulli margins threshold the latent score directly);
(3) treatment from a logistic model on the realized covariates;
(4) the causal-margin score from its conditional law given the covariate
scores; (5) the outcome from the causal margin's quantile; (6) hidden
covariates dropped. Hidden covariates are generated and then dropped, never
skipped, so the rho override has a concrete latent column to act on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, ndtr, ndtri

from ..copula import (CorrelationMatrix, conditional_weights, pearson_matrix)
from ..dataset import Dataset
from ..distributions import DistributionSpec, quantile
from ..errors import ConfigurationError
from ..priors import PriorSpec
from ..rng import RandomStream
from .base import GeneratedDataset, Theta, check_theta

_SCORES, _TDRAW, _YSCORE = 0, 1, 2


@dataclass(frozen=True)
class CovariateMargin:
    name: str
    spec: DistributionSpec
    hidden: bool = False


@dataclass(frozen=True)
class FrugalConfig:
    """Full specification of one copula-coupled generator.

    The correlation matrix is Spearman-scale over (covariates..., causal
    margin), margin last. With ``rho_override`` the hidden-covariate rows of
    the margin column are replaced by the parameter rho at simulation time.
    """

    margins: tuple[CovariateMargin, ...]
    propensity_intercept: float
    propensity_coefficients: tuple[float, ...]
    outcome_base: float
    outcome_sd: float
    correlation: CorrelationMatrix
    propensity_interactions: tuple[tuple[int, int, float], ...] = ()
    rho_override: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "margins", tuple(self.margins))
        object.__setattr__(self, "propensity_coefficients",
                           tuple(float(c) for c in self.propensity_coefficients))
        object.__setattr__(self, "propensity_interactions",
                           tuple((int(i), int(j), float(c))
                                 for i, j, c in self.propensity_interactions))
        k = len(self.margins)
        if k == 0:
            raise ConfigurationError("frugal generator needs covariate margins")
        if len(set(m.name for m in self.margins)) != k:
            raise ConfigurationError("covariate names must be unique")
        if self.correlation.dim != k + 1:
            raise ConfigurationError(
                f"correlation matrix dim {self.correlation.dim} != "
                f"covariates + 1 = {k + 1}")
        if len(self.propensity_coefficients) != k:
            raise ConfigurationError("one propensity coefficient per covariate")
        for i, j, _ in self.propensity_interactions:
            if not (0 <= i < k and 0 <= j < k):
                raise ConfigurationError("interaction indices out of range")
        if self.outcome_sd <= 0:
            raise ConfigurationError("outcome margin sd must be > 0")
        if self.rho_override and not any(m.hidden for m in self.margins):
            raise ConfigurationError("rho override needs a hidden covariate")

    @property
    def param_names(self) -> tuple[str, ...]:
        return ("tau", "rho") if self.rho_override else ("tau",)

    @property
    def hidden_indices(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.margins) if m.hidden)

    @property
    def observed_names(self) -> tuple[str, ...]:
        return tuple(m.name for m in self.margins if not m.hidden)


def _spearman_with_override(config: FrugalConfig, theta: Theta) -> CorrelationMatrix:
    if not config.rho_override:
        return config.correlation
    rho = theta["rho"]
    if not -1.0 <= rho <= 1.0:
        raise ConfigurationError(f"rho must lie in [-1, 1], got {rho}")
    entries = config.correlation.entries.copy()
    k = len(config.margins)
    for i in config.hidden_indices:
        entries[i, k] = entries[k, i] = rho
    return CorrelationMatrix(entries)


def frugal_simulate(config: FrugalConfig, theta: Theta, stream: RandomStream,
                    n: int, force_t: int | None = None) -> GeneratedDataset:
    theta = check_theta(theta, config.param_names)
    k = len(config.margins)
    pearson = pearson_matrix(_spearman_with_override(config, theta))

    chol = np.linalg.cholesky(pearson[:k, :k])
    raw = stream.substream(_SCORES).generator().standard_normal((n, k))
    scores = raw @ chol.T

    values = np.empty((n, k))
    for j, margin in enumerate(config.margins):
        if margin.spec.kind == "bernoulli":
            p = margin.spec.params[0]
            values[:, j] = (scores[:, j] > ndtri(1.0 - p)) if 0 < p < 1 else p
        else:
            u = np.clip(ndtr(scores[:, j]), 1e-300, 1.0 - 1e-16)
            values[:, j] = quantile(margin.spec, u)

    lp = config.propensity_intercept + values @ np.asarray(
        config.propensity_coefficients)
    for i, j, c in config.propensity_interactions:
        lp = lp + c * values[:, i] * values[:, j]
    if force_t is None:
        t = (stream.substream(_TDRAW).generator().random(n) < expit(lp))
        t = t.astype(float)
    else:
        t = np.full(n, float(force_t))

    weights, cond_sd = conditional_weights(pearson)
    y_score = (scores @ weights
               + cond_sd * stream.substream(_YSCORE).generator().standard_normal(n))
    y = config.outcome_base + theta["tau"] * t + config.outcome_sd * y_score

    observed = [j for j in range(k) if not config.margins[j].hidden]
    dataset = Dataset(values[:, observed], t, y, config.observed_names)
    return GeneratedDataset(dataset, theta)


def frugal_mc_ate(config: FrugalConfig, theta: Theta, n: int,
                  stream: RandomStream) -> float:
    treated = frugal_simulate(config, theta, stream.substream(10), n, force_t=1)
    control = frugal_simulate(config, theta, stream.substream(11), n, force_t=0)
    return float(treated.dataset.outcome.mean() - control.dataset.outcome.mean())


@dataclass(frozen=True)
class FrugalEntry:
    id: str
    config: FrugalConfig
    reference_theta: Theta
    prior: PriorSpec

    @property
    def param_names(self) -> tuple[str, ...]:
        return self.config.param_names
