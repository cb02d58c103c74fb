"""Catalog of copula-coupled generator presets.

Five generator families plus their unobserved-confounding variants. The
(u) variants hide one or more covariates and expose rho, which replaces the
hidden-covariate rows of the margin column, so simulating a variant at its
reference theta reproduces the full generating process exactly.

frugal_dgp1_approx / frugal_dgp2_approx are approximate fixtures: the
generating equations assign one covariate an invalid Beta(0.0, 0.25)
margin, which these presets replace with Beta(0.5, 0.25). They are smoke
fixtures only and no quantitative claim is checked against them.
"""

from __future__ import annotations

import numpy as np

from ..copula import CorrelationMatrix
from ..distributions import (bernoulli, beta, gamma_mean_dispersion, normal,
                             student_t)
from ..errors import ConfigurationError
from ..priors import PriorSpec
from .frugal import CovariateMargin, FrugalConfig, FrugalEntry

_R1 = CorrelationMatrix(np.where(np.eye(6, dtype=bool), 1.0, 0.8))

_R2 = CorrelationMatrix(np.array([
    [1.0, 0.8, 0.2, 0.3, 0.2, 0.7],
    [0.8, 1.0, 0.1, 0.4, 0.9, 0.3],
    [0.2, 0.1, 1.0, 0.5, 0.8, 0.1],
    [0.3, 0.4, 0.5, 1.0, 0.9, 0.5],
    [0.2, 0.9, 0.8, 0.9, 1.0, 0.6],
    [0.7, 0.3, 0.1, 0.5, 0.6, 1.0],
]))

_R3 = CorrelationMatrix(np.array([
    [1.0, 0.0, 0.0, -0.5],
    [0.0, 1.0, 0.0, -0.3],
    [0.0, 0.0, 1.0, 0.9],
    [-0.5, -0.3, 0.9, 1.0],
]))

_R4 = CorrelationMatrix(np.array([
    [1.0, 0.5, 0.3, 0.1, 0.8],
    [0.5, 1.0, 0.4, 0.1, 0.8],
    [0.3, 0.4, 1.0, 0.1, 0.8],
    [0.1, 0.1, 0.1, 1.0, 0.8],
    [0.8, 0.8, 0.8, 0.8, 1.0],
]))

# ten-covariate family: the stated 10x10 matrix covers nine covariates plus
# the causal margin, so the tenth covariate enters the copula independently
_R5_RAW = np.array([
    [1.0, 0.3, 0.4, 0.5, 0.1, -0.2, -0.7, 0.5, -0.4, 0.5],
    [0.3, 1.0, -0.3, 0.6, -0.3, 0.4, -0.4, 0.6, 0.3, 0.2],
    [0.4, -0.3, 1.0, -0.5, 0.2, -0.1, -0.1, 0.0, -0.4, -0.4],
    [0.5, 0.6, -0.5, 1.0, -0.2, -0.2, -0.5, 0.5, 0.3, 0.4],
    [0.1, -0.3, 0.2, -0.2, 1.0, -0.1, -0.1, -0.5, -0.6, -0.2],
    [-0.2, 0.4, -0.1, -0.2, -0.2, 1.0, 0.0, 0.4, 0.2, 0.5],
    [-0.7, -0.4, -0.1, -0.5, -0.1, 0.0, 1.0, -0.5, 0.4, -0.4],
    [0.5, 0.6, 0.0, 0.5, -0.5, 0.5, -0.5, 1.0, 0.4, 0.4],
    [-0.4, 0.3, -0.4, 0.3, -0.6, 0.2, 0.4, 0.4, 1.0, 0.4],
    [0.5, 0.2, -0.4, 0.4, -0.2, 0.5, -0.4, 0.4, 0.4, 1.0],
])


def _embed_r5() -> CorrelationMatrix:
    # two entry pairs of the stated matrix disagree across the diagonal;
    # symmetrize by averaging before embedding
    sym = (_R5_RAW + _R5_RAW.T) / 2.0
    full = np.eye(11)
    full[:9, :9] = sym[:9, :9]
    full[:9, 10] = full[10, :9] = sym[:9, 9]
    return CorrelationMatrix(full)


_R5 = _embed_r5()


def _margins(*specs, hidden=()):
    out = []
    for i, (name, spec) in enumerate(specs):
        out.append(CovariateMargin(name, spec, hidden=name in hidden))
    return tuple(out)


def _entry(id_, config, reference, prior):
    return FrugalEntry(id_, config, dict(reference), prior)


_TAU_RHO_10 = PriorSpec({"tau": (0.0, 10.0), "rho": (-1.0, 1.0)})
_TAU_10 = PriorSpec({"tau": (0.0, 10.0)})
_TAU_RHO_20 = PriorSpec({"tau": (-20.0, 20.0), "rho": (-1.0, 1.0)})
_TAU_20 = PriorSpec({"tau": (-20.0, 20.0)})


def _dgp12_margins(hidden):
    return _margins(
        ("z1", beta(1.0, 1.0)),
        ("z2", normal(1.0, 0.5)),
        ("x1", normal(-2.0, 2.0)),
        ("x2", beta(0.5, 0.25)),
        ("x3", student_t(1.0, 1.0, 3.0)),
        hidden=hidden,
    )


def _dgp12_config(correlation):
    # the generating propensity carries two separate x3 terms (1.5 and 2.5)
    return FrugalConfig(
        margins=_dgp12_margins(hidden=("z1", "z2")),
        propensity_intercept=0.5,
        propensity_coefficients=(0.3, 1.0, 0.4, 1.0, 1.5 + 2.5),
        propensity_interactions=((2, 0, 1.0), (2, 4, -0.5)),
        outcome_base=0.0,
        outcome_sd=1.0,
        correlation=correlation,
        rho_override=True,
    )


def _dgp3_config(hidden=(), rho_override=False):
    return FrugalConfig(
        margins=_margins(("x1", normal(2.0, 1.0)),
                         ("x2", gamma_mean_dispersion(1.0, 1.0)),
                         ("x3", normal(3.0, 1.0)), hidden=hidden),
        propensity_intercept=0.0,
        propensity_coefficients=(-0.3, 0.3, -0.4),
        propensity_interactions=((0, 1, -0.1),),
        outcome_base=0.0,
        outcome_sd=1.5,
        correlation=_R3,
        rho_override=rho_override,
    )


def _dgp4_config(hidden=(), rho_override=False):
    return FrugalConfig(
        margins=_margins(*((f"x{i}", gamma_mean_dispersion(1.0, 1.0))
                           for i in range(1, 5)), hidden=hidden),
        propensity_intercept=-2.0,
        propensity_coefficients=(1.0, 1.0, 1.0, 1.0),
        outcome_base=0.5,
        outcome_sd=1.0,
        correlation=_R4,
        rho_override=rho_override,
    )


def _dgp5_config(hidden=(), rho_override=False):
    specs = [(f"x{i}", gamma_mean_dispersion(1.3, 1.0)) for i in range(1, 6)]
    specs += [(f"x{i}", bernoulli(0.5)) for i in range(6, 11)]
    return FrugalConfig(
        margins=_margins(*specs, hidden=hidden),
        propensity_intercept=-0.3,
        propensity_coefficients=(0.1, 0.2, 0.5, -0.2, 1.0,
                                 0.3, -0.4, 0.7, -0.1, 0.9),
        outcome_base=2.5,
        outcome_sd=1.0,
        correlation=_R5,
        rho_override=rho_override,
    )


_PRESETS: dict[str, FrugalEntry] = {e.id: e for e in [
    _entry("frugal_dgp1_approx", _dgp12_config(_R1),
           {"tau": 3.0, "rho": 0.8}, _TAU_RHO_10),
    _entry("frugal_dgp2_approx", _dgp12_config(_R2),
           {"tau": 3.0, "rho": 0.5}, _TAU_RHO_10),
    _entry("frugal_dgp3", _dgp3_config(), {"tau": 5.0}, _TAU_10),
    _entry("frugal_sim3u", _dgp3_config(hidden=("x2",), rho_override=True),
           {"tau": 5.0, "rho": -0.3}, _TAU_RHO_10),
    _entry("frugal_dgp4", _dgp4_config(), {"tau": 5.0}, _TAU_20),
    _entry("frugal_sim4u", _dgp4_config(hidden=("x4",), rho_override=True),
           {"tau": 5.0, "rho": 0.8}, _TAU_RHO_20),
    _entry("frugal_dgp5", _dgp5_config(), {"tau": -5.0}, _TAU_20),
    _entry("frugal_sim5u", _dgp5_config(hidden=("x3", "x7"), rho_override=True),
           {"tau": -5.0, "rho": -0.4}, _TAU_RHO_20),
]}


def frugal_catalog() -> list[FrugalEntry]:
    return list(_PRESETS.values())


def frugal_entry(id_: str) -> FrugalEntry:
    try:
        return _PRESETS[id_]
    except KeyError:
        raise ConfigurationError(
            f"unknown frugal preset {id_!r}; known ids: "
            f"{', '.join(sorted(_PRESETS))}") from None
