"""The builtin parametric generator family.

Covers the linear processes with one observed and one hidden confounder
(ids dgp1/dgp5/dgp6/dgp8/dgp10 as source generators and sim1..sim10 as
inference simulators), the three-covariate generator dgp11, the matched
ATE fixture pairs c1/c2 and c3/c4, and a constant generator that ignores
its parameters (the uninformative-posterior limit).

Simulator ids reuse the source's covariate rows ("X = X"): when a source
dataset is supplied they bootstrap covariates from it, otherwise they fall
back to the generating covariate law. Treatment equations written as
Binomial(linear predictor) are read as Bernoulli(expit(.)) so that
probabilities are always valid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import expit

from ..dataset import Dataset, bootstrap_covariates
from ..errors import ConfigurationError
from ..priors import LinearConstraint, PriorSpec
from ..rng import RandomStream
from .base import Theta, check_theta

# substream slots inside one generate call, so draw sites never collide
_Z, _X, _TNOISE, _TDRAW, _YNOISE = 0, 1, 2, 3, 4


@dataclass(frozen=True)
class BuiltinEntry:
    id: str
    param_names: tuple[str, ...]
    reference_theta: Theta
    prior: PriorSpec | None
    covariate_names: tuple[str, ...]
    bootstraps_source: bool
    fresh_covariates: Callable[[int, RandomStream], np.ndarray]
    core: Callable[..., tuple[np.ndarray, np.ndarray]]


def _std_normal_x(n: int, stream: RandomStream) -> np.ndarray:
    return stream.generator().standard_normal((n, 1))


def _bernoulli(gen: np.random.Generator, p: np.ndarray | float,
               n: int) -> np.ndarray:
    return (gen.random(n) < p).astype(float)


def _gauss_linear(y_sd: float, interact: bool = False):
    """T ~ Bern(expit(rho Z + beta X [+ XZ] + eps)), Y linear in (Z, X, T)."""

    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        z = stream.substream(_Z).generator().standard_normal(n)
        cross = x1 * z if interact else 0.0
        lp = (theta["rho"] * z + theta["beta"] * x1 + cross
              + 0.1 * stream.substream(_TNOISE).generator().standard_normal(n))
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(lp), n)
        else:
            t = np.full(n, float(force_t))
        y = (theta["rho"] * z + theta["beta"] * x1 + theta["tau"] * t + cross
             + y_sd * stream.substream(_YNOISE).generator().standard_normal(n))
        return t, y, {"z": z}

    return core


def _polynomial_outcome():
    """Nonlinear outcome Y = rho(Z^2 + ZX) + beta(X^2 - XT) + tau T + eps."""

    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        z = stream.substream(_Z).generator().standard_normal(n)
        lp = (theta["rho"] * z + theta["beta"] * x1
              + 0.1 * stream.substream(_TNOISE).generator().standard_normal(n))
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(lp), n)
        else:
            t = np.full(n, float(force_t))
        y = (theta["rho"] * (z ** 2 + z * x1)
             + theta["beta"] * (x1 ** 2 - x1 * t) + theta["tau"] * t
             + 0.1 * stream.substream(_YNOISE).generator().standard_normal(n))
        return t, y, {"z": z}

    return core


def _binary_confounder(x_coeff: float):
    """Deterministic treatment 1(Z + cX + U[0,0.5) >= 1), uniform outcome noise.

    With c = 0 the uniform term can never push Z = 0 over the threshold, so
    T equals Z exactly and only rho + tau is identifiable from the data.
    """

    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        z = _bernoulli(stream.substream(_Z).generator(), 0.5, n)
        if force_t is None:
            u = stream.substream(_TDRAW).generator().uniform(0.0, 0.5, n)
            t = (z + x_coeff * x1 + u >= 1.0).astype(float)
        else:
            t = np.full(n, float(force_t))
        y = (theta["rho"] * z + theta["beta"] * x1 + theta["tau"] * t
             + stream.substream(_YNOISE).generator().uniform(0.0, 0.5, n))
        return t, y, {"z": z}

    return core


def _three_covariate_x(n: int, stream: RandomStream) -> np.ndarray:
    gen = stream.generator()
    x1 = gen.standard_normal(n)
    x2 = gen.exponential(1.0 / 0.5, n)
    x3 = gen.normal(1.0, 1.0, n)
    return np.column_stack([x1, x2, x3])


def _three_covariate_core():
    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        total = x.sum(axis=1)
        lp = (total / 3.0
              + 0.1 * stream.substream(_TNOISE).generator().standard_normal(n))
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(lp), n)
        else:
            t = np.full(n, float(force_t))
        y = (total + theta["tau"] * t
             + 0.1 * stream.substream(_YNOISE).generator().standard_normal(n))
        return t, y, {}

    return core


def _matched_pair_core(interaction: bool):
    """Same ATE, different conditional outcome law: Y = X + tau T [+ XT]."""

    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(x1), n)
        else:
            t = np.full(n, float(force_t))
        y = x1 + theta["tau"] * t
        if interaction:
            y = y + x1 * t  # centered adjustment: E[X T | T] = T E[X] = 0
        return t, y, {}

    return core


def _hidden_pair_core(gaussian_hidden: bool):
    """Binary X, hidden Z of differing law, identical observable outcome law."""

    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        zgen = stream.substream(_Z).generator()
        z = zgen.normal(0.5, 1.0, n) if gaussian_hidden else _bernoulli(zgen, 0.5, n)
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(2.0 * x1), n)
        else:
            t = np.full(n, float(force_t))
        y = (x1 + theta["tau"] * t + z - 0.5
             + stream.substream(_YNOISE).generator().standard_normal(n))
        return t, y, {"z": z}

    return core


def _binary_x(n: int, stream: RandomStream) -> np.ndarray:
    return _bernoulli(stream.generator(), 0.5, n).reshape(n, 1)


def _constant_core():
    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), 0.5, n)
        else:
            t = np.full(n, float(force_t))
        y = stream.substream(_YNOISE).generator().standard_normal(n)
        return t, y, {}

    return core


def _box(rho, beta, tau) -> PriorSpec:
    return PriorSpec({"rho": rho, "beta": beta, "tau": tau})


_RBT = ("rho", "beta", "tau")
_REF_1 = {"rho": 1.0, "beta": -1.5, "tau": 1.5}
_WIDE = _box((-5.0, 5.0), (-5.0, 5.0), (-5.0, 5.0))

_ENTRIES: dict[str, BuiltinEntry] = {}


def _register(entry: BuiltinEntry) -> None:
    _ENTRIES[entry.id] = entry


def _linear_entry(id_, ref, prior, core, bootstraps, names=("x",),
                  fresh=_std_normal_x, params=_RBT):
    _register(BuiltinEntry(id_, params, dict(ref), prior, names, bootstraps,
                           fresh, core))


# source generators (fresh covariates)
_linear_entry("dgp1", _REF_1, _box((0.0, 2.0), (-2.0, 1.0), (0.0, 2.0)),
              _gauss_linear(0.1), bootstraps=False)
_linear_entry("dgp5", _REF_1, _WIDE, _polynomial_outcome(), bootstraps=False)
_linear_entry("dgp6", {"rho": 2.0, "beta": 0.5, "tau": 2.0},
              _box((0.0, 10.0), (0.0, 10.0), (0.0, 10.0)),
              _binary_confounder(0.0), bootstraps=False)
_linear_entry("dgp8", {"rho": 1.0, "beta": 0.3, "tau": 2.0},
              _box((0.0, 10.0), (0.0, 10.0), (0.0, 10.0)),
              _binary_confounder(0.4), bootstraps=False)
_linear_entry("dgp10", _REF_1, _box((-2.0, 0.0), (0.0, 2.0), (-2.0, 0.0)),
              _gauss_linear(0.1), bootstraps=False)
_register(BuiltinEntry("dgp11", ("tau",), {"tau": 3.0},
                       PriorSpec({"tau": (0.0, 10.0)}),
                       ("x1", "x2", "x3"), False,
                       _three_covariate_x, _three_covariate_core()))

# inference simulators (X = X: bootstrap the source covariates)
_linear_entry("sim1", _REF_1, _box((0.0, 2.0), (-2.0, 1.0), (0.0, 2.0)),
              _gauss_linear(0.1), bootstraps=True)
_linear_entry("sim2", _REF_1, _WIDE, _gauss_linear(1.0), bootstraps=True)


def _exponential_z_core():
    def core(theta, x, stream, force_t=None):
        n = x.shape[0]
        x1 = x[:, 0]
        z = stream.substream(_Z).generator().exponential(1.0 / 0.5, n)
        lp = (theta["rho"] * z + theta["beta"] * x1
              + 0.1 * stream.substream(_TNOISE).generator().standard_normal(n))
        if force_t is None:
            t = _bernoulli(stream.substream(_TDRAW).generator(), expit(lp), n)
        else:
            t = np.full(n, float(force_t))
        y = (theta["rho"] * z + theta["beta"] * x1 + theta["tau"] * t
             + 0.1 * stream.substream(_YNOISE).generator().standard_normal(n))
        return t, y, {"z": z}

    return core


_linear_entry("sim3", _REF_1, _WIDE, _exponential_z_core(), bootstraps=True)
_linear_entry("sim4", _REF_1, _WIDE, _gauss_linear(0.1, interact=True),
              bootstraps=True)
_linear_entry("sim5", _REF_1, _WIDE, _gauss_linear(0.1), bootstraps=True)
_linear_entry("sim6", {"rho": 2.0, "beta": 0.5, "tau": 2.0},
              _box((0.0, 10.0), (0.0, 10.0), (0.0, 10.0)),
              _binary_confounder(0.0), bootstraps=True)
_linear_entry("sim7", {"rho": 1.0, "beta": 0.3, "tau": 2.0},
              PriorSpec({"rho": (-5.0, 5.0), "beta": (0.0, 5.0),
                         "tau": (-20.0, 20.0)},
                        LinearConstraint({"rho": 1.0, "tau": 1.0}, 3.0)),
              _binary_confounder(0.0), bootstraps=True)
_linear_entry("sim8", {"rho": 1.0, "beta": 0.3, "tau": 2.0},
              _box((0.0, 10.0), (0.0, 10.0), (0.0, 10.0)),
              _binary_confounder(0.4), bootstraps=True)
_linear_entry("sim9", {"rho": 1.0, "beta": 0.3, "tau": 1.0},
              _box((0.0, 2.0), (0.0, 2.0), (0.0, 2.0)),
              _binary_confounder(0.0), bootstraps=True)
_linear_entry("sim10", _REF_1, _box((-2.0, 0.0), (0.0, 2.0), (-2.0, 0.0)),
              _gauss_linear(0.1), bootstraps=True)

# matched-ATE fixtures: no free parameters, tau fixed at 1
_register(BuiltinEntry("c1", ("tau",), {"tau": 1.0}, None, ("x",), False,
                       _std_normal_x, _matched_pair_core(interaction=False)))
_register(BuiltinEntry("c2", ("tau",), {"tau": 1.0}, None, ("x",), False,
                       _std_normal_x, _matched_pair_core(interaction=True)))
_register(BuiltinEntry("c3", ("tau",), {"tau": 1.0}, None, ("x",), False,
                       _binary_x, _hidden_pair_core(gaussian_hidden=False)))
_register(BuiltinEntry("c4", ("tau",), {"tau": 1.0}, None, ("x",), False,
                       _binary_x, _hidden_pair_core(gaussian_hidden=True)))

_linear_entry("constant", {"rho": 1.0, "beta": 1.0, "tau": 1.0},
              _box((0.0, 2.0), (0.0, 2.0), (0.0, 2.0)),
              _constant_core(), bootstraps=False)


def builtin_catalog() -> list[BuiltinEntry]:
    """Complete, stable catalog of builtin generators."""
    return list(_ENTRIES.values())


def builtin_entry(id_: str) -> BuiltinEntry:
    try:
        return _ENTRIES[id_]
    except KeyError:
        raise ConfigurationError(
            f"unknown builtin simulator {id_!r}; known ids: "
            f"{', '.join(sorted(_ENTRIES))}") from None


def builtin_simulate(id_: str, theta: Theta, n: int, stream: RandomStream,
                     source: Dataset | None = None,
                     force_t: int | None = None) -> Dataset:
    dataset, _ = builtin_simulate_full(id_, theta, n, stream, source, force_t)
    return dataset


def builtin_simulate_full(id_: str, theta: Theta, n: int, stream: RandomStream,
                          source: Dataset | None = None,
                          force_t: int | None = None
                          ) -> tuple[Dataset, dict[str, np.ndarray]]:
    """Like :func:`builtin_simulate` but also returns hidden latents,
    so tests can run the infeasible full-information regression."""
    entry = builtin_entry(id_)
    theta = check_theta(theta, entry.param_names)
    if entry.bootstraps_source and source is not None:
        if source.p != len(entry.covariate_names):
            raise ConfigurationError(
                f"{id_} expects {len(entry.covariate_names)} covariates, "
                f"source has {source.p}")
        x = bootstrap_covariates(source, n, stream.substream(_X))
    else:
        x = entry.fresh_covariates(n, stream.substream(_X))
    t, y, extras = entry.core(theta, x, stream, force_t=force_t)
    return Dataset(x, t, y, entry.covariate_names), extras


def builtin_mc_ate(id_: str, theta: Theta, n: int, stream: RandomStream,
                   source: Dataset | None = None) -> float:
    """Monte-Carlo ATE from two independent intervened samples."""
    treated = builtin_simulate(id_, theta, n, stream.substream(10), source,
                               force_t=1)
    control = builtin_simulate(id_, theta, n, stream.substream(11), source,
                               force_t=0)
    return float(treated.outcome.mean() - control.outcome.mean())
