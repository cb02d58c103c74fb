"""Simulator configuration, the generated-dataset value type and dispatch."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..dataset import Dataset
from ..errors import ConfigurationError
from ..rng import RandomStream

Theta = dict[str, float]


@dataclass(frozen=True)
class GeneratedDataset:
    """A dataset together with the parameter vector that produced it.

    ``tau_star`` is the generating tau -- the per-dataset ground-truth ATE
    every estimator is benchmarked against. It is never an estimate.
    """

    dataset: Dataset
    theta: Theta
    tau_star: float = field(init=False)

    def __post_init__(self) -> None:
        theta = {str(k): float(v) for k, v in self.theta.items()}
        if "tau" not in theta:
            raise ConfigurationError("generated datasets need a tau parameter")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "tau_star", theta["tau"])


@dataclass(frozen=True)
class ExternalConfig:
    """Subprocess simulator: command line, working dir, timeout, lifecycle."""

    command: tuple[str, ...]
    workdir: str | None = None
    timeout: float = 60.0
    persistent: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "command", tuple(self.command))
        if not self.command:
            raise ConfigurationError("external simulator needs a command")
        if self.timeout <= 0:
            raise ConfigurationError("external timeout must be > 0")


@dataclass(frozen=True)
class SimulatorConfig:
    """One of the three simulator variants plus the sample size.

    ``source_ref`` feeds the covariate-bootstrap variants: builtin "X = X"
    generators resample their covariate rows from it.
    """

    kind: str  # builtin | frugal | external
    n: int
    builtin_id: str | None = None
    frugal: "FrugalConfig | None" = None
    external: ExternalConfig | None = None
    source_ref: Dataset | None = None

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigurationError(f"simulator sample size must be >= 2, got {self.n}")
        if self.kind == "builtin":
            if not self.builtin_id:
                raise ConfigurationError("builtin simulator needs an id")
        elif self.kind == "frugal":
            if self.frugal is None:
                raise ConfigurationError("frugal simulator needs a frugal config")
        elif self.kind == "external":
            if self.external is None:
                raise ConfigurationError("external simulator needs a worker config")
        else:
            raise ConfigurationError(f"unknown simulator kind {self.kind!r}")


def parameter_names(config: SimulatorConfig) -> tuple[str, ...]:
    """Declared parameter names of the configured variant."""
    if config.kind == "builtin":
        from .builtin import builtin_entry
        return builtin_entry(config.builtin_id).param_names
    if config.kind == "frugal":
        return config.frugal.param_names
    # the worker contract does not expose parameter names; the prior defines them
    return ()


def check_theta(theta: Theta, names: tuple[str, ...]) -> Theta:
    theta = {str(k): float(v) for k, v in theta.items()}
    if names and set(theta) != set(names):
        raise ConfigurationError(
            f"theta names {sorted(theta)} do not match declared parameters "
            f"{sorted(names)}")
    return theta


def simulate(config: SimulatorConfig, theta: Theta,
             stream: RandomStream) -> GeneratedDataset:
    """Generate one dataset of exactly config.n rows; deterministic per stream."""
    theta = check_theta(theta, parameter_names(config))
    if config.kind == "builtin":
        from .builtin import builtin_simulate
        dataset = builtin_simulate(config.builtin_id, theta, config.n, stream,
                                   source=config.source_ref)
    elif config.kind == "frugal":
        from .frugal import frugal_simulate
        return frugal_simulate(config.frugal, theta, stream, config.n)
    else:
        from .external import external_simulate
        dataset = external_simulate(config.external, theta, stream, config.n)
    return GeneratedDataset(dataset, theta)
