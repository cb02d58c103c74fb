"""Run configuration: a single JSON document validated with field paths.

See docs/config.md for the full schema. Unknown keys are rejected so typos
surface as configuration errors instead of silently ignored settings.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .distance import DistanceConfig
from .errors import ConfigurationError
from .estimators import ESTIMATOR_IDS, LearnerConfig
from .evaluation import ClassifierConfig
from .learners import GbtConfig
from .priors import LinearConstraint, PriorSpec
from .simulators import (ExternalConfig, FrugalConfig, builtin_entry,
                         frugal_entry)
from .smc import SmcConfig


def _require(obj: dict, path: str, key: str):
    if key not in obj:
        raise ConfigurationError(f"{path}.{key}: required field is missing")
    return obj[key]


def _check_keys(obj: dict, path: str, allowed: set[str]) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigurationError(f"{path}: unknown keys {sorted(unknown)}")


def _typed(value, path: str, kind, kind_name: str):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
        raise ConfigurationError(f"{path}: expected {kind_name}, "
                                 f"got {type(value).__name__}")
    return value


@dataclass(frozen=True)
class SourceSpec:
    kind: str                      # builtin | frugal | csv
    builtin_id: str | None = None
    frugal_preset: str | None = None
    theta: dict[str, float] | None = None
    n: int | None = None
    csv_path: str | None = None
    treatment_column: str = "t"
    outcome_column: str = "y"
    covariate_columns: tuple[str, ...] = ()


@dataclass(frozen=True)
class SimulatorSpec:
    kind: str                      # builtin | frugal | external
    n: int | None                  # None: match the source size
    builtin_id: str | None = None
    frugal_preset: str | None = None
    frugal_inline: FrugalConfig | None = None
    external: ExternalConfig | None = None
    use_source_covariates: bool = True


@dataclass(frozen=True)
class EmissionSpec:
    n_datasets: int = 50
    dataset_n: int | None = None   # None: match the source size


@dataclass(frozen=True)
class EvaluationSpec:
    estimators: tuple[str, ...]
    classifier: ClassifierConfig
    learner: LearnerConfig
    source_tau_star: float | str | None  # number | "diff_means_of_rct" | None


@dataclass(frozen=True)
class RunConfig:
    master_seed: int
    output_dir: Path
    source: SourceSpec
    simulator: SimulatorSpec
    prior: PriorSpec
    smc: SmcConfig
    emission: EmissionSpec
    evaluation: EvaluationSpec
    raw: dict = field(repr=False, default_factory=dict)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON: {exc}") from exc
    return parse_config(raw, base_dir=path.parent)


def parse_config(raw: dict, base_dir: Path | None = None) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    _check_keys(raw, "config", {"master_seed", "output_dir", "source",
                                "simulator", "prior", "smc", "emission",
                                "evaluation"})
    master_seed = _typed(_require(raw, "config", "master_seed"),
                         "config.master_seed", int, "integer")
    output_dir = Path(_typed(_require(raw, "config", "output_dir"),
                             "config.output_dir", str, "string"))
    if base_dir is not None and not output_dir.is_absolute():
        output_dir = base_dir / output_dir

    source = _parse_source(_require(raw, "config", "source"), base_dir)
    simulator = _parse_simulator(_require(raw, "config", "simulator"))
    prior = _parse_prior(raw.get("prior"), simulator)
    declared = _declared_parameters(simulator)
    if declared and set(prior.names) != set(declared):
        raise ConfigurationError(
            f"config.prior: parameters {sorted(prior.names)} do not match "
            f"the simulator's {sorted(declared)}")
    smc = _parse_smc(raw.get("smc", {}), master_seed)
    emission = _parse_emission(raw.get("emission", {}))
    evaluation = _parse_evaluation(raw.get("evaluation", {}), master_seed)
    return RunConfig(master_seed, output_dir, source, simulator, prior, smc,
                     emission, evaluation, raw=raw)


def _parse_theta(obj, path: str) -> dict[str, float]:
    obj = _typed(obj, path, dict, "object")
    return {str(k): _typed(v, f"{path}.{k}", float, "number")
            for k, v in obj.items()}


def _parse_source(obj, base_dir: Path | None) -> SourceSpec:
    obj = _typed(obj, "config.source", dict, "object")
    variants = {"builtin", "frugal", "csv"} & set(obj)
    if len(variants) != 1:
        raise ConfigurationError(
            "config.source: exactly one of builtin/frugal/csv is required")
    kind = variants.pop()
    _check_keys(obj, "config.source", {kind})
    body = _typed(obj[kind], f"config.source.{kind}", dict, "object")
    if kind == "builtin":
        _check_keys(body, "config.source.builtin", {"id", "theta", "n"})
        id_ = _typed(_require(body, "config.source.builtin", "id"),
                     "config.source.builtin.id", str, "string")
        entry = builtin_entry(id_)
        theta = (_parse_theta(body["theta"], "config.source.builtin.theta")
                 if "theta" in body else dict(entry.reference_theta))
        n = _typed(_require(body, "config.source.builtin", "n"),
                   "config.source.builtin.n", int, "integer")
        return SourceSpec("builtin", builtin_id=id_, theta=theta, n=n)
    if kind == "frugal":
        _check_keys(body, "config.source.frugal", {"preset", "theta", "n"})
        preset = _typed(_require(body, "config.source.frugal", "preset"),
                        "config.source.frugal.preset", str, "string")
        entry = frugal_entry(preset)
        theta = (_parse_theta(body["theta"], "config.source.frugal.theta")
                 if "theta" in body else dict(entry.reference_theta))
        n = _typed(_require(body, "config.source.frugal", "n"),
                   "config.source.frugal.n", int, "integer")
        return SourceSpec("frugal", frugal_preset=preset, theta=theta, n=n)
    _check_keys(body, "config.source.csv",
                {"path", "treatment_column", "outcome_column",
                 "covariate_columns"})
    csv_path = _typed(_require(body, "config.source.csv", "path"),
                      "config.source.csv.path", str, "string")
    if base_dir is not None and not Path(csv_path).is_absolute():
        csv_path = str(base_dir / csv_path)
    cols = _typed(_require(body, "config.source.csv", "covariate_columns"),
                  "config.source.csv.covariate_columns", list, "array")
    return SourceSpec(
        "csv", csv_path=csv_path,
        treatment_column=body.get("treatment_column", "t"),
        outcome_column=body.get("outcome_column", "y"),
        covariate_columns=tuple(str(c) for c in cols))


def _parse_simulator(obj) -> SimulatorSpec:
    obj = _typed(obj, "config.simulator", dict, "object")
    _check_keys(obj, "config.simulator",
                {"kind", "n", "builtin_id", "frugal_preset", "frugal",
                 "external", "use_source_covariates"})
    kind = _typed(_require(obj, "config.simulator", "kind"),
                  "config.simulator.kind", str, "string")
    if kind not in ("builtin", "frugal", "external"):
        raise ConfigurationError(
            f"config.simulator.kind: unknown kind {kind!r}")
    n = obj.get("n")
    if n is not None:
        n = _typed(n, "config.simulator.n", int, "integer")
    use_source = _typed(obj.get("use_source_covariates", True),
                        "config.simulator.use_source_covariates", bool,
                        "boolean")
    if kind == "builtin":
        id_ = _typed(_require(obj, "config.simulator", "builtin_id"),
                     "config.simulator.builtin_id", str, "string")
        builtin_entry(id_)
        return SimulatorSpec("builtin", n, builtin_id=id_,
                             use_source_covariates=use_source)
    if kind == "frugal":
        if "frugal_preset" in obj:
            preset = _typed(obj["frugal_preset"],
                            "config.simulator.frugal_preset", str, "string")
            frugal_entry(preset)
            return SimulatorSpec("frugal", n, frugal_preset=preset,
                                 use_source_covariates=use_source)
        raise ConfigurationError("config.simulator: frugal simulator needs "
                                 "frugal_preset")
    body = _typed(_require(obj, "config.simulator", "external"),
                  "config.simulator.external", dict, "object")
    _check_keys(body, "config.simulator.external",
                {"command", "workdir", "timeout", "persistent"})
    command = _typed(_require(body, "config.simulator.external", "command"),
                     "config.simulator.external.command", list, "array")
    external = ExternalConfig(
        command=tuple(str(c) for c in command),
        workdir=body.get("workdir"),
        timeout=_typed(body.get("timeout", 60.0),
                       "config.simulator.external.timeout", float, "number"),
        persistent=_typed(body.get("persistent", True),
                          "config.simulator.external.persistent", bool,
                          "boolean"))
    return SimulatorSpec("external", n, external=external,
                         use_source_covariates=use_source)


def _declared_parameters(simulator: SimulatorSpec) -> tuple[str, ...]:
    if simulator.kind == "builtin":
        return builtin_entry(simulator.builtin_id).param_names
    if simulator.kind == "frugal" and simulator.frugal_preset:
        return frugal_entry(simulator.frugal_preset).param_names
    return ()


def _parse_prior(obj, simulator: SimulatorSpec) -> PriorSpec:
    if obj is None:
        if simulator.kind == "builtin":
            prior = builtin_entry(simulator.builtin_id).prior
            if prior is None:
                raise ConfigurationError(
                    f"config.prior: builtin {simulator.builtin_id!r} has no "
                    "default prior; specify one")
            return prior
        if simulator.kind == "frugal" and simulator.frugal_preset:
            return frugal_entry(simulator.frugal_preset).prior
        raise ConfigurationError("config.prior: required for external "
                                 "simulators")
    obj = _typed(obj, "config.prior", dict, "object")
    _check_keys(obj, "config.prior", {"parameters", "constraint"})
    params = _typed(_require(obj, "config.prior", "parameters"),
                    "config.prior.parameters", dict, "object")
    bounds = {}
    for name, pair in params.items():
        pair = _typed(pair, f"config.prior.parameters.{name}", list, "array")
        if len(pair) != 2:
            raise ConfigurationError(
                f"config.prior.parameters.{name}: expected [lo, hi]")
        bounds[str(name)] = (_typed(pair[0], f"config.prior.parameters.{name}[0]",
                                    float, "number"),
                             _typed(pair[1], f"config.prior.parameters.{name}[1]",
                                    float, "number"))
    constraint = None
    if obj.get("constraint") is not None:
        body = _typed(obj["constraint"], "config.prior.constraint", dict,
                      "object")
        _check_keys(body, "config.prior.constraint",
                    {"coefficients", "constant"})
        coeffs = _parse_theta(_require(body, "config.prior.constraint",
                                       "coefficients"),
                              "config.prior.constraint.coefficients")
        constant = _typed(_require(body, "config.prior.constraint", "constant"),
                          "config.prior.constraint.constant", float, "number")
        constraint = LinearConstraint(coeffs, constant)
    return PriorSpec(bounds, constraint)


def _parse_smc(obj, master_seed: int) -> SmcConfig:
    obj = _typed(obj, "config.smc", dict, "object")
    _check_keys(obj, "config.smc",
                {"population_size", "max_generations", "min_epsilon",
                 "epsilon_quantile", "kernel_scale",
                 "max_simulations_per_generation", "distance"})
    dist = _typed(obj.get("distance", {}), "config.smc.distance", dict,
                  "object")
    _check_keys(dist, "config.smc.distance",
                {"n_projections", "order", "standardize"})
    distance = DistanceConfig(
        n_projections=_typed(dist.get("n_projections", 100),
                             "config.smc.distance.n_projections", int,
                             "integer"),
        order=_typed(dist.get("order", 2), "config.smc.distance.order", int,
                     "integer"),
        standardize=_typed(dist.get("standardize", True),
                           "config.smc.distance.standardize", bool, "boolean"))
    budget = obj.get("max_simulations_per_generation")
    if budget is not None:
        budget = _typed(budget, "config.smc.max_simulations_per_generation",
                        int, "integer")
    return SmcConfig(
        population_size=_typed(obj.get("population_size", 128),
                               "config.smc.population_size", int, "integer"),
        max_generations=_typed(obj.get("max_generations", 12),
                               "config.smc.max_generations", int, "integer"),
        min_epsilon=_typed(obj.get("min_epsilon", 0.005),
                           "config.smc.min_epsilon", float, "number"),
        epsilon_quantile=_typed(obj.get("epsilon_quantile", 0.5),
                                "config.smc.epsilon_quantile", float,
                                "number"),
        kernel_scale=_typed(obj.get("kernel_scale", 2.0),
                            "config.smc.kernel_scale", float, "number"),
        distance=distance,
        max_simulations_per_generation=budget,
        master_seed=master_seed)


def _parse_emission(obj) -> EmissionSpec:
    obj = _typed(obj, "config.emission", dict, "object")
    _check_keys(obj, "config.emission", {"n_datasets", "dataset_n"})
    n_datasets = _typed(obj.get("n_datasets", 50), "config.emission.n_datasets",
                        int, "integer")
    if n_datasets < 1:
        raise ConfigurationError("config.emission.n_datasets: must be >= 1")
    dataset_n = obj.get("dataset_n")
    if dataset_n is not None:
        dataset_n = _typed(dataset_n, "config.emission.dataset_n", int,
                           "integer")
    return EmissionSpec(n_datasets, dataset_n)


def _parse_evaluation(obj, master_seed: int) -> EvaluationSpec:
    obj = _typed(obj, "config.evaluation", dict, "object")
    _check_keys(obj, "config.evaluation",
                {"estimators", "classifier", "learner", "source_tau_star"})
    estimators = obj.get("estimators", list(ESTIMATOR_IDS))
    estimators = tuple(_typed(e, "config.evaluation.estimators[]", str,
                              "string") for e in estimators)
    for e in estimators:
        if e not in ESTIMATOR_IDS:
            raise ConfigurationError(
                f"config.evaluation.estimators: unknown estimator {e!r}")

    cls = _typed(obj.get("classifier", {}), "config.evaluation.classifier",
                 dict, "object")
    _check_keys(cls, "config.evaluation.classifier",
                {"n_trees", "max_depth", "folds"})
    classifier = ClassifierConfig(
        n_trees=_typed(cls.get("n_trees", 200),
                       "config.evaluation.classifier.n_trees", int, "integer"),
        max_depth=_typed(cls.get("max_depth", 8),
                         "config.evaluation.classifier.max_depth", int,
                         "integer"),
        folds=_typed(cls.get("folds", 5), "config.evaluation.classifier.folds",
                     int, "integer"),
        seed=master_seed)

    lrn = _typed(obj.get("learner", {}), "config.evaluation.learner", dict,
                 "object")
    _check_keys(lrn, "config.evaluation.learner",
                {"gbt", "cross_fit_folds", "propensity_clip"})
    gbt_obj = _typed(lrn.get("gbt", {}), "config.evaluation.learner.gbt",
                     dict, "object")
    _check_keys(gbt_obj, "config.evaluation.learner.gbt",
                {"n_trees", "max_depth", "learning_rate", "min_leaf"})
    gbt = GbtConfig(
        n_trees=_typed(gbt_obj.get("n_trees", 100),
                       "config.evaluation.learner.gbt.n_trees", int, "integer"),
        max_depth=_typed(gbt_obj.get("max_depth", 3),
                         "config.evaluation.learner.gbt.max_depth", int,
                         "integer"),
        learning_rate=_typed(gbt_obj.get("learning_rate", 0.1),
                             "config.evaluation.learner.gbt.learning_rate",
                             float, "number"),
        min_leaf=_typed(gbt_obj.get("min_leaf", 5),
                        "config.evaluation.learner.gbt.min_leaf", int,
                        "integer"))
    clip = lrn.get("propensity_clip", [0.01, 0.99])
    if clip is not None:
        clip = _typed(clip, "config.evaluation.learner.propensity_clip", list,
                      "array")
        if len(clip) != 2:
            raise ConfigurationError(
                "config.evaluation.learner.propensity_clip: expected [lo, hi]")
        clip = (float(clip[0]), float(clip[1]))
    learner = LearnerConfig(
        gbt=gbt,
        cross_fit_folds=_typed(lrn.get("cross_fit_folds", 2),
                               "config.evaluation.learner.cross_fit_folds",
                               int, "integer"),
        propensity_clip=clip,
        seed=master_seed)

    tau_star = obj.get("source_tau_star")
    if tau_star is not None and not isinstance(tau_star, (int, float)):
        if tau_star != "diff_means_of_rct":
            raise ConfigurationError(
                'config.evaluation.source_tau_star: expected a number, '
                '"diff_means_of_rct", or null')
    return EvaluationSpec(estimators, classifier, learner, tau_star)
