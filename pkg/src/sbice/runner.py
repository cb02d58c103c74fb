"""Run-directory orchestration: source generation, inference, dataset
emission, metric evaluation and reporting.

Layout inside the output directory:

    config.json          echo of the validated configuration
    manifest.json        resolved defaults, command log, file digests
    source.csv           the source dataset
    populations.csv      one row per particle per sealed generation
    state.json           inference progress (epsilons, budgets, resume point)
    datasets/{posterior,prior}/dataset_<i>.csv and thetas.csv
    metrics.json         classifier AUC and mean BSE per estimator
    plots_data/          bias_long.csv, posterior_samples.csv
    summary.md           human-readable report

Every artifact is byte-deterministic given the master seed; the manifest
additionally carries wall-clock timestamps.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig
from .dataset import ColumnSchema, Dataset, read_csv, write_csv
from .errors import ConfigurationError, SimulationError
from .estimators import estimate_ate
from .evaluation import classifier_auc, mean_bse
from .rng import RandomStream
from .simulators import (GeneratedDataset, SimulatorConfig, builtin_entry,
                         frugal_entry, frugal_simulate, simulate)
from .smc import Population, RunResult, emit_datasets, run_smcabc

_SOURCE_TAG, _EMIT_TAG = 0, 4
REGIMES = ("posterior", "prior")

# deliberate metric choices surfaced in the manifest: the two-sample
# classifier sees the full row, not covariates alone
_EVALUATE_CHOICES = {"classifier_features": "covariates+treatment+outcome"}


def _utc_now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _sha256(path: Path) -> str:
    digest = hashlib.sha256(path.read_bytes()).hexdigest()
    return f"sha256:{digest}"


def _write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json_dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class Runner:
    """Executes the pipeline commands against one run directory."""

    def __init__(self, config: RunConfig, threads: int = 1):
        self.config = config
        self.threads = max(1, threads)
        self.root = Path(config.output_dir)
        self.master = RandomStream(config.master_seed)

    # paths ---------------------------------------------------------------
    @property
    def source_path(self) -> Path:
        return self.root / "source.csv"

    @property
    def populations_path(self) -> Path:
        return self.root / "populations.csv"

    @property
    def state_path(self) -> Path:
        return self.root / "state.json"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    @property
    def metrics_path(self) -> Path:
        return self.root / "metrics.json"

    def dataset_dir(self, regime: str) -> Path:
        return self.root / "datasets" / regime

    # manifest ------------------------------------------------------------
    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            return json.loads(self.manifest_path.read_text(encoding="utf-8"))
        return {"engine_version": __version__, "config": self.config.raw,
                "resolved": {}, "commands": {}, "files": {}}

    def _save_manifest(self, manifest: dict) -> None:
        _write_text(self.manifest_path, _json_dumps(manifest))

    def _command(self, name: str):
        manifest = self._load_manifest()
        manifest["commands"][name] = {"status": "running",
                                      "started": _utc_now()}
        self._save_manifest(manifest)
        return manifest

    def _finish(self, manifest: dict, name: str, *paths: Path,
                extra: dict | None = None) -> None:
        for path in paths:
            manifest["files"][str(path.relative_to(self.root))] = _sha256(path)
        entry = manifest["commands"][name]
        entry["status"] = "complete"
        entry["finished"] = _utc_now()
        if extra:
            manifest["resolved"].update(extra)
        self._save_manifest(manifest)

    # source --------------------------------------------------------------
    def _source_schema(self) -> ColumnSchema:
        spec = self.config.source
        if spec.kind == "csv":
            return ColumnSchema(spec.treatment_column, spec.outcome_column,
                                spec.covariate_columns)
        if spec.kind == "builtin":
            names = builtin_entry(spec.builtin_id).covariate_names
        else:
            names = frugal_entry(spec.frugal_preset).config.observed_names
        return ColumnSchema("t", "y", names)

    def _build_source(self) -> Dataset:
        spec = self.config.source
        stream = self.master.substream(_SOURCE_TAG, 0)
        if spec.kind == "builtin":
            cfg = SimulatorConfig("builtin", spec.n, builtin_id=spec.builtin_id)
            return simulate(cfg, spec.theta, stream).dataset
        if spec.kind == "frugal":
            entry = frugal_entry(spec.frugal_preset)
            return frugal_simulate(entry.config, spec.theta, stream,
                                   spec.n).dataset
        return read_csv(spec.csv_path, self._source_schema())

    def load_source(self) -> Dataset:
        if not self.source_path.exists():
            raise SimulationError(
                f"{self.source_path} not found; run 'simulate' first")
        return read_csv(self.source_path, self._source_schema())

    def source_tau_star(self, source: Dataset) -> float:
        policy = self.config.evaluation.source_tau_star
        if isinstance(policy, (int, float)):
            return float(policy)
        if policy == "diff_means_of_rct":
            result = estimate_ate(source, "diff_means")
            return float(result.value)
        spec = self.config.source
        if spec.kind in ("builtin", "frugal") and "tau" in spec.theta:
            return float(spec.theta["tau"])
        raise ConfigurationError(
            "config.evaluation.source_tau_star: required for CSV sources "
            '(a number or "diff_means_of_rct")')

    # simulator -----------------------------------------------------------
    def simulator_config(self, source: Dataset, n: int | None = None
                         ) -> SimulatorConfig:
        spec = self.config.simulator
        n = n if n is not None else (spec.n or source.n)
        source_ref = source if spec.use_source_covariates else None
        if spec.kind == "builtin":
            return SimulatorConfig("builtin", n, builtin_id=spec.builtin_id,
                                   source_ref=source_ref)
        if spec.kind == "frugal":
            frugal = spec.frugal_inline or frugal_entry(
                spec.frugal_preset).config
            return SimulatorConfig("frugal", n, frugal=frugal)
        return SimulatorConfig("external", n, external=spec.external)

    # commands ------------------------------------------------------------
    def cmd_simulate(self) -> Dataset:
        """Write (or ingest and canonicalize) the source dataset."""
        self.root.mkdir(parents=True, exist_ok=True)
        _write_text(self.root / "config.json", _json_dumps(self.config.raw))
        manifest = self._command("simulate")
        source = self._build_source()
        write_csv(source, self.source_path)
        spec = self.config.source
        resolved = {"source_n": source.n,
                    "source_kind": spec.kind,
                    "source_theta": spec.theta,
                    "prior": {name: list(bounds) for name, bounds in
                              self.config.prior.bounds.items()}}
        self._finish(manifest, "simulate", self.source_path,
                     self.root / "config.json", extra=resolved)
        return source

    def cmd_infer(self, resume: bool = False) -> RunResult:
        """Run SMC-ABC against the source; sealed generations persist."""
        source = self.load_source()
        manifest = self._command("infer")
        simulator = self.simulator_config(source)
        initial: list[Population] = []
        initial_sims = 0
        if resume and self.state_path.exists():
            # the stored termination reason reflects the old config; the SMC
            # loop re-evaluates every stopping condition against this one
            initial, initial_sims, _ = self._load_state()

        def seal(population: Population, sims: int) -> None:
            sealed = initial_so_far + [population]
            initial_so_far.append(population)
            self._write_populations(sealed)
            self._write_state(sealed, sims, reason=None)

        initial_so_far = list(initial)
        result = run_smcabc(self.config.prior, simulator, source,
                            self.config.smc, threads=self.threads,
                            initial=initial,
                            initial_simulation_count=initial_sims,
                            on_generation=seal)
        if not result.populations:
            raise SimulationError("inference exhausted its budget before "
                                  "sealing a single generation")
        self._write_populations(list(result.populations))
        self._write_state(list(result.populations), result.simulation_count,
                          reason=result.termination_reason)
        self._finish(manifest, "infer", self.populations_path, self.state_path,
                     extra={"termination_reason": result.termination_reason,
                            "simulation_count": result.simulation_count,
                            "distance_standardized":
                                self.config.smc.distance.standardize})
        return result

    def cmd_generate(self, regime: str) -> list[GeneratedDataset]:
        """Emit datasets from posterior or prior parameter draws."""
        if regime not in REGIMES:
            raise ConfigurationError(f"unknown regime {regime!r}")
        source = self.load_source()
        manifest = self._command(f"generate_{regime}")
        n = self.config.emission.dataset_n or source.n
        simulator = self.simulator_config(source, n=n)
        stream = self.master.substream(_EMIT_TAG, REGIMES.index(regime))
        if regime == "posterior":
            populations, _, state = self._load_state()
            if not populations:
                raise SimulationError("posterior generation needs a completed "
                                      "'infer' run")
            theta_source = populations[-1]
        else:
            theta_source = self.config.prior
        generated = emit_datasets(theta_source, simulator,
                                  self.config.emission.n_datasets, stream)

        out_dir = self.dataset_dir(regime)
        out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for i, gen in enumerate(generated):
            path = out_dir / f"dataset_{i:03d}.csv"
            write_csv(gen.dataset, path)
            written.append(path)
        thetas_path = out_dir / "thetas.csv"
        names = self.config.prior.names
        lines = ["dataset_index," + ",".join(names) + ",tau_star"]
        for i, gen in enumerate(generated):
            cells = [str(i)] + [repr(gen.theta[n]) for n in names]
            cells.append(repr(gen.tau_star))
            lines.append(",".join(cells))
        _write_text(thetas_path, "\n".join(lines) + "\n")
        self._finish(manifest, f"generate_{regime}", thetas_path, *written)
        return generated

    def cmd_evaluate(self) -> dict:
        """Score both regimes against the source; write metrics and plot data."""
        source = self.load_source()
        manifest = self._command("evaluate")
        tau_star_source = self.source_tau_star(source)
        estimators = self.config.evaluation.estimators

        source_estimates = {
            est: estimate_ate(source, est, self.config.evaluation.learner)
            for est in estimators}

        metrics: dict = {"auc": {}, "bse": {},
                         "config": self.config.raw,
                         "source_tau_star": tau_star_source,
                         "source_estimates": {
                             est: r.value for est, r in
                             source_estimates.items()},
                         "source_bias": {
                             est: (r.value - tau_star_source if r.ok else None)
                             for est, r in source_estimates.items()},
                         "source_estimate_failures": {
                             est: r.failure for est, r in
                             source_estimates.items() if not r.ok}}
        bias_rows = []
        per_regime_values: dict[str, dict[str, list]] = {}
        per_regime_taus: dict[str, list[float]] = {}

        for regime in REGIMES:
            datasets, tau_stars = self._load_generated(regime)
            report = self._regime_auc(datasets, source)
            metrics["auc"][regime] = {"mean": report.mean, "sd": report.sd,
                                      "per_dataset": list(report.per_dataset)}
            values = self._regime_estimates(datasets, estimators)
            per_regime_values[regime] = values
            per_regime_taus[regime] = tau_stars
            for est in estimators:
                for i, value in enumerate(values[est]):
                    if value is not None:
                        bias_rows.append((regime, est, i,
                                          value - tau_stars[i]))

        for est in estimators:
            source_result = source_estimates[est]
            cells = {}
            n_failed = {}
            for regime in REGIMES:
                if not source_result.ok:
                    cells[regime] = None
                    n_failed[regime] = len(per_regime_values[regime][est])
                    continue
                cell = mean_bse(per_regime_values[regime][est],
                                per_regime_taus[regime],
                                source_result.value, tau_star_source)
                cells[regime] = cell.value
                n_failed[regime] = cell.n_failed
            metrics["bse"][est] = {"posterior": cells["posterior"],
                                   "prior": cells["prior"],
                                   "n_failed": sum(n_failed.values()),
                                   "n_failed_by_regime": n_failed}

        _write_text(self.metrics_path, _json_dumps(metrics))
        plots = self.root / "plots_data"
        plots.mkdir(exist_ok=True)
        bias_path = plots / "bias_long.csv"
        lines = ["regime,estimator,dataset_index,bias"]
        lines += [f"{r},{e},{i},{repr(b)}" for r, e, i, b in bias_rows]
        _write_text(bias_path, "\n".join(lines) + "\n")

        samples_path = plots / "posterior_samples.csv"
        populations, _, _ = self._load_state()
        if populations:
            final = populations[-1]
            lines = [",".join(final.param_names) + ",weight"]
            for i in range(final.size):
                cells = [repr(float(v)) for v in final.thetas[i]]
                cells.append(repr(float(final.weights[i])))
                lines.append(",".join(cells))
            _write_text(samples_path, "\n".join(lines) + "\n")
            self._finish(manifest, "evaluate", self.metrics_path, bias_path,
                         samples_path, extra=_EVALUATE_CHOICES)
        else:
            self._finish(manifest, "evaluate", self.metrics_path, bias_path,
                         extra=_EVALUATE_CHOICES)
        return metrics

    def cmd_report(self) -> str:
        """Render summary.md from metrics.json and the final population."""
        if not self.metrics_path.exists():
            raise SimulationError(
                f"{self.metrics_path} not found; run 'evaluate' first")
        manifest = self._command("report")
        metrics = json.loads(self.metrics_path.read_text(encoding="utf-8"))
        lines = ["# Run summary", ""]
        lines += [f"- engine version: {__version__}",
                  f"- source tau*: {metrics['source_tau_star']}", ""]

        lines += ["## Classifier AUC (generated vs source)", "",
                  "| regime | mean | sd |", "|---|---|---|"]
        for regime in REGIMES:
            auc = metrics["auc"][regime]
            lines.append(f"| {regime} | {auc['mean']:.3f} | {auc['sd']:.3f} |")
        lines.append("")

        lines += ["## Mean bias squared error", "",
                  "| estimator | posterior | prior | failed |",
                  "|---|---|---|---|"]
        for est, cell in metrics["bse"].items():
            post = "n/a" if cell["posterior"] is None else f"{cell['posterior']:.4g}"
            prior = "n/a" if cell["prior"] is None else f"{cell['prior']:.4g}"
            lines.append(f"| {est} | {post} | {prior} | {cell['n_failed']} |")
        lines.append("")

        populations, _, state = self._load_state()
        if populations:
            final = populations[-1]
            lines += ["## Posterior parameters", "",
                      f"- generations: {len(populations)}, final tolerance: "
                      f"{final.epsilon:.6g}, ESS: {final.ess:.1f}",
                      f"- termination: {state.get('termination_reason')}", "",
                      "| parameter | mean | sd | q05 | q95 |",
                      "|---|---|---|---|---|"]
            mean = final.weighted_mean()
            var = final.weighted_variance()
            for j, name in enumerate(final.param_names):
                q05, q95 = _weighted_quantiles(final.thetas[:, j],
                                               final.weights, (0.05, 0.95))
                lines.append(f"| {name} | {mean[name]:.4g} | "
                             f"{np.sqrt(var[name]):.4g} | {q05:.4g} | "
                             f"{q95:.4g} |")
            lines.append("")

        text = "\n".join(lines)
        _write_text(self.root / "summary.md", text)
        self._finish(manifest, "report", self.root / "summary.md")
        return text

    # persistence ---------------------------------------------------------
    def _write_populations(self, populations: list[Population]) -> None:
        names = self.config.prior.names
        lines = ["generation,particle_index,weight,distance,"
                 + ",".join(names)]
        for pop in populations:
            for i in range(pop.size):
                cells = [str(pop.generation), str(i),
                         repr(float(pop.weights[i])),
                         repr(float(pop.distances[i]))]
                cells += [repr(float(v)) for v in pop.thetas[i]]
                lines.append(",".join(cells))
        _write_text(self.populations_path, "\n".join(lines) + "\n")

    def _write_state(self, populations: list[Population], sims: int,
                     reason: str | None) -> None:
        state = {"epsilons": [p.epsilon for p in populations],
                 "sealed_generations": len(populations),
                 "simulation_count": sims,
                 "termination_reason": reason}
        _write_text(self.state_path, _json_dumps(state))

    def _load_state(self) -> tuple[list[Population], int, dict]:
        if not self.state_path.exists() or not self.populations_path.exists():
            return [], 0, {}
        state = json.loads(self.state_path.read_text(encoding="utf-8"))
        names = self.config.prior.names
        rows = self.populations_path.read_text(encoding="utf-8").splitlines()
        header = rows[0].split(",")
        expected = ["generation", "particle_index", "weight", "distance",
                    *names]
        if header != expected:
            raise ConfigurationError(
                f"{self.populations_path}: header {header} does not match the "
                f"configured parameters {expected}")
        by_gen: dict[int, list[list[float]]] = {}
        for row in rows[1:]:
            cells = row.split(",")
            by_gen.setdefault(int(cells[0]), []).append(
                [float(c) for c in cells[1:]])
        populations = []
        for gen in sorted(by_gen):
            block = np.array(by_gen[gen])
            populations.append(Population(
                gen, float(state["epsilons"][gen]), names,
                block[:, 3:].copy(), block[:, 1].copy(), block[:, 2].copy()))
        return populations, int(state["simulation_count"]), state

    def _load_generated(self, regime: str
                        ) -> tuple[list[Dataset], list[float]]:
        out_dir = self.dataset_dir(regime)
        thetas_path = out_dir / "thetas.csv"
        if not thetas_path.exists():
            raise SimulationError(
                f"{thetas_path} not found; run 'generate' for {regime} first")
        schema = self._source_schema()
        rows = thetas_path.read_text(encoding="utf-8").splitlines()[1:]
        tau_stars = [float(row.split(",")[-1]) for row in rows]
        datasets = []
        for i in range(len(rows)):
            datasets.append(read_csv(out_dir / f"dataset_{i:03d}.csv", schema))
        return datasets, tau_stars

    # metric helpers -------------------------------------------------------
    def _regime_auc(self, datasets: list[Dataset], source: Dataset):
        cfg = self.config.evaluation.classifier
        if self.threads <= 1 or len(datasets) < 2:
            return classifier_auc(datasets, source, cfg)
        from .evaluation import AucReport, cross_validated_auc
        def one(index: int) -> float:
            ds = datasets[index]
            features = np.vstack([ds.matrix(), source.matrix()])
            labels = np.concatenate([np.ones(ds.n), np.zeros(source.n)])
            return cross_validated_auc(features, labels, cfg,
                                       seed=cfg.seed * 100003 + index)
        with ThreadPoolExecutor(max_workers=self.threads) as pool:
            return AucReport(tuple(pool.map(one, range(len(datasets)))))

    def _regime_estimates(self, datasets: list[Dataset],
                          estimators: tuple[str, ...]
                          ) -> dict[str, list[float | None]]:
        learner = self.config.evaluation.learner
        def one(index: int) -> list[float | None]:
            return [estimate_ate(datasets[index], est, learner).value
                    for est in estimators]
        if self.threads <= 1:
            rows = [one(i) for i in range(len(datasets))]
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                rows = list(pool.map(one, range(len(datasets))))
        return {est: [rows[i][j] for i in range(len(datasets))]
                for j, est in enumerate(estimators)}


def _weighted_quantiles(values: np.ndarray, weights: np.ndarray,
                        qs: tuple[float, ...]) -> list[float]:
    order = np.argsort(values)
    cum = np.cumsum(weights[order])
    cum /= cum[-1]
    return [float(values[order][np.searchsorted(cum, q)]) for q in qs]
