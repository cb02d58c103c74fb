import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from sbice.cli import main
from sbice.config import parse_config
from sbice.errors import SimulationError
from sbice.runner import Runner

TINY = {
    "master_seed": 17,
    "source": {"builtin": {"id": "dgp1",
                           "theta": {"rho": 1.0, "beta": -1.5, "tau": 1.5},
                           "n": 300}},
    "simulator": {"kind": "builtin", "builtin_id": "sim1"},
    "smc": {"population_size": 32, "max_generations": 2,
            "distance": {"n_projections": 20}},
    "emission": {"n_datasets": 4},
    "evaluation": {"classifier": {"n_trees": 40, "max_depth": 5, "folds": 2}},
}


def tiny_config(out_dir: Path, **overrides) -> dict:
    raw = json.loads(json.dumps(TINY))
    raw["output_dir"] = str(out_dir)
    raw.update(overrides)
    return raw


def make_runner(out_dir: Path, **overrides) -> Runner:
    return Runner(parse_config(tiny_config(out_dir, **overrides)))


@pytest.fixture(scope="module")
def completed_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run") / "r"
    runner = make_runner(out)
    runner.cmd_simulate()
    runner.cmd_infer()
    runner.cmd_generate("posterior")
    runner.cmd_generate("prior")
    runner.cmd_evaluate()
    runner.cmd_report()
    return runner


class TestSimulate:
    def test_source_written_with_expected_shape(self, completed_run):
        text = (completed_run.root / "source.csv").read_text()
        lines = text.strip().splitlines()
        assert lines[0] == "x,t,y"
        assert len(lines) == 301

    def test_same_seed_is_byte_identical(self, tmp_path, completed_run):
        runner = make_runner(tmp_path / "again")
        runner.cmd_simulate()
        assert (runner.root / "source.csv").read_bytes() == \
            (completed_run.root / "source.csv").read_bytes()

    def test_bad_config_exits_2(self, tmp_path, capsys):
        cfg = tiny_config(tmp_path / "x")
        cfg["source"] = {"csv": {"path": "nope.csv",
                                 "covariate_columns": []}}
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(cfg))
        assert main(["simulate", "--config", str(path)]) == 2
        assert "config" in capsys.readouterr().err


class TestInfer:
    def test_epsilons_strictly_decrease(self, completed_run):
        rows = (completed_run.root / "populations.csv").read_text().splitlines()
        state = json.loads((completed_run.root / "state.json").read_text())
        eps = state["epsilons"]
        assert all(b < a for a, b in zip(eps, eps[1:]))
        assert rows[0] == "generation,particle_index,weight,distance,rho,beta,tau"

    def test_termination_reason_recorded(self, completed_run):
        manifest = json.loads(
            (completed_run.root / "manifest.json").read_text())
        assert manifest["resolved"]["termination_reason"] == "max_generations"

    def test_min_epsilon_reason(self, tmp_path):
        runner = make_runner(tmp_path / "mineps",
                             smc={"population_size": 32, "max_generations": 8,
                                  "min_epsilon": 10.0,
                                  "distance": {"n_projections": 20}})
        runner.cmd_simulate()
        result = runner.cmd_infer()
        assert result.termination_reason == "min_epsilon_reached"

    def test_resume_matches_uninterrupted(self, tmp_path, completed_run):
        out = tmp_path / "resume"
        partial = make_runner(out, smc={"population_size": 32,
                                        "max_generations": 1,
                                        "distance": {"n_projections": 20}})
        partial.cmd_simulate()
        partial.cmd_infer()
        resumed = make_runner(out)
        result = resumed.cmd_infer(resume=True)
        assert len(result.populations) == 2
        assert (out / "populations.csv").read_bytes() == \
            (completed_run.root / "populations.csv").read_bytes()

    def test_infer_without_source_fails(self, tmp_path):
        runner = make_runner(tmp_path / "nosrc")
        with pytest.raises(SimulationError, match="simulate"):
            runner.cmd_infer()


class TestGenerate:
    def test_datasets_match_thetas_rows(self, completed_run):
        post = completed_run.dataset_dir("posterior")
        thetas = (post / "thetas.csv").read_text().strip().splitlines()
        assert len(thetas) == 5  # header + 4
        assert thetas[0] == "dataset_index,rho,beta,tau,tau_star"
        assert len(list(post.glob("dataset_*.csv"))) == 4

    def test_tau_star_column_equals_tau(self, completed_run):
        rows = (completed_run.dataset_dir("posterior") / "thetas.csv""").read_text()
        for line in rows.strip().splitlines()[1:]:
            cells = line.split(",")
            assert cells[3] == cells[4]

    def test_prior_generation_needs_no_inference(self, tmp_path):
        runner = make_runner(tmp_path / "prioronly")
        runner.cmd_simulate()
        generated = runner.cmd_generate("prior")
        assert len(generated) == 4

    def test_posterior_generation_requires_inference(self, tmp_path):
        runner = make_runner(tmp_path / "nopost")
        runner.cmd_simulate()
        with pytest.raises(SimulationError, match="infer"):
            runner.cmd_generate("posterior")


class TestEvaluate:
    def test_metrics_structure(self, completed_run):
        metrics = json.loads(
            (completed_run.root / "metrics.json").read_text())
        for regime in ("posterior", "prior"):
            auc = metrics["auc"][regime]
            assert 0.0 <= auc["mean"] <= 1.0
            assert len(auc["per_dataset"]) == 4
        assert set(metrics["bse"]) == {
            "diff_means", "x_learner_linear", "x_learner_gbt", "dml_linear",
            "dml_gbt", "aipw_linear", "tmle"}
        assert "NaN" not in (completed_run.root / "metrics.json").read_text()

    def test_estimator_failures_counted_not_nan(self, tmp_path, completed_run):
        clone = tmp_path / "failing"
        shutil.copytree(completed_run.root, clone)
        # replace one generated dataset with a two-treated-unit table that
        # model-based estimators must refuse
        target = clone / "datasets" / "posterior" / "dataset_000.csv"
        lines = ["x,t,y"]
        gen = np.random.default_rng(5)
        for i in range(40):
            t = 1 if i < 2 else 0
            lines.append(f"{gen.standard_normal()!r},{t},{gen.standard_normal()!r}")
        target.write_text("\n".join(lines) + "\n")
        runner = make_runner(clone)
        metrics = runner.cmd_evaluate()
        assert metrics["bse"]["x_learner_linear"]["n_failed"] > 0
        assert metrics["bse"]["x_learner_linear"]["posterior"] is not None
        text = (clone / "metrics.json").read_text()
        assert "NaN" not in text and "Infinity" not in text

    def test_rerun_is_digest_identical(self, completed_run):
        before = (completed_run.root / "metrics.json").read_bytes()
        completed_run.cmd_evaluate()
        assert (completed_run.root / "metrics.json").read_bytes() == before

    def test_manifest_records_metric_choices(self, completed_run):
        manifest = json.loads(
            (completed_run.root / "manifest.json").read_text())
        assert manifest["resolved"]["distance_standardized"] is True
        assert manifest["resolved"]["classifier_features"] == \
            "covariates+treatment+outcome"
        assert "metrics.json" in manifest["files"]

    def test_plot_data_written(self, completed_run):
        bias = (completed_run.root / "plots_data" / "bias_long.csv").read_text()
        assert bias.splitlines()[0] == "regime,estimator,dataset_index,bias"
        samples = (completed_run.root / "plots_data" /
                   "posterior_samples.csv").read_text()
        assert samples.splitlines()[0] == "rho,beta,tau,weight"
        assert "np.float64" not in samples
        assert "np.float64" not in bias


class TestReport:
    def test_summary_contains_bse_table_and_posterior_block(self,
                                                            completed_run):
        text = (completed_run.root / "summary.md").read_text()
        assert "| estimator | posterior | prior | failed |" in text
        assert "| parameter | mean | sd | q05 | q95 |" in text
        assert "x_learner_gbt" in text

    def test_missing_metrics_is_actionable(self, tmp_path):
        runner = make_runner(tmp_path / "noreport")
        runner.root.mkdir(parents=True)
        with pytest.raises(SimulationError, match="evaluate"):
            runner.cmd_report()


class TestDeterminism:
    def test_pipeline_is_byte_deterministic(self, tmp_path, completed_run):
        twin = make_runner(tmp_path / "twin")
        twin.cmd_simulate()
        twin.cmd_infer()
        twin.cmd_generate("posterior")
        twin.cmd_generate("prior")
        twin.cmd_evaluate()
        for rel in ("source.csv", "populations.csv", "state.json",
                    "plots_data/bias_long.csv",
                    "datasets/posterior/thetas.csv",
                    "datasets/posterior/dataset_000.csv",
                    "datasets/prior/thetas.csv"):
            assert (twin.root / rel).read_bytes() == \
                (completed_run.root / rel).read_bytes(), rel
        # metrics embed the config echo whose output_dir legitimately
        # differs between directories; everything else must match
        a = json.loads((twin.root / "metrics.json").read_text())
        b = json.loads((completed_run.root / "metrics.json").read_text())
        a["config"].pop("output_dir")
        b["config"].pop("output_dir")
        assert a == b


def test_cli_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for cmd in ("simulate", "infer", "generate", "evaluate", "report"):
        assert cmd in out


def test_cli_full_pipeline_exit_zero(tmp_path):
    cfg = tiny_config(tmp_path / "cli_run")
    cfg["emission"] = {"n_datasets": 3}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path)]) == 0
    assert main(["infer", "--config", str(path)]) == 0
    assert main(["generate", "--config", str(path), "--regime", "both"]) == 0
    assert main(["evaluate", "--config", str(path)]) == 0
    assert main(["report", "--config", str(path)]) == 0
    assert (tmp_path / "cli_run" / "summary.md").exists()


def test_cli_report_without_metrics_exits_3(tmp_path, capsys):
    cfg = tiny_config(tmp_path / "bare")
    (tmp_path / "bare").mkdir()
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    assert main(["report", "--config", str(path)]) == 3


def test_cli_worker_protocol_failure_exits_4(tmp_path):
    cfg = tiny_config(tmp_path / "badworker")
    cfg["simulator"] = {"kind": "external",
                        "external": {"command": ["/bin/false"],
                                     "timeout": 5}}
    cfg["prior"] = {"parameters": {"rho": [0.0, 2.0], "beta": [-2.0, 1.0],
                                   "tau": [0.0, 2.0]}}
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    assert main(["simulate", "--config", str(path)]) == 0
    assert main(["infer", "--config", str(path)]) == 4


def test_env_threads_override(tmp_path, monkeypatch, capsys):
    cfg = tiny_config(tmp_path / "envt")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    monkeypatch.setenv("SBICE_THREADS", "not-a-number")
    assert main(["simulate", "--config", str(path)]) == 2
    assert "SBICE_THREADS" in capsys.readouterr().err
    monkeypatch.setenv("SBICE_THREADS", "2")
    assert main(["simulate", "--config", str(path)]) == 0
