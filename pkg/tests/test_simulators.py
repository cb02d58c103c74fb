import numpy as np
import pytest

from sbice.errors import ConfigurationError
from sbice.rng import RandomStream
from sbice.simulators import (GeneratedDataset, SimulatorConfig,
                              builtin_catalog, builtin_entry, builtin_mc_ate,
                              builtin_simulate, builtin_simulate_full,
                              simulate)

STREAM = RandomStream(31)

REF_SIM1 = {"rho": 1.0, "beta": -1.5, "tau": 1.5}


def ols(design_cols, y):
    a = np.column_stack([np.ones(len(y)), *design_cols])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef


def test_every_catalog_id_simulates_at_n100():
    for entry in builtin_catalog():
        ds = builtin_simulate(entry.id, entry.reference_theta, 100,
                              STREAM.substream(abs(hash(entry.id)) % 997))
        assert ds.n == 100
        assert set(np.unique(ds.treatment)) <= {0.0, 1.0}


def test_catalog_contains_sim6_with_stated_prior_and_reference():
    entry = builtin_entry("sim6")
    assert entry.reference_theta == {"rho": 2.0, "beta": 0.5, "tau": 2.0}
    assert entry.prior.bounds == {"rho": (0.0, 10.0), "beta": (0.0, 10.0),
                                  "tau": (0.0, 10.0)}


def test_matched_fixtures_have_no_free_parameters():
    for id_ in ("c3", "c4"):
        assert builtin_entry(id_).prior is None
        assert builtin_entry(id_).reference_theta == {"tau": 1.0}


def test_sim1_full_information_regression_recovers_coefficients():
    ds, extras = builtin_simulate_full("sim1", REF_SIM1, 2000, STREAM.substream(1))
    coef = ols([extras["z"], ds.covariates[:, 0], ds.treatment], ds.outcome)
    assert coef[1] == pytest.approx(1.0, abs=0.1)
    assert coef[2] == pytest.approx(-1.5, abs=0.1)
    assert coef[3] == pytest.approx(1.5, abs=0.1)


def test_sim1_short_regression_is_confounded():
    ds, _ = builtin_simulate_full("sim1", REF_SIM1, 2000, STREAM.substream(2))
    coef = ols([ds.covariates[:, 0], ds.treatment], ds.outcome)
    # omitting Z biases the treatment coefficient upward (rho > 0)
    assert coef[2] - 1.5 > 0.2


@pytest.mark.parametrize("id_", ["sim1", "sim2", "sim3", "sim8", "dgp1",
                                 "dgp8", "dgp10"])
def test_full_information_recovery_across_linear_ids(id_):
    entry = builtin_entry(id_)
    theta = entry.reference_theta
    ds, extras = builtin_simulate_full(id_, theta, 10 ** 4,
                                       STREAM.substream(abs(hash(id_)) % 997))
    coef = ols([extras["z"], ds.covariates[:, 0], ds.treatment], ds.outcome)
    resid_sd = np.std(ds.outcome)
    se = 3.0 * resid_sd / np.sqrt(10 ** 4)
    assert coef[1] == pytest.approx(theta["rho"], abs=max(se, 0.05))
    assert coef[2] == pytest.approx(theta["beta"], abs=max(se, 0.05))
    assert coef[3] == pytest.approx(theta["tau"], abs=max(se, 0.05))


def test_dgp11_full_information_recovery():
    ds, _ = builtin_simulate_full("dgp11", {"tau": 3.0}, 10 ** 4,
                                  STREAM.substream(20))
    coef = ols([ds.covariates[:, 0], ds.covariates[:, 1],
                ds.covariates[:, 2], ds.treatment], ds.outcome)
    for got, want in zip(coef, (0.0, 1.0, 1.0, 1.0, 3.0)):
        assert got == pytest.approx(want, abs=0.05)


def test_sim4_recovery_includes_interaction_regressor():
    ds, extras = builtin_simulate_full("sim4", REF_SIM1, 10 ** 4,
                                       STREAM.substream(3))
    x = ds.covariates[:, 0]
    coef = ols([extras["z"], x, ds.treatment, x * extras["z"]], ds.outcome)
    assert coef[1] == pytest.approx(1.0, abs=0.05)
    assert coef[3] == pytest.approx(1.5, abs=0.05)
    assert coef[4] == pytest.approx(1.0, abs=0.05)


def test_sim6_treatment_equals_hidden_confounder():
    ds, extras = builtin_simulate_full("sim6",
                                       {"rho": 2.0, "beta": 0.5, "tau": 2.0},
                                       5000, STREAM.substream(4))
    assert np.array_equal(ds.treatment, extras["z"])


def test_sim8_treatment_depends_on_observed_covariate():
    ds, extras = builtin_simulate_full("sim8",
                                       {"rho": 1.0, "beta": 0.3, "tau": 2.0},
                                       5000, STREAM.substream(5))
    z = extras["z"]
    # among z = 1 rows the covariate decides the threshold crossing
    x1 = ds.covariates[z == 1, 0]
    t1 = ds.treatment[z == 1]
    assert 0.05 < t1.mean() < 0.95
    assert x1[t1 == 1].mean() > x1[t1 == 0].mean()


def test_matched_pair_fixtures_share_monte_carlo_ate():
    ate_c3 = builtin_mc_ate("c3", {"tau": 1.0}, 10 ** 5, STREAM.substream(6))
    ate_c4 = builtin_mc_ate("c4", {"tau": 1.0}, 10 ** 5, STREAM.substream(7))
    assert ate_c3 == pytest.approx(1.0, abs=0.05)
    assert ate_c4 == pytest.approx(1.0, abs=0.05)
    assert abs(ate_c3 - ate_c4) <= 0.05


def test_bootstrap_simulator_reuses_source_covariates():
    source = builtin_simulate("dgp1", REF_SIM1, 500, STREAM.substream(8))
    cfg = SimulatorConfig("builtin", 500, builtin_id="sim1", source_ref=source)
    gen = simulate(cfg, REF_SIM1, STREAM.substream(9))
    source_rows = set(source.covariates[:, 0])
    assert all(v in source_rows for v in gen.dataset.covariates[:, 0])


def test_simulate_is_deterministic_per_stream():
    cfg = SimulatorConfig("builtin", 300, builtin_id="dgp1")
    a = simulate(cfg, REF_SIM1, STREAM.substream(10))
    b = simulate(cfg, REF_SIM1, STREAM.substream(10))
    assert np.array_equal(a.dataset.outcome, b.dataset.outcome)
    assert np.array_equal(a.dataset.treatment, b.dataset.treatment)


def test_tau_star_always_equals_theta_tau():
    cfg = SimulatorConfig("builtin", 100, builtin_id="dgp11")
    gen = simulate(cfg, {"tau": 4.2}, STREAM.substream(11))
    assert gen.tau_star == 4.2
    assert gen.theta["tau"] == 4.2


def test_unknown_theta_names_rejected():
    cfg = SimulatorConfig("builtin", 100, builtin_id="sim1")
    with pytest.raises(ConfigurationError, match="theta names"):
        simulate(cfg, {"rho": 1.0, "beta": 0.0, "gamma": 2.0},
                 STREAM.substream(12))


def test_generated_dataset_requires_tau():
    ds = builtin_simulate("dgp1", REF_SIM1, 50, STREAM.substream(13))
    with pytest.raises(ConfigurationError):
        GeneratedDataset(ds, {"rho": 1.0})


def test_constant_generator_ignores_theta():
    a = builtin_simulate("constant", {"rho": 0.1, "beta": 0.1, "tau": 0.1},
                         200, STREAM.substream(14))
    b = builtin_simulate("constant", {"rho": 1.9, "beta": 1.9, "tau": 1.9},
                         200, STREAM.substream(14))
    assert np.array_equal(a.outcome, b.outcome)
    assert np.array_equal(a.treatment, b.treatment)
