import numpy as np
import pytest
from scipy import stats

from sbice import distributions as dist
from sbice.copula import CorrelationMatrix
from sbice.errors import ConfigurationError
from sbice.rng import RandomStream
from sbice.simulators import (CovariateMargin, FrugalConfig, frugal_catalog,
                              frugal_entry, frugal_mc_ate, frugal_simulate)

STREAM = RandomStream(59)

R4_COV = np.array([
    [1.0, 0.5, 0.3, 0.1],
    [0.5, 1.0, 0.4, 0.1],
    [0.3, 0.4, 1.0, 0.1],
    [0.1, 0.1, 0.1, 1.0],
])


def identity_config(p=1, tau_only=True, propensity=(0.0,), intercept=0.0):
    margins = tuple(CovariateMargin(f"x{i + 1}", dist.normal(0.0, 1.0))
                    for i in range(p))
    return FrugalConfig(margins=margins, propensity_intercept=intercept,
                        propensity_coefficients=propensity,
                        outcome_base=0.5, outcome_sd=1.0,
                        correlation=CorrelationMatrix(np.eye(p + 1)))


def test_every_preset_simulates():
    for entry in frugal_catalog():
        gen = frugal_simulate(entry.config, entry.reference_theta,
                              STREAM.substream(abs(hash(entry.id)) % 997), 300)
        assert gen.dataset.n == 300
        assert gen.dataset.p == len(entry.config.observed_names)


def test_identity_copula_removes_confounding():
    # strong propensity dependence, yet independence of the outcome margin
    # means difference-of-means recovers tau
    cfg = identity_config(p=1, propensity=(2.0,), intercept=-0.5)
    gen = frugal_simulate(cfg, {"tau": 5.0}, STREAM.substream(1), 10 ** 4)
    d = gen.dataset
    dm = d.outcome[d.treatment == 1].mean() - d.outcome[d.treatment == 0].mean()
    assert dm == pytest.approx(5.0, abs=0.1)


def test_degenerate_propensity_is_balanced():
    cfg = identity_config(p=1, propensity=(0.0,), intercept=0.0)
    gen = frugal_simulate(cfg, {"tau": 5.0}, STREAM.substream(2), 10 ** 4)
    assert gen.dataset.treatment.mean() == pytest.approx(0.5, abs=0.02)


def test_dgp4_pairwise_spearman_matches_dependence_matrix():
    entry = frugal_entry("frugal_dgp4")
    gen = frugal_simulate(entry.config, {"tau": 5.0}, STREAM.substream(3),
                          2 * 10 ** 4)
    x = gen.dataset.covariates
    for i in range(4):
        for j in range(i + 1, 4):
            r = stats.spearmanr(x[:, i], x[:, j]).statistic
            assert r == pytest.approx(R4_COV[i, j], abs=0.05)


def test_dgp3_difference_of_means_pulled_below_tau():
    # negative couplings between the first covariates and the outcome margin
    # combine with the propensity to bias difference-of-means downward
    # (frozen from a 1e6-sample run: 4.747)
    entry = frugal_entry("frugal_dgp3")
    gen = frugal_simulate(entry.config, {"tau": 5.0}, STREAM.substream(4), 10 ** 4)
    d = gen.dataset
    dm = d.outcome[d.treatment == 1].mean() - d.outcome[d.treatment == 0].mean()
    assert dm < 5.0


def test_zero_rho_override_decouples_hidden_covariate():
    # observable twin of the hidden-covariate construction: independent
    # covariates, margin coupled to all but the last one
    corr = np.eye(5)
    corr[:4, 4] = corr[4, :4] = [0.5, 0.4, 0.3, 0.0]
    margins = tuple(CovariateMargin(f"x{i + 1}", dist.normal(0.0, 1.0))
                    for i in range(4))
    cfg = FrugalConfig(margins=margins, propensity_intercept=0.0,
                       propensity_coefficients=(0.3, 0.3, 0.3, 0.3),
                       outcome_base=0.5, outcome_sd=1.0,
                       correlation=CorrelationMatrix(corr))
    gen = frugal_simulate(cfg, {"tau": 5.0}, STREAM.substream(5), 2 * 10 ** 4)
    d = gen.dataset
    y_score = d.outcome - 0.5 - 5.0 * d.treatment
    others = np.column_stack([np.ones(d.n), d.covariates[:, :3]])
    resid_y = y_score - others @ np.linalg.lstsq(others, y_score, rcond=None)[0]
    x4 = d.covariates[:, 3]
    resid_x = x4 - others @ np.linalg.lstsq(others, x4, rcond=None)[0]
    partial = np.corrcoef(resid_y, resid_x)[0, 1]
    assert abs(partial) <= 0.03


def test_rho_override_edits_hidden_margin_entries():
    entry = frugal_entry("frugal_sim4u")
    from sbice.simulators.frugal import _spearman_with_override
    edited = _spearman_with_override(entry.config, {"tau": 5.0, "rho": -0.25})
    assert edited.entries[3, 4] == pytest.approx(-0.25)
    assert edited.entries[4, 3] == pytest.approx(-0.25)
    # observed covariate rows keep their stated coupling
    assert edited.entries[0, 4] == pytest.approx(0.8)


def test_sim4u_at_reference_theta_reproduces_full_process():
    entry = frugal_entry("frugal_sim4u")
    from sbice.simulators.frugal import _spearman_with_override
    edited = _spearman_with_override(entry.config, entry.reference_theta)
    assert np.allclose(edited.entries, entry.config.correlation.entries)


def test_hidden_covariates_are_dropped_from_output():
    entry = frugal_entry("frugal_sim5u")
    gen = frugal_simulate(entry.config, entry.reference_theta,
                          STREAM.substream(6), 100)
    assert gen.dataset.covariate_names == ("x1", "x2", "x4", "x5", "x6",
                                           "x8", "x9", "x10")


def test_mc_ate_equals_tau_exactly_in_expectation():
    entry = frugal_entry("frugal_dgp4")
    ate = frugal_mc_ate(entry.config, {"tau": 5.0}, 10 ** 5, STREAM.substream(7))
    assert ate == pytest.approx(5.0, abs=0.05)


def test_bernoulli_margins_emit_binary_covariates():
    entry = frugal_entry("frugal_dgp5")
    gen = frugal_simulate(entry.config, {"tau": -5.0}, STREAM.substream(8), 2000)
    x = gen.dataset.covariates
    for j in range(5, 10):
        assert set(np.unique(x[:, j])) <= {0.0, 1.0}
        assert x[:, j].mean() == pytest.approx(0.5, abs=0.05)


def test_config_validation():
    with pytest.raises(ConfigurationError, match="dim"):
        FrugalConfig(margins=(CovariateMargin("x1", dist.normal(0, 1)),),
                     propensity_intercept=0.0, propensity_coefficients=(0.0,),
                     outcome_base=0.0, outcome_sd=1.0,
                     correlation=CorrelationMatrix(np.eye(3)))
    with pytest.raises(ConfigurationError, match="hidden"):
        FrugalConfig(margins=(CovariateMargin("x1", dist.normal(0, 1)),),
                     propensity_intercept=0.0, propensity_coefficients=(0.0,),
                     outcome_base=0.0, outcome_sd=1.0,
                     correlation=CorrelationMatrix(np.eye(2)),
                     rho_override=True)
