import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.special import expit

from sbice.errors import ConfigurationError
from sbice.learners import (ForestConfig, GbtConfig, gbt_fit, logistic_fit,
                            logistic_predict_proba, ols_fit, ols_predict,
                            rf_fit, rf_predict_proba)
from sbice.rng import RandomStream

GEN = RandomStream(4242).generator()


class TestOls:
    def test_exact_line(self):
        x = np.arange(10, dtype=float)
        coef = ols_fit(x, 2.0 * x)
        assert coef[0] == pytest.approx(0.0, abs=1e-10)
        assert coef[1] == pytest.approx(2.0, abs=1e-10)

    def test_intercept_only_design_returns_mean(self):
        y = np.array([1.0, 2, 3, 4, 5, 6, 7, 8])
        coef = ols_fit(np.empty((8, 0)), y)
        assert coef[0] == pytest.approx(y.mean(), abs=1e-10)

    def test_three_point_normal_equations(self):
        # hand solve for (0,1),(1,3),(2,5): slope 2, intercept 1
        coef = ols_fit(np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, 5.0]))
        assert coef[0] == pytest.approx(1.0, abs=1e-10)
        assert coef[1] == pytest.approx(2.0, abs=1e-10)

    def test_residual_orthogonality(self):
        x = GEN.standard_normal((200, 4))
        y = x @ np.array([1.0, -2.0, 0.5, 3.0]) + GEN.standard_normal(200)
        coef = ols_fit(x, y)
        r = y - ols_predict(x, coef)
        a = np.column_stack([np.ones(200), x])
        assert np.max(np.abs(a.T @ r)) <= 1e-8 * np.linalg.norm(y)

    def test_rank_deficiency_falls_back_to_ridge(self, caplog):
        x = np.column_stack([np.arange(10.0), np.arange(10.0)])
        with caplog.at_level("WARNING"):
            coef = ols_fit(x, np.arange(10.0) * 3.0)
        assert "rank-deficient" in caplog.text
        assert np.all(np.isfinite(coef))

    def test_underdetermined_rejected(self):
        with pytest.raises(ConfigurationError):
            ols_fit(np.zeros((3, 3)), np.zeros(3))


class TestLogistic:
    def test_zero_design_balanced_labels(self):
        x = np.zeros((100, 1))
        y = np.repeat([0.0, 1.0], 50)
        coef = logistic_fit(x, y)
        p = logistic_predict_proba(x, coef)
        assert np.all(np.abs(p - 0.5) < 1e-6)

    def test_monotone_in_separating_feature(self):
        x = np.linspace(-3, 3, 60)
        y = (x > 0).astype(float)
        coef = logistic_fit(x, y)
        p = logistic_predict_proba(np.sort(x), coef)
        assert np.all(np.diff(p) >= 0)

    def test_ten_point_fixture_matches_brute_force_mle(self):
        x = np.array([-2.1, -1.4, -0.6, -0.3, 0.1, 0.4, 0.8, 1.2, 1.9, 2.5])
        y = np.array([0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0])

        def nll(params):
            p = np.clip(expit(params[0] + params[1] * x), 1e-12, 1 - 1e-12)
            return -np.sum(y * np.log(p) + (1 - y) * np.log(1 - p))

        oracle = minimize(nll, np.zeros(2), method="Nelder-Mead",
                          options={"xatol": 1e-10, "fatol": 1e-12})
        ours = logistic_fit(x, y)
        assert nll(ours) == pytest.approx(oracle.fun, abs=1e-6)

    def test_single_class_rejected(self):
        with pytest.raises(ConfigurationError):
            logistic_fit(np.arange(5.0), np.ones(5))

    def test_separation_warns_and_clips(self, caplog):
        x = np.concatenate([np.linspace(-3, -1, 20), np.linspace(1, 3, 20)])
        y = (x > 0).astype(float)
        with caplog.at_level("WARNING"):
            coef = logistic_fit(x, y)
        assert "separated" in caplog.text
        p = logistic_predict_proba(x, coef, clip=(0.01, 0.99))
        assert p.min() >= 0.01 and p.max() <= 0.99


class TestGbt:
    def test_constant_target_one_tree(self):
        x = GEN.standard_normal((50, 2))
        y = np.full(50, 3.25)
        model = gbt_fit(x, y, GbtConfig(n_trees=1, learning_rate=1.0))
        assert np.allclose(model.predict(x), 3.25, atol=1e-9)

    def test_separable_labels_high_accuracy(self):
        x = GEN.standard_normal((500, 1))
        y = (x[:, 0] > 0).astype(float)
        model = gbt_fit(x, y, loss="logistic")
        acc = np.mean((model.predict(x) > 0.5) == y)
        assert acc >= 0.95

    def test_training_loss_non_increasing(self):
        x = GEN.standard_normal((300, 3))
        y = x[:, 0] ** 2 + GEN.standard_normal(300)
        model = gbt_fit(x, y)
        diffs = np.diff(model.train_losses)
        assert np.all(diffs <= 1e-12)
        assert model.train_losses[99] <= model.train_losses[9]

    def test_too_few_rows_rejected(self):
        with pytest.raises(ConfigurationError):
            gbt_fit(np.zeros((4, 1)), np.zeros(4))


class TestForest:
    def test_no_signal_probability_near_class_prior(self):
        x = np.ones((400, 1))
        for prior in (0.5, 0.7):
            y = (np.arange(400) < prior * 400).astype(float)
            model = rf_fit(x, y, ForestConfig(n_trees=100, seed=3))
            p = rf_predict_proba(model, x[:10])
            assert np.all(np.abs(p - prior) <= 0.1)

    def test_separable_blobs_held_out_accuracy(self):
        n = 600
        x = np.vstack([GEN.standard_normal((n // 2, 2)) + 2.0,
                       GEN.standard_normal((n // 2, 2)) - 2.0])
        y = np.repeat([1.0, 0.0], n // 2)
        shuffle = RandomStream(8).generator().permutation(n)
        x, y = x[shuffle], y[shuffle]
        model = rf_fit(x[:400], y[:400], ForestConfig(n_trees=100, seed=4))
        held = rf_predict_proba(model, x[400:])
        assert np.mean((held > 0.5) == y[400:]) >= 0.95

    def test_same_seed_same_forest(self):
        x = GEN.standard_normal((200, 3))
        y = (x[:, 0] + x[:, 1] > 0).astype(float)
        cfg = ForestConfig(n_trees=20, seed=11)
        a = rf_fit(x, y, cfg)
        b = rf_fit(x, y, cfg)
        probe = GEN.standard_normal((50, 3))
        assert np.array_equal(rf_predict_proba(a, probe),
                              rf_predict_proba(b, probe))

    def test_single_class_rejected(self):
        with pytest.raises(ConfigurationError):
            rf_fit(np.zeros((10, 1)), np.ones(10))
