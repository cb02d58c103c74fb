"""The ATE estimator suite: difference of means, X-learner, double machine
learning, AIPW and TMLE, each in linear and/or boosted-tree flavors.

Estimators return an explicit failure marker (empty arm, degenerate
propensity, non-finite result) instead of NaN. All are pure given
(dataset, config): boosted trees carry no sampling and cross-fitting folds
derive from the config seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, logit

from .dataset import Dataset
from .errors import ConfigurationError
from .learners import (GbtConfig, gbt_fit, logistic_fit,
                       logistic_predict_proba, ols_fit, ols_predict)
from .rng import RandomStream

ESTIMATOR_IDS = ("diff_means", "x_learner_linear", "x_learner_gbt",
                 "dml_linear", "dml_gbt", "aipw_linear", "tmle")

_Q_FLOOR = 0.005


@dataclass(frozen=True)
class LearnerConfig:
    gbt: GbtConfig = field(default_factory=GbtConfig)
    cross_fit_folds: int = 2
    propensity_clip: tuple[float, float] | None = (0.01, 0.99)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cross_fit_folds < 2:
            raise ConfigurationError("cross-fitting needs >= 2 folds")
        if self.propensity_clip is not None:
            lo, hi = self.propensity_clip
            if not 0.0 < lo < hi < 1.0:
                raise ConfigurationError("propensity clip bounds must lie "
                                         "inside (0, 1)")
            object.__setattr__(self, "propensity_clip", (float(lo), float(hi)))


@dataclass(frozen=True)
class AteEstimate:
    estimator: str
    value: float | None
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.failure is None


class _Failure(Exception):
    pass


def estimate_ate(dataset: Dataset, estimator: str,
                 cfg: LearnerConfig = LearnerConfig()) -> AteEstimate:
    if estimator not in ESTIMATOR_IDS:
        raise ConfigurationError(f"unknown estimator {estimator!r}; known: "
                                 f"{', '.join(ESTIMATOR_IDS)}")
    try:
        value = _dispatch(dataset, estimator, cfg)
        if not np.isfinite(value):
            raise _Failure("non-finite estimate")
        return AteEstimate(estimator, float(value))
    except _Failure as exc:
        return AteEstimate(estimator, None, str(exc))


def _dispatch(dataset: Dataset, estimator: str, cfg: LearnerConfig) -> float:
    t = dataset.treatment
    n1, n0 = int(t.sum()), int((1.0 - t).sum())
    if n1 == 0 or n0 == 0:
        raise _Failure("empty treatment arm")
    if estimator == "diff_means":
        return _diff_means(dataset)
    need = max(5, dataset.p + 2)
    if min(n0, n1) < need:
        raise _Failure(f"model-based estimator needs >= {need} units per arm, "
                       f"got ({n0}, {n1})")
    if estimator in ("x_learner_linear", "x_learner_gbt"):
        return _x_learner(dataset, cfg, use_gbt=estimator.endswith("gbt"))
    if estimator in ("dml_linear", "dml_gbt"):
        return _dml(dataset, cfg, use_gbt=estimator.endswith("gbt"))
    if estimator == "aipw_linear":
        return _aipw(dataset, cfg)
    return _tmle(dataset, cfg)


def _diff_means(dataset: Dataset) -> float:
    t, y = dataset.treatment, dataset.outcome
    return float(y[t == 1].mean() - y[t == 0].mean())


def _regression(x, y, cfg: LearnerConfig, use_gbt: bool):
    """Fit one outcome regression and return its prediction function."""
    if use_gbt:
        model = gbt_fit(x, y, cfg.gbt)
        return model.predict
    coef = ols_fit(x, y)
    return lambda xx: ols_predict(xx, coef)


def _propensity(x, t, cfg: LearnerConfig) -> np.ndarray:
    coef = logistic_fit(x, t)
    e = logistic_predict_proba(x, coef, clip=cfg.propensity_clip)
    if cfg.propensity_clip is not None:
        lo, hi = cfg.propensity_clip
        if np.all((e <= lo) | (e >= hi)):
            raise _Failure("degenerate propensity: every value clipped")
    return e


def _x_learner(dataset: Dataset, cfg: LearnerConfig, use_gbt: bool) -> float:
    x, t, y = dataset.covariates, dataset.treatment, dataset.outcome
    treated, control = t == 1, t == 0
    mu0 = _regression(x[control], y[control], cfg, use_gbt)
    mu1 = _regression(x[treated], y[treated], cfg, use_gbt)
    d_treated = y[treated] - mu0(x[treated])
    d_control = mu1(x[control]) - y[control]
    tau1 = _regression(x[treated], d_treated, cfg, use_gbt)
    tau0 = _regression(x[control], d_control, cfg, use_gbt)
    e = _propensity(x, t, cfg)
    return float(np.mean(e * tau0(x) + (1.0 - e) * tau1(x)))


def _crossfit_folds(n: int, k: int, seed: int) -> np.ndarray:
    """Fold index per unit, a seeded permutation split into k blocks."""
    perm = RandomStream(seed).substream(101).generator().permutation(n)
    folds = np.empty(n, dtype=np.int32)
    for i, block in enumerate(np.array_split(perm, k)):
        folds[block] = i
    return folds


def _dml(dataset: Dataset, cfg: LearnerConfig, use_gbt: bool) -> float:
    x, t, y = dataset.covariates, dataset.treatment, dataset.outcome
    n = dataset.n
    folds = _crossfit_folds(n, cfg.cross_fit_folds, cfg.seed)
    resid_y = np.empty(n)
    resid_t = np.empty(n)
    for k in range(cfg.cross_fit_folds):
        held, train = folds == k, folds != k
        if not np.any(held):
            continue
        if len(np.unique(t[train])) < 2:
            raise _Failure("a cross-fitting fold lost one treatment arm")
        m_hat = _regression(x[train], y[train], cfg, use_gbt)
        if use_gbt:
            e_model = gbt_fit(x[train], t[train], cfg.gbt, loss="logistic")
            e_hat = e_model.predict(x[held])
        else:
            coef = logistic_fit(x[train], t[train])
            e_hat = logistic_predict_proba(x[held], coef)
        if cfg.propensity_clip is not None:
            e_hat = np.clip(e_hat, *cfg.propensity_clip)
        resid_y[held] = y[held] - m_hat(x[held])
        resid_t[held] = t[held] - e_hat
    denom = float(np.sum(resid_t ** 2))
    if denom <= 1e-12:
        raise _Failure("degenerate propensity: no treatment variation left")
    return float(np.sum(resid_t * resid_y) / denom)


def _aipw(dataset: Dataset, cfg: LearnerConfig) -> float:
    x, t, y = dataset.covariates, dataset.treatment, dataset.outcome
    treated, control = t == 1, t == 0
    mu1 = ols_predict(x, ols_fit(x[treated], y[treated]))
    mu0 = ols_predict(x, ols_fit(x[control], y[control]))
    e = _propensity(x, t, cfg)
    psi = (mu1 - mu0
           + t * (y - mu1) / e
           - (1.0 - t) * (y - mu0) / (1.0 - e))
    return float(psi.mean())


def _logistic_offset_fit(h: np.ndarray, y: np.ndarray,
                         offset: np.ndarray) -> np.ndarray:
    """No-intercept logistic MLE with a fixed offset (the TMLE fluctuation)."""
    eps = np.zeros(h.shape[1])
    for _ in range(100):
        p = expit(offset + h @ eps)
        grad = h.T @ (y - p)
        if np.max(np.abs(grad)) <= 1e-10:
            break
        w = np.maximum(p * (1.0 - p), 1e-10)
        hess = (h * w[:, None]).T @ h + 1e-10 * np.eye(h.shape[1])
        eps = eps + np.linalg.solve(hess, grad)
    return eps


def _tmle(dataset: Dataset, cfg: LearnerConfig) -> float:
    x, t, y = dataset.covariates, dataset.treatment, dataset.outcome
    y_min, y_max = float(y.min()), float(y.max())
    scale = y_max - y_min
    if scale <= 0.0:
        return 0.0
    y_scaled = (y - y_min) / scale

    design = np.column_stack([x, t])
    coef = ols_fit(design, y_scaled)
    q_obs = np.clip(ols_predict(design, coef), _Q_FLOOR, 1.0 - _Q_FLOOR)
    q1 = np.clip(ols_predict(np.column_stack([x, np.ones(dataset.n)]), coef),
                 _Q_FLOOR, 1.0 - _Q_FLOOR)
    q0 = np.clip(ols_predict(np.column_stack([x, np.zeros(dataset.n)]), coef),
                 _Q_FLOOR, 1.0 - _Q_FLOOR)

    e = _propensity(x, t, cfg)
    h1 = t / e
    h0 = -(1.0 - t) / (1.0 - e)
    eps = _logistic_offset_fit(np.column_stack([h1, h0]), y_scaled, logit(q_obs))

    q1_star = expit(logit(q1) + eps[0] / e)
    q0_star = expit(logit(q0) - eps[1] / (1.0 - e))
    return float(scale * np.mean(q1_star - q0_star))


def tmle_score_residual(dataset: Dataset,
                        cfg: LearnerConfig = LearnerConfig()) -> float:
    """mean(H (Y_scaled - Q*)) after targeting; ~0 when the fluctuation fit."""
    x, t, y = dataset.covariates, dataset.treatment, dataset.outcome
    y_min, y_max = float(y.min()), float(y.max())
    y_scaled = (y - y_min) / (y_max - y_min)
    design = np.column_stack([x, t])
    coef = ols_fit(design, y_scaled)
    q_obs = np.clip(ols_predict(design, coef), _Q_FLOOR, 1.0 - _Q_FLOOR)
    e = _propensity(x, t, cfg)
    h = np.column_stack([t / e, -(1.0 - t) / (1.0 - e)])
    eps = _logistic_offset_fit(h, y_scaled, logit(q_obs))
    q_star = expit(logit(q_obs) + h @ eps)
    return float(np.max(np.abs(np.mean(h * (y_scaled - q_star)[:, None],
                                       axis=0))))
