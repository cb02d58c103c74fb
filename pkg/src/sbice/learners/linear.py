"""Linear least squares and IRLS logistic regression.

Both return plain coefficient arrays with the intercept first; design
matrices are augmented internally.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import expit

from ..errors import ConfigurationError

logger = logging.getLogger(__name__)

_RIDGE = 1e-8
_IRLS_TOL = 1e-6
_IRLS_MAX_ITER = 100
_PROB_FLOOR = 1e-10


def _augment(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return np.column_stack([np.ones(x.shape[0]), x])


def ols_fit(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares via SVD; rank deficiency falls back to a tiny ridge."""
    a = _augment(x)
    y = np.asarray(y, dtype=float)
    if a.shape[0] <= a.shape[1]:
        raise ConfigurationError(
            f"least squares needs n > p + 1, got n={a.shape[0]} p={a.shape[1] - 1}")
    coef, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
    if rank < a.shape[1]:
        logger.warning("rank-deficient design (rank %d < %d); ridge fallback",
                       rank, a.shape[1])
        gram = a.T @ a + _RIDGE * np.eye(a.shape[1])
        coef = np.linalg.solve(gram, a.T @ y)
    return coef


def ols_predict(x: np.ndarray, coef: np.ndarray) -> np.ndarray:
    return _augment(x) @ coef


def logistic_fit(x: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Maximum likelihood by iteratively reweighted least squares.

    Stops when the gradient norm drops below 1e-6 or after 100 iterations;
    perfect separation shows up as huge coefficients and is only a warning
    because predictions are clipped downstream.
    """
    a = _augment(x)
    y = np.asarray(labels, dtype=float)
    if not (np.any(y == 0.0) and np.any(y == 1.0)):
        raise ConfigurationError("logistic regression needs both classes")
    coef = np.zeros(a.shape[1])
    for _ in range(_IRLS_MAX_ITER):
        p = expit(a @ coef)
        grad = a.T @ (y - p)
        if np.max(np.abs(grad)) <= _IRLS_TOL:
            break
        w = np.maximum(p * (1.0 - p), _PROB_FLOOR)
        hess = (a * w[:, None]).T @ a + _RIDGE * np.eye(a.shape[1])
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            break
        # dampen huge steps so separation cannot overflow the working values
        norm = np.max(np.abs(step))
        if norm > 10.0:
            step = step * (10.0 / norm)
        coef = coef + step
    p = expit(a @ coef)
    saturated = np.where(y == 1.0, p > 1.0 - 1e-3, p < 1e-3)
    if np.all(saturated):
        logger.warning("logistic fit looks separated (all %d training "
                       "probabilities saturated); predictions should be "
                       "clipped", y.size)
    return coef


def logistic_predict_proba(x: np.ndarray, coef: np.ndarray,
                           clip: tuple[float, float] | None = None) -> np.ndarray:
    p = expit(_augment(x) @ coef)
    if clip is not None:
        p = np.clip(p, clip[0], clip[1])
    return p
