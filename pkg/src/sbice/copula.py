"""Gaussian-copula math: Spearman-scale correlation matrices and the
conditional law of the causal-margin score given covariate scores.

Dependence matrices are specified on the Spearman scale (as the generating
processes write them) and converted entrywise to Pearson via
r_P = 2 sin(pi r_S / 6) before any latent-normal computation. Entrywise
conversion can break positive semi-definiteness, so converted matrices are
projected onto the nearest PSD matrix by eigenvalue clipping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

_PSD_EPS = 1e-10


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric Spearman-scale correlation matrix with unit diagonal."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError("correlation matrix must be square")
        if not np.allclose(m, m.T, atol=1e-12):
            raise ConfigurationError("correlation matrix must be symmetric")
        if not np.allclose(np.diag(m), 1.0, atol=1e-12):
            raise ConfigurationError("correlation matrix must have unit diagonal")
        if np.any(np.abs(m) > 1.0 + 1e-12):
            raise ConfigurationError("correlation entries must lie in [-1, 1]")
        m = np.clip((m + m.T) / 2.0, -1.0, 1.0)
        np.fill_diagonal(m, 1.0)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def spearman_to_pearson(r_s):
    """Entrywise Spearman -> Pearson map for the Gaussian copula.

    Fixes 0 and +/-1 and maps [-1, 1] onto itself.
    """
    return 2.0 * np.sin(np.pi * np.asarray(r_s, dtype=float) / 6.0)


def nearest_psd(matrix: np.ndarray) -> np.ndarray:
    """Project onto the nearest PSD correlation matrix (eigenvalue clipping)."""
    sym = (matrix + matrix.T) / 2.0
    eigval, eigvec = np.linalg.eigh(sym)
    if eigval.min() >= _PSD_EPS:
        return sym
    clipped = (eigvec * np.maximum(eigval, _PSD_EPS)) @ eigvec.T
    # restore the unit diagonal lost in the projection
    d = np.sqrt(np.diag(clipped))
    out = clipped / np.outer(d, d)
    np.fill_diagonal(out, 1.0)
    return out


def pearson_matrix(r: CorrelationMatrix) -> np.ndarray:
    """Spearman matrix converted to a PSD Pearson matrix, ready for latent use."""
    p = spearman_to_pearson(r.entries)
    np.fill_diagonal(p, 1.0)
    return nearest_psd(p)


def conditional_weights(pearson: np.ndarray) -> tuple[np.ndarray, float]:
    """Weights w and sd of the last margin's score given the first dim-1 scores.

    The conditional law is N(w . scores, sd^2) with w = R11^{-1} r12 and
    sd^2 = 1 - r12' R11^{-1} r12, where the last row/column is the margin.
    """
    k = pearson.shape[0] - 1
    r11 = pearson[:k, :k]
    r12 = pearson[:k, k]
    try:
        w = np.linalg.solve(r11, r12)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError("ill-conditioned correlation matrix: "
                                 "covariate block is singular") from exc
    var = 1.0 - float(r12 @ w)
    return w, float(np.sqrt(max(var, 0.0)))


def gaussian_copula_conditional(r: CorrelationMatrix,
                                scores: np.ndarray) -> tuple[float, float]:
    """Conditional (mean, sd) of the causal-margin score given covariate scores.

    ``scores`` are the standard-normal scores of the first dim-1 margins;
    the Spearman matrix is converted to Pearson scale internally.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.shape != (r.dim - 1,):
        raise ConfigurationError(
            f"expected {r.dim - 1} scores, got shape {scores.shape}")
    w, sd = conditional_weights(pearson_matrix(r))
    return float(w @ scores), sd
