"""Distribution- and estimator-level metrics.

Classifier AUC: for each generated dataset, pool its rows (label 1) with
the source rows (label 0), run stratified k-fold cross-validation with the
random-forest classifier, score the out-of-fold probabilities, and report
the per-dataset AUCs with their mean and spread.

Mean BSE: the mean squared difference between each generated dataset's
estimator bias and the source bias, per estimator and regime.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import Dataset
from .errors import ConfigurationError
from .evaluation_folds import grouped_stratified_folds
from .learners import ForestConfig, rf_fit, rf_predict_proba
from .rng import RandomStream
from .simulators import GeneratedDataset


@dataclass(frozen=True)
class ClassifierConfig:
    n_trees: int = 200
    max_depth: int = 8
    folds: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.folds < 2:
            raise ConfigurationError("classifier CV needs >= 2 folds")


@dataclass(frozen=True)
class AucReport:
    per_dataset: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_dataset))

    @property
    def sd(self) -> float:
        return float(np.std(self.per_dataset))


@dataclass(frozen=True)
class BseCell:
    """Mean BSE for one (estimator, regime) pair; None when every
    per-dataset estimate failed."""

    value: float | None
    n_failed: int
    n_used: int


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midrank tie handling."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=float)
    pos = labels == 1.0
    n1, n0 = int(pos.sum()), int((~pos).sum())
    if n1 == 0 or n0 == 0:
        raise ConfigurationError("roc_auc needs both classes present")
    ranks = _midranks(scores)
    u = ranks[pos].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(values.size, dtype=float)
    base = np.arange(1, values.size + 1, dtype=float)
    # average the ranks inside each tie block
    boundaries = np.flatnonzero(np.diff(sorted_vals) != 0) + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [values.size]))
    for s, e in zip(starts, ends):
        base[s:e] = (s + 1 + e) / 2.0
    ranks[order] = base
    return ranks


def cross_validated_auc(features: np.ndarray, labels: np.ndarray,
                        cfg: ClassifierConfig, seed: int) -> float:
    """Out-of-fold probability AUC under stratified k-fold CV."""
    folds = grouped_stratified_folds(features, labels, cfg.folds,
                                     RandomStream(seed))
    probs = np.empty(labels.size)
    for k in range(cfg.folds):
        held = folds == k
        forest = rf_fit(features[~held], labels[~held],
                        ForestConfig(cfg.n_trees, cfg.max_depth,
                                     seed=seed * 1000 + k))
        probs[held] = rf_predict_proba(forest, features[held])
    return roc_auc(probs, labels)


def classifier_auc(generated: Sequence[GeneratedDataset | Dataset],
                   source: Dataset, cfg: ClassifierConfig) -> AucReport:
    """One cross-validated AUC per generated dataset against the source."""
    if not generated:
        raise ConfigurationError("classifier_auc needs >= 1 generated dataset")
    per_dataset = []
    for index, item in enumerate(generated):
        dataset = item.dataset if isinstance(item, GeneratedDataset) else item
        if dataset.schema != source.schema:
            raise ConfigurationError(
                f"generated dataset {index} does not share the source schema")
        features = np.vstack([dataset.matrix(), source.matrix()])
        labels = np.concatenate([np.ones(dataset.n), np.zeros(source.n)])
        per_dataset.append(cross_validated_auc(features, labels, cfg,
                                               seed=cfg.seed * 100003 + index))
    return AucReport(tuple(per_dataset))


def mean_bse(values: Sequence[float | None], tau_stars: Sequence[float],
             source_estimate, source_tau_star: float) -> BseCell:
    """Mean squared (generated bias - source bias).

    ``source_estimate`` is a scalar for a single source dataset; a sequence
    supplies per-dataset source estimates when the source is itself a set.
    Failed estimates (None) are excluded and counted.
    """
    if len(values) != len(tau_stars):
        raise ConfigurationError("one tau_star per estimate required")
    if len(values) == 0:
        raise ConfigurationError("mean_bse needs >= 1 dataset")
    source_est = np.asarray(source_estimate, dtype=float)
    if source_est.ndim not in (0, 1):
        raise ConfigurationError("source estimate must be scalar or 1-D")
    if source_est.ndim == 1 and source_est.size != len(values):
        raise ConfigurationError("per-dataset source estimates must align")
    source_bias = source_est - float(source_tau_star)

    sq_terms = []
    n_failed = 0
    for i, (value, tau_star) in enumerate(zip(values, tau_stars)):
        if value is None:
            n_failed += 1
            continue
        sb = float(source_bias[i]) if source_bias.ndim == 1 else float(source_bias)
        sq_terms.append(((value - tau_star) - sb) ** 2)
    if not sq_terms:
        return BseCell(None, n_failed, 0)
    return BseCell(float(np.mean(sq_terms)), n_failed, len(sq_terms))
