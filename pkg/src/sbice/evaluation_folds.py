"""Fold assignment for cross-validated classification.

Folds are stratified by label and grouped by exact feature row: identical
rows never straddle the train/test boundary. Without the grouping, a pooled
sample whose generated half resamples source rows verbatim lets the forest
memorize duplicates and drives the two-sample AUC well below 0.5 even for
identical distributions; with it, duplicate copies are scored by models
that never saw their value, restoring the 0.5 calibration. When all rows
are distinct this is ordinary stratified k-fold assignment.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError
from .rng import RandomStream


def stratified_folds(labels: np.ndarray, k: int,
                     stream: RandomStream) -> np.ndarray:
    """Fold index per unit; each class is split evenly across the k folds."""
    labels = np.asarray(labels)
    if k < 2:
        raise ConfigurationError("stratified folds need k >= 2")
    folds = np.empty(labels.size, dtype=np.int32)
    gen = stream.generator()
    for value in np.unique(labels):
        members = np.flatnonzero(labels == value)
        if members.size < k:
            raise ConfigurationError(
                f"class {value!r} has {members.size} rows, fewer than {k} folds")
        members = members[gen.permutation(members.size)]
        for i, block in enumerate(np.array_split(members, k)):
            folds[block] = i
    return folds


def grouped_stratified_folds(features: np.ndarray, labels: np.ndarray, k: int,
                             stream: RandomStream) -> np.ndarray:
    """Stratified folds that keep exact-duplicate feature rows together.

    Groups of identical rows are assigned greedily (in seeded random order)
    to the fold whose per-class counts sit furthest below target.
    """
    labels = np.asarray(labels, dtype=float)
    if k < 2:
        raise ConfigurationError("stratified folds need k >= 2")
    _, group_of = np.unique(np.ascontiguousarray(features), axis=0,
                            return_inverse=True)
    n_groups = int(group_of.max()) + 1
    group_n1 = np.bincount(group_of, weights=labels, minlength=n_groups)
    group_n0 = np.bincount(group_of, weights=1.0 - labels, minlength=n_groups)

    target = np.array([(labels == 0.0).sum(), (labels == 1.0).sum()],
                      dtype=float) / k
    fold_counts = np.zeros((k, 2))
    fold_of_group = np.empty(n_groups, dtype=np.int32)
    order = stream.generator().permutation(n_groups)
    for g in order:
        add = np.array([group_n0[g], group_n1[g]])
        # marginal increase of the total squared deviation from target
        delta = np.sum(2.0 * (fold_counts - target) * add + add ** 2, axis=1)
        best = int(np.argmin(delta))
        fold_of_group[g] = best
        fold_counts[best] += add

    folds = fold_of_group[group_of]
    for fold in range(k):
        train = folds != fold
        if np.unique(labels[train]).size < 2 or not np.any(~train):
            raise ConfigurationError(
                "fold assignment left a training split without both classes")
    return folds.astype(np.int32)
