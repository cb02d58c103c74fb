"""Vectorized CART building on quantile-binned features.

Features are discretized once per fit into at most 32 quantile bins; trees
then grow level by level, with one histogram pass (two bincounts per
feature) accumulating the weighted target sums for every active node at
once. Both squared-error and Gini splitting reduce to maximizing
S_L^2/W_L + S_R^2/W_R over candidate (feature, bin) pairs, so regression
trees and classification trees share this one splitter.

Splits are stored as raw-value thresholds (go left iff x < threshold), so
prediction never re-bins.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_N_BINS = 32
_MIN_GAIN = 1e-12
_TINY = 1e-300


class BinnedMatrix:
    """Feature matrix discretized into per-feature quantile bins."""

    def __init__(self, x: np.ndarray, n_bins: int = _N_BINS):
        x = np.asarray(x, dtype=float)
        n, d = x.shape
        self.x = x
        self.boundaries: list[np.ndarray] = []
        self.bins = np.empty((n, d), dtype=np.int64)
        qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
        for f in range(d):
            cuts = np.unique(np.quantile(x[:, f], qs))
            self.boundaries.append(cuts)
            self.bins[:, f] = np.searchsorted(cuts, x[:, f], side="right")
        self.n_bins = max((len(b) for b in self.boundaries), default=0) + 1

    @property
    def n_features(self) -> int:
        return self.bins.shape[1]


@dataclass(frozen=True)
class Tree:
    """Flat-array binary tree; feature == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Leaf index per row."""
        x = np.asarray(x, dtype=float)
        node = np.zeros(x.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[node]
            live = np.flatnonzero(feat >= 0)
            if live.size == 0:
                return node
            rows = x[live, feat[live]]
            go_left = rows < self.threshold[node[live]]
            node[live] = np.where(go_left, self.left[node[live]],
                                  self.right[node[live]])

    def predict(self, x: np.ndarray) -> np.ndarray:
        return self.value[self.apply(x)]

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))


def grow_tree(binned: BinnedMatrix, target: np.ndarray, weight: np.ndarray,
              max_depth: int, min_leaf: float,
              mtry: int | None = None,
              rng: np.random.Generator | None = None) -> Tree:
    """Grow one tree on (possibly zero-)weighted rows.

    ``weight`` carries bootstrap multiplicities for bagged trees (zero means
    the row is out of bag); ``min_leaf`` bounds the weighted row count on
    each side of every split. ``mtry`` features are drawn per node when set.
    """
    bins = binned.bins
    d = binned.n_features
    n_bins = binned.n_bins

    target = np.asarray(target, dtype=float)
    weight = np.asarray(weight, dtype=float)

    capacity = 2
    feature = np.full(capacity, -1, dtype=np.int64)
    threshold = np.zeros(capacity)
    left = np.full(capacity, -1, dtype=np.int64)
    right = np.full(capacity, -1, dtype=np.int64)
    value = np.zeros(capacity)
    n_nodes = 1

    node_of = np.where(weight > 0, 0, -1).astype(np.int64)
    active = np.array([0], dtype=np.int64)

    for depth in range(max_depth + 1):
        rows = np.flatnonzero(node_of >= 0)
        if rows.size == 0 or active.size == 0:
            break
        local = np.searchsorted(active, node_of[rows])
        w = weight[rows]
        wy = w * target[rows]
        n_active = active.size

        w_tot = np.bincount(local, weights=w, minlength=n_active)
        s_tot = np.bincount(local, weights=wy, minlength=n_active)
        value[active] = s_tot / np.maximum(w_tot, _TINY)

        if depth == max_depth:
            break

        # histogram pass: per feature, weighted (count, target-sum) by bin
        size = n_active * n_bins
        w_left = np.empty((d, n_active, n_bins))
        s_left = np.empty((d, n_active, n_bins))
        base_key = local * n_bins
        for f in range(d):
            key = base_key + bins[rows, f]
            w_left[f] = np.bincount(key, weights=w,
                                    minlength=size).reshape(n_active, n_bins)
            s_left[f] = np.bincount(key, weights=wy,
                                    minlength=size).reshape(n_active, n_bins)
        np.cumsum(w_left, axis=2, out=w_left)
        np.cumsum(s_left, axis=2, out=s_left)

        w_right = w_tot[None, :, None] - w_left
        s_right = s_tot[None, :, None] - s_left
        valid = (w_left >= min_leaf) & (w_right >= min_leaf)
        np.maximum(w_left, _TINY, out=w_left)
        np.maximum(w_right, _TINY, out=w_right)
        score = s_left
        score *= s_left
        score /= w_left
        s_right *= s_right
        s_right /= w_right
        score += s_right
        score[~valid] = -np.inf

        if mtry is not None and mtry < d:
            keep = np.argsort(rng.random((n_active, d)), axis=1)[:, :mtry]
            mask = np.zeros((n_active, d), dtype=bool)
            np.put_along_axis(mask, keep, True, axis=1)
            score[~mask.T] = -np.inf

        flat = score.transpose(1, 0, 2).reshape(n_active, d * n_bins)
        best = np.argmax(flat, axis=1)
        best_score = flat[np.arange(n_active), best]
        gain = best_score - s_tot ** 2 / np.maximum(w_tot, _TINY)
        best_f = best // n_bins
        best_b = best % n_bins
        split_mask = np.isfinite(best_score) & (gain > _MIN_GAIN)
        splits = np.flatnonzero(split_mask)
        if splits.size == 0:
            break

        n_split = splits.size
        needed = n_nodes + 2 * n_split
        if needed > capacity:
            grow_by = max(needed, 2 * capacity)
            feature = _extend(feature, grow_by, -1)
            threshold = _extend(threshold, grow_by, 0.0)
            left = _extend(left, grow_by, -1)
            right = _extend(right, grow_by, -1)
            value = _extend(value, grow_by, 0.0)
            capacity = grow_by

        split_nodes = active[splits]
        left_ids = n_nodes + 2 * np.arange(n_split, dtype=np.int64)
        right_ids = left_ids + 1
        chosen_f = best_f[splits]
        feature[split_nodes] = chosen_f
        threshold[split_nodes] = [binned.boundaries[f][b] for f, b in
                                  zip(chosen_f, best_b[splits])]
        left[split_nodes] = left_ids
        right[split_nodes] = right_ids
        n_nodes = needed

        # route rows: children for split nodes, settle the rest
        left_of = np.full(n_active, -1, dtype=np.int64)
        right_of = np.full(n_active, -1, dtype=np.int64)
        cut_of = np.zeros(n_active, dtype=np.int64)
        feat_of = np.zeros(n_active, dtype=np.int64)
        left_of[splits] = left_ids
        right_of[splits] = right_ids
        cut_of[splits] = best_b[splits]
        feat_of[splits] = chosen_f

        went = left_of[local] >= 0
        split_rows = rows[went]
        li = local[went]
        row_bins = bins[split_rows, feat_of[li]]
        node_of[split_rows] = np.where(row_bins <= cut_of[li],
                                       left_of[li], right_of[li])
        node_of[rows[~went]] = -1
        active = np.sort(np.concatenate([left_ids, right_ids]))

    return Tree(feature[:n_nodes].copy(), threshold[:n_nodes].copy(),
                left[:n_nodes].copy(), right[:n_nodes].copy(),
                value[:n_nodes].copy())


def _extend(arr: np.ndarray, size: int, fill) -> np.ndarray:
    out = np.full(size, fill, dtype=arr.dtype)
    out[:arr.size] = arr
    return out
