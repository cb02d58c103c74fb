"""Bagged classification forest with Gini splits and per-node feature
subsampling; probabilities average the leaf class fractions over trees."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError
from ..rng import RandomStream
from .tree import BinnedMatrix, Tree, grow_tree


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 8
    min_leaf: int = 1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigurationError("forest needs n_trees, max_depth, "
                                     "min_leaf >= 1")


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        votes = np.zeros(x.shape[0])
        for tree in self.trees:
            votes += tree.predict(x)
        return votes / len(self.trees)


def rf_fit(x: np.ndarray, labels: np.ndarray,
           cfg: ForestConfig = ForestConfig()) -> ForestModel:
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels, dtype=float)
    classes = np.unique(labels)
    if classes.size < 2:
        raise ConfigurationError("forest training needs both classes present")
    if not set(classes) <= {0.0, 1.0}:
        raise ConfigurationError("labels must be binary 0/1")

    n, d = x.shape
    mtry = math.ceil(math.sqrt(d))
    binned = BinnedMatrix(x)
    root = RandomStream(cfg.seed)
    trees = []
    for k in range(cfg.n_trees):
        gen = root.substream(k).generator()
        counts = np.bincount(gen.integers(0, n, size=n), minlength=n)
        trees.append(grow_tree(binned, labels, counts.astype(float),
                               cfg.max_depth, cfg.min_leaf, mtry=mtry, rng=gen))
    return ForestModel(tuple(trees))


def rf_predict_proba(model: ForestModel, x: np.ndarray) -> np.ndarray:
    return model.predict_proba(x)
