"""Stagewise gradient-boosted trees for squared and logistic loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from ..errors import ConfigurationError
from .tree import BinnedMatrix, Tree, grow_tree

_PROB_EPS = 1e-6
_LEAF_CLIP = 8.0


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_leaf: int = 5

    def __post_init__(self) -> None:
        if self.n_trees < 1 or self.max_depth < 1 or self.min_leaf < 1:
            raise ConfigurationError("gbt needs n_trees, max_depth, min_leaf >= 1")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError("gbt learning_rate must be in (0, 1]")


@dataclass(frozen=True)
class GbtModel:
    loss: str
    base_score: float
    learning_rate: float
    trees: tuple[Tree, ...]
    train_losses: tuple[float, ...]

    def raw_predict(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[0], self.base_score)
        for tree in self.trees:
            out += self.learning_rate * tree.predict(x)
        return out

    def predict(self, x: np.ndarray) -> np.ndarray:
        raw = self.raw_predict(x)
        return expit(raw) if self.loss == "logistic" else raw


def gbt_fit(x: np.ndarray, y: np.ndarray, cfg: GbtConfig = GbtConfig(),
            loss: str = "squared") -> GbtModel:
    """Stagewise additive trees on negative gradients.

    Logistic-loss leaves take a Newton step (residual sum over hessian sum),
    the standard two-class boosting recipe.
    """
    if loss not in ("squared", "logistic"):
        raise ConfigurationError(f"unknown gbt loss {loss!r}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if n < 2 * cfg.min_leaf:
        raise ConfigurationError(f"gbt needs n >= {2 * cfg.min_leaf} rows")

    binned = BinnedMatrix(x)
    ones = np.ones(n)
    if loss == "squared":
        base = float(y.mean())
    else:
        p0 = float(np.clip(y.mean(), _PROB_EPS, 1.0 - _PROB_EPS))
        base = float(logit(p0))

    raw = np.full(n, base)
    trees: list[Tree] = []
    losses: list[float] = []
    for _ in range(cfg.n_trees):
        if loss == "squared":
            residual = y - raw
        else:
            residual = y - expit(raw)
        tree = grow_tree(binned, residual, ones, cfg.max_depth, cfg.min_leaf)
        if loss == "logistic":
            tree = _newton_leaves(tree, x, residual, expit(raw))
        raw = raw + cfg.learning_rate * tree.predict(x)
        trees.append(tree)
        losses.append(_loss_value(loss, y, raw))
    return GbtModel(loss, base, cfg.learning_rate, tuple(trees), tuple(losses))


def _newton_leaves(tree: Tree, x: np.ndarray, residual: np.ndarray,
                   prob: np.ndarray) -> Tree:
    leaf = tree.apply(x)
    size = tree.value.shape[0]
    num = np.bincount(leaf, weights=residual, minlength=size)
    den = np.bincount(leaf, weights=prob * (1.0 - prob), minlength=size)
    newton = np.clip(num / np.maximum(den, _PROB_EPS), -_LEAF_CLIP, _LEAF_CLIP)
    value = tree.value.copy()
    seen = np.unique(leaf)
    value[seen] = newton[seen]
    return Tree(tree.feature, tree.threshold, tree.left, tree.right, value)


def _loss_value(loss: str, y: np.ndarray, raw: np.ndarray) -> float:
    if loss == "squared":
        return float(np.mean((y - raw) ** 2))
    p = np.clip(expit(raw), _PROB_EPS, 1.0 - _PROB_EPS)
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
