"""Internal supervised learners: linear, logistic, boosted trees, forest."""

from .boosting import GbtConfig, GbtModel, gbt_fit
from .forest import ForestConfig, ForestModel, rf_fit, rf_predict_proba
from .linear import (logistic_fit, logistic_predict_proba, ols_fit,
                     ols_predict)
from .tree import BinnedMatrix, Tree, grow_tree

__all__ = [
    "BinnedMatrix", "ForestConfig", "ForestModel", "GbtConfig", "GbtModel",
    "Tree", "gbt_fit", "grow_tree", "logistic_fit", "logistic_predict_proba",
    "ols_fit", "ols_predict", "rf_fit", "rf_predict_proba",
]
