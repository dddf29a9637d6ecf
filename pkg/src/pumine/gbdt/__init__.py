"""Histogram gradient-boosted decision trees (binary logistic objective)."""
from .binning import BinMapper, bin_features
from .booster import GBDTModel, GBDTParams, Tree, feature_importance, predict, train
from .loss import logloss, logloss_grad_hess, sigmoid
from .split import SplitInfo, best_split, split_gain

__all__ = [
    "BinMapper",
    "GBDTModel",
    "GBDTParams",
    "SplitInfo",
    "Tree",
    "best_split",
    "bin_features",
    "feature_importance",
    "logloss",
    "logloss_grad_hess",
    "predict",
    "sigmoid",
    "split_gain",
    "train",
]
