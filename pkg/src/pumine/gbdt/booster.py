"""Histogram gradient-boosted trees for binary classification.

Trees grow leaf-wise: the leaf with the largest split gain is split next
until ``max_leaves`` is reached or no split has positive gain. Leaf values
already include the learning rate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import _kernels, docio
from ..errors import DataError
from .binning import BinMapper, bin_features
from .loss import logloss, logloss_grad_hess, sigmoid
from .split import find_split

MODEL_KIND = "gbdt_model"


@dataclass(frozen=True)
class GBDTParams:
    num_trees: int = 100
    learning_rate: float = 0.1
    max_leaves: int = 31
    min_data_in_leaf: int = 20
    min_child_hessian: float = 1e-3
    lambda_l2: float = 1.0
    gamma: float = 0.0
    max_bins: int = 255
    feature_fraction: float = 1.0
    bagging_fraction: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.num_trees < 0:
            raise ValueError("num_trees must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_leaves < 2:
            raise ValueError("max_leaves must be >= 2")
        if self.min_data_in_leaf < 1:
            raise ValueError("min_data_in_leaf must be >= 1")
        if self.min_child_hessian < 0 or self.lambda_l2 < 0 or self.gamma < 0:
            raise ValueError("min_child_hessian, lambda_l2 and gamma must be >= 0")
        if not 2 <= self.max_bins <= 65535:
            raise ValueError("max_bins must be in [2, 65535]")
        for name in ("feature_fraction", "bagging_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1]")

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return GBDTParams(**d)


@dataclass(frozen=True, eq=False)
class Tree:
    """Node-parallel arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    missing_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray
    count: np.ndarray

    @property
    def n_leaves(self):
        return int(np.sum(self.feature < 0))

    def to_dict(self):
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "missing_left": self.missing_left.astype(bool),
            "left": self.left,
            "right": self.right,
            "value": self.value,
            "gain": self.gain,
            "count": self.count,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.asarray(d["feature"], dtype=np.int32),
            np.asarray(d["threshold"], dtype=np.int32),
            np.asarray(d["missing_left"], dtype=np.uint8),
            np.asarray(d["left"], dtype=np.int32),
            np.asarray(d["right"], dtype=np.int32),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["gain"], dtype=np.float64),
            np.asarray(d["count"], dtype=np.int64),
        )

    def same_structure(self, other):
        return all(
            np.array_equal(getattr(self, k), getattr(other, k))
            for k in ("feature", "threshold", "missing_left", "left", "right", "count")
        )


@dataclass(frozen=True, eq=False)
class GBDTModel:
    params: GBDTParams
    mapper: BinMapper
    base_score: float
    trees: tuple
    feature_names: tuple
    train_loss: tuple = field(default=(), compare=False)

    @property
    def n_features(self):
        return self.mapper.n_features

    def to_dict(self):
        return {
            "params": asdict(self.params),
            "bins": self.mapper.to_dict(),
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "feature_names": list(self.feature_names),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            GBDTParams(**d["params"]),
            BinMapper.from_dict(d["bins"]),
            float(d["base_score"]),
            tuple(Tree.from_dict(t) for t in d["trees"]),
            tuple(d["feature_names"]),
        )

    def save(self, path):
        docio.save(path, MODEL_KIND, self.to_dict())

    @classmethod
    def load(cls, path):
        return cls.from_dict(docio.load(path, MODEL_KIND))


def check_labels(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2:
        raise DataError("design matrix must be 2-D")
    if X.shape[0] != y.shape[0]:
        raise DataError(f"{X.shape[0]} rows but {y.shape[0]} labels")
    if not np.isin(y, (0, 1)).all():
        raise DataError("labels must be 0 or 1")
    y = y.astype(np.float64)
    if y.min() == y.max():
        raise DataError("labels contain a single class")
    return X, y


class _TreeBuilder:
    """Leaf-wise growth of one tree on binned data."""

    def __init__(self, binned, n_bins, g, h, params, features):
        self.binned = binned
        self.n_bins = n_bins
        self.g = g
        self.h = h
        self.p = params
        self.features = features
        self.width = int(n_bins.max()) + 1
        self.offsets = np.arange(binned.shape[0] + 1, dtype=np.int64) * self.width
        self.nodes = []  # [feature, threshold, missing_left, left, right, G, H, count, gain]

    def _new_node(self, rows):
        G = float(np.sum(self.g[rows]))
        H = float(np.sum(self.h[rows]))
        self.nodes.append([-1, 0, 0, -1, -1, G, H, len(rows), 0.0])
        return len(self.nodes) - 1

    def _find(self, node, rows):
        p = self.p
        if len(rows) < 2 * p.min_data_in_leaf:
            return None
        G, H, C = _kernels.build_histograms(self.binned, rows, self.features, self.offsets, self.g, self.h)
        F = self.binned.shape[0]
        G = G.reshape(F, self.width)[self.features]
        H = H.reshape(F, self.width)[self.features]
        C = C.reshape(F, self.width)[self.features]
        _, _, _, _, _, Gt, Ht, Ct, _ = self.nodes[node]
        return find_split(
            G, H, C, self.n_bins[self.features], self.features, (Gt, Ht, Ct),
            p.lambda_l2, p.gamma, p.min_data_in_leaf, p.min_child_hessian,
        )

    def grow(self, rows):
        p = self.p
        root = self._new_node(rows)
        pending = {root: (self._find(root, rows), rows)}
        n_leaves = 1
        while n_leaves < p.max_leaves:
            best_node, best = None, None
            for node in sorted(pending):
                s = pending[node][0]
                if s is not None and (best is None or s.gain > best.gain):
                    best_node, best = node, s
            if best is None:
                break
            _, node_rows = pending.pop(best_node)
            col = self.binned[best.feature, node_rows]
            go_left = np.where(col == 0, best.missing_left, col <= best.threshold)
            lrows, rrows = node_rows[go_left], node_rows[~go_left]
            left, right = self._new_node(lrows), self._new_node(rrows)
            rec = self.nodes[best_node]
            rec[0], rec[1], rec[2], rec[3], rec[4], rec[8] = (
                best.feature, best.threshold, int(best.missing_left), left, right, best.gain,
            )
            n_leaves += 1
            if n_leaves < p.max_leaves:
                pending[left] = (self._find(left, lrows), lrows)
                pending[right] = (self._find(right, rrows), rrows)
        return self._finish()

    def _finish(self):
        nodes = self.nodes
        lr = self.p.learning_rate
        lam = self.p.lambda_l2
        value = np.array(
            [-lr * n[5] / (n[6] + lam) if n[0] < 0 else 0.0 for n in nodes], dtype=np.float64
        )
        return Tree(
            feature=np.array([n[0] for n in nodes], dtype=np.int32),
            threshold=np.array([n[1] for n in nodes], dtype=np.int32),
            missing_left=np.array([n[2] for n in nodes], dtype=np.uint8),
            left=np.array([n[3] for n in nodes], dtype=np.int32),
            right=np.array([n[4] for n in nodes], dtype=np.int32),
            value=value,
            gain=np.array([n[8] for n in nodes], dtype=np.float64),
            count=np.array([n[7] for n in nodes], dtype=np.int64),
        )


def train(params: GBDTParams, X, y, feature_names=None) -> GBDTModel:
    """Fit a boosted ensemble on a dense matrix (NaN = missing) and 0/1 labels."""
    X, y = check_labels(X, y)
    n, F = X.shape
    if feature_names is None:
        feature_names = tuple(f"f{i}" for i in range(F))
    if len(feature_names) != F:
        raise DataError("feature_names length does not match matrix width")
    mapper, binned = bin_features(X, params.max_bins, params.seed)
    n_bins = mapper.n_bins
    pbar = float(y.mean())
    base = math.log(pbar / (1.0 - pbar))
    raw = np.full(n, base)
    rng = np.random.default_rng(params.seed)
    all_rows = np.arange(n, dtype=np.int64)
    all_feats = np.arange(F, dtype=np.int64)
    trees = []
    losses = [logloss(raw, y)]
    for _ in range(params.num_trees):
        g, h = logloss_grad_hess(raw, y)
        rows = all_rows
        if params.bagging_fraction < 1.0:
            m = max(1, math.ceil(params.bagging_fraction * n))
            rows = np.sort(rng.choice(n, m, replace=False)).astype(np.int64)
        feats = all_feats
        if params.feature_fraction < 1.0:
            m = max(1, math.ceil(params.feature_fraction * F))
            feats = np.sort(rng.choice(F, m, replace=False)).astype(np.int64)
        tree = _TreeBuilder(binned, n_bins, g, h, params, feats).grow(rows)
        trees.append(tree)
        raw = raw + _kernels.tree_leaf_values(binned, tree)
        losses.append(logloss(raw, y))
    return GBDTModel(params, mapper, base, tuple(trees), tuple(feature_names), tuple(losses))


def predict(model: GBDTModel, X, raw=False):
    """Probability (or log-odds with ``raw=True``) for every row of ``X``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DataError(f"model expects {model.n_features} features, got matrix of shape {X.shape}")
    binned = model.mapper.transform(X)
    score = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        score = score + _kernels.tree_leaf_values(binned, tree)
    return score if raw else sigmoid(score)


def feature_importance(model: GBDTModel, kind="gain"):
    """Total split gain (``"gain"``) or number of splits (``"split_count"``) per feature."""
    if kind not in ("gain", "split_count"):
        raise ValueError(f"unknown importance kind {kind!r}")
    out = np.zeros(model.n_features)
    for t in model.trees:
        internal = t.feature >= 0
        w = t.gain[internal] if kind == "gain" else np.ones(int(internal.sum()))
        np.add.at(out, t.feature[internal], w)
    return out
