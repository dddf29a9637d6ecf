"""Comparison classifiers: Gaussian naive Bayes, a gini decision tree, a
random forest of those trees, and L2-regularized logistic regression.

All take the same dense design matrix as the boosted trees (NaN marks a
missing cell) and return positive-class probabilities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, docio
from .errors import DataError, NumericError
from .gbdt.binning import BinMapper, bin_features
from .gbdt.booster import Tree, check_labels
from .gbdt.loss import sigmoid

BASELINE_KIND = "baseline_model"


# ------------------------------------------------------------ naive Bayes


@dataclass(frozen=True, eq=False)
class NaiveBayesModel:
    prior: np.ndarray  # (2,) class frequencies
    mean: np.ndarray  # (2, F)
    var: np.ndarray  # (2, F), floored
    usable: np.ndarray  # (F,) both classes have observed values

    kind = "naive_bayes"

    def to_dict(self):
        return {"prior": self.prior, "mean": self.mean, "var": self.var, "usable": self.usable}

    @classmethod
    def from_dict(cls, d):
        return cls(*(np.asarray(d[k], dtype=float) for k in ("prior", "mean", "var")),
                   np.asarray(d["usable"], dtype=bool))


def nb_train(X, y, var_smoothing=1e-9) -> NaiveBayesModel:
    X, y = check_labels(X, y)
    F = X.shape[1]
    obs = ~np.isnan(X)
    with np.errstate(invalid="ignore", divide="ignore"):
        all_var = np.nanvar(np.where(obs, X, np.nan), axis=0) if X.shape[0] else np.zeros(F)
    all_var = np.nan_to_num(all_var, nan=0.0)
    floor = var_smoothing * float(all_var.max()) if F else 0.0
    if floor <= 0.0:
        floor = var_smoothing
    mean = np.zeros((2, F))
    var = np.full((2, F), floor)
    usable = np.ones(F, dtype=bool)
    prior = np.array([np.mean(y == 0), np.mean(y == 1)])
    for c in (0, 1):
        Xc = X[y == c]
        oc = obs[y == c]
        cnt = oc.sum(axis=0)
        usable &= cnt > 0
        safe = np.maximum(cnt, 1)
        mu = np.where(oc, Xc, 0.0).sum(axis=0) / safe
        dev = np.where(oc, Xc - mu, 0.0)
        mean[c] = mu
        var[c] = np.maximum((dev * dev).sum(axis=0) / safe, floor)
    return NaiveBayesModel(prior, mean, var, usable)


def nb_predict(model: NaiveBayesModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.mean.shape[1]:
        raise DataError("width mismatch for naive Bayes model")
    obs = ~np.isnan(X) & model.usable
    Xz = np.where(obs, X, 0.0)
    logp = []
    for c in (0, 1):
        ll = -0.5 * np.log(2.0 * np.pi * model.var[c]) - (Xz - model.mean[c]) ** 2 / (2.0 * model.var[c])
        logp.append(math.log(model.prior[c]) + np.where(obs, ll, 0.0).sum(axis=1))
    return np.exp(logp[1] - np.logaddexp(logp[0], logp[1]))


# ----------------------------------------------------------- gini trees


def _gini(P, W):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(W > 0, 2.0 * P * (W - P) / W, 0.0)


def _gini_split(Pb, Wb, n_bins, Pt, Wt, min_leaf):
    """Best (row, threshold, missing_left, decrease) over padded histograms."""
    nf, width = Pb.shape
    if width < 2:
        return None
    PLc = np.cumsum(Pb[:, 1:], axis=1)
    WLc = np.cumsum(Wb[:, 1:], axis=1)
    PL = np.stack([PLc + Pb[:, :1], PLc], axis=2)
    WL = np.stack([WLc + Wb[:, :1], WLc], axis=2)
    PR = Pt - PL
    WR = Wt - WL
    ok = (np.arange(1, width)[None, :] <= np.asarray(n_bins)[:, None])[:, :, None]
    ok = ok & (WL >= min_leaf) & (WR >= min_leaf)
    if not ok.any():
        return None
    dec = float(_gini(np.array(Pt), np.array(Wt))) - _gini(PL, WL) - _gini(PR, WR)
    dec = np.where(ok, dec, -np.inf)
    best = int(np.argmax(dec))
    k, t, d = np.unravel_index(best, dec.shape)
    if not dec[k, t, d] > 1e-12 * Wt:
        return None
    return int(k), int(t) + 1, bool(d == 0), float(dec[k, t, d])


def _grow_gini_tree(binned, n_bins, y, w, rows, max_depth, min_leaf, max_features, rng):
    F = binned.shape[0]
    width = int(n_bins.max()) + 1
    offsets = np.arange(F + 1, dtype=np.int64) * width
    g = w * y
    nodes = []  # [feature, threshold, missing_left, left, right, value, gain, count]
    all_feats = np.arange(F, dtype=np.int64)

    def new(node_rows):
        P = float(np.sum(g[node_rows]))
        W = float(np.sum(w[node_rows]))
        nodes.append([-1, 0, 0, -1, -1, P / W if W > 0 else 0.0, 0.0, len(node_rows), P, W])
        return len(nodes) - 1

    queue = [(new(rows), rows, 0)]
    while queue:
        nxt = []
        for node, node_rows, depth in queue:
            rec = nodes[node]
            P, W = rec[8], rec[9]
            if depth >= max_depth or W < 2 * min_leaf or P <= 0.0 or P >= W:
                continue
            feats = all_feats
            if max_features < F:
                feats = np.sort(rng.choice(F, max_features, replace=False)).astype(np.int64)
            Gh, Hh, _ = _kernels.build_histograms(binned, node_rows, feats, offsets, g, w)
            Pb = Gh.reshape(F, width)[feats]
            Wb = Hh.reshape(F, width)[feats]
            found = _gini_split(Pb, Wb, n_bins[feats], P, W, min_leaf)
            if found is None:
                continue
            k, t, ml, dec = found
            f = int(feats[k])
            col = binned[f, node_rows]
            go_left = np.where(col == 0, ml, col <= t)
            lrows, rrows = node_rows[go_left], node_rows[~go_left]
            left, right = new(lrows), new(rrows)
            rec[0], rec[1], rec[2], rec[3], rec[4], rec[6] = f, t, int(ml), left, right, dec
            nxt += [(left, lrows, depth + 1), (right, rrows, depth + 1)]
        queue = nxt
    return Tree(
        feature=np.array([n[0] for n in nodes], dtype=np.int32),
        threshold=np.array([n[1] for n in nodes], dtype=np.int32),
        missing_left=np.array([n[2] for n in nodes], dtype=np.uint8),
        left=np.array([n[3] for n in nodes], dtype=np.int32),
        right=np.array([n[4] for n in nodes], dtype=np.int32),
        value=np.array([n[5] for n in nodes], dtype=np.float64),
        gain=np.array([n[6] for n in nodes], dtype=np.float64),
        count=np.array([n[7] for n in nodes], dtype=np.int64),
    )


@dataclass(frozen=True, eq=False)
class ForestModel:
    """A list of gini trees; a single decision tree is a forest of one."""

    mapper: BinMapper
    trees: tuple
    seeds: tuple
    kind: str = "random_forest"

    def to_dict(self):
        return {"bins": self.mapper.to_dict(), "trees": [t.to_dict() for t in self.trees],
                "seeds": list(self.seeds), "tree_kind": self.kind}

    @classmethod
    def from_dict(cls, d):
        return cls(BinMapper.from_dict(d["bins"]), tuple(Tree.from_dict(t) for t in d["trees"]),
                   tuple(d["seeds"]), d["tree_kind"])


def _max_features(spec, F):
    if spec == "sqrt":
        return max(1, math.ceil(math.sqrt(F)))
    if spec is None:
        return F
    if isinstance(spec, float):
        if not 0.0 < spec <= 1.0:
            raise ValueError("feature_fraction must be in (0, 1]")
        return max(1, math.ceil(spec * F))
    return max(1, min(F, int(spec)))


def forest_train(X, y, num_trees=200, feature_fraction="sqrt", bootstrap=True, max_depth=8, min_leaf=20,
                 max_bins=255, seed=0) -> ForestModel:
    """Bootstrap rows per tree, subsample features per split, average leaf fractions."""
    X, y = check_labels(X, y)
    if num_trees < 1:
        raise ValueError("num_trees must be >= 1")
    n, F = X.shape
    mapper, binned = bin_features(X, max_bins, seed)
    n_bins = mapper.n_bins
    m = _max_features(feature_fraction, F)
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(num_trees)]
    trees = []
    for s in seeds:
        rng = np.random.default_rng(s)
        if bootstrap:
            w = np.bincount(rng.integers(0, n, n), minlength=n).astype(np.float64)
        else:
            w = np.ones(n)
        rows = np.flatnonzero(w > 0).astype(np.int64)
        trees.append(_grow_gini_tree(binned, n_bins, y, w, rows, max_depth, min_leaf, m, rng))
    return ForestModel(mapper, tuple(trees), tuple(seeds))


def forest_predict(model: ForestModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.mapper.n_features:
        raise DataError("width mismatch for tree model")
    binned = model.mapper.transform(X)
    acc = np.zeros(X.shape[0])
    for t in model.trees:
        acc = acc + _kernels.tree_leaf_values(binned, t)
    return acc / len(model.trees)


def tree_train(X, y, max_depth=8, min_leaf=20, max_bins=255) -> ForestModel:
    """Depth-wise gini tree over histogram bins; leaves hold the positive fraction."""
    model = forest_train(X, y, num_trees=1, feature_fraction=None, bootstrap=False,
                         max_depth=max_depth, min_leaf=min_leaf, max_bins=max_bins, seed=0)
    return ForestModel(model.mapper, model.trees, model.seeds, "decision_tree")


tree_predict = forest_predict


# ---------------------------------------------------- logistic regression


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    bias: float
    center: np.ndarray
    scale: np.ndarray
    loss_history: tuple = ()

    kind = "logistic_regression"

    def to_dict(self):
        return {"weights": self.weights, "bias": self.bias, "center": self.center, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["weights"], float), float(d["bias"]),
                   np.asarray(d["center"], float), np.asarray(d["scale"], float))


def _standardize(X, center, scale):
    Z = (X - center) / scale
    return np.where(np.isnan(Z), 0.0, Z)


def lr_loss_grad(w, b, Z, y, l2):
    """Mean logistic loss plus ``l2/2 * |w|^2`` and its gradient ``(dw, db)``."""
    z = Z @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z)) + 0.5 * l2 * float(w @ w)
    r = sigmoid(z) - y
    return loss, Z.T @ r / len(y) + l2 * w, float(np.mean(r))


def lr_train(X, y, l2=1e-4, lr=0.1, iters=500) -> LogisticModel:
    """Full-batch gradient descent on standardized features; the step halves whenever loss would rise."""
    X, y = check_labels(X, y)
    with np.errstate(invalid="ignore"):
        center = np.nan_to_num(np.nanmean(X, axis=0), nan=0.0) if X.size else np.zeros(X.shape[1])
        scale = np.nan_to_num(np.nanstd(X, axis=0), nan=0.0) if X.size else np.ones(X.shape[1])
    scale = np.where(scale > 0, scale, 1.0)
    Z = _standardize(X, center, scale)
    w = np.zeros(X.shape[1])
    b = 0.0
    loss, dw, db = lr_loss_grad(w, b, Z, y, l2)
    history = [loss]
    step = lr
    for _ in range(iters):
        for _halving in range(60):
            w_new = w - step * dw
            b_new = b - step * db
            new_loss, ndw, ndb = lr_loss_grad(w_new, b_new, Z, y, l2)
            if new_loss <= loss:
                break
            step *= 0.5
        else:
            break
        w, b, loss, dw, db = w_new, b_new, new_loss, ndw, ndb
        history.append(loss)
    if not np.all(np.isfinite(w)):
        raise NumericError("logistic regression diverged")
    return LogisticModel(w, b, center, scale, tuple(history))


def lr_predict(model: LogisticModel, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.weights.shape[0]:
        raise DataError("width mismatch for logistic model")
    return sigmoid(_standardize(X, model.center, model.scale) @ model.weights + model.bias)


# ---------------------------------------------------------- persistence

_MODEL_TYPES = {"naive_bayes": NaiveBayesModel, "logistic_regression": LogisticModel}


def save_model(model, path):
    docio.save(path, BASELINE_KIND, {"model_kind": model.kind, "model": model.to_dict()})


def load_model(path):
    doc = docio.load(path, BASELINE_KIND)
    kind = doc["model_kind"]
    if kind in ("decision_tree", "random_forest"):
        return ForestModel.from_dict(doc["model"])
    return _MODEL_TYPES[kind].from_dict(doc["model"])
