"""Metrics, stratified cross-validation, adversarial validation and
single-feature CV filtering."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.stats import rankdata

from . import gbdt
from .errors import DataError


class UndefinedMetricError(DataError):
    pass


def auc(scores, labels) -> float:
    """ROC AUC as the Mann-Whitney statistic, ties counted as one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape:
        raise DataError("scores and labels differ in length")
    if np.isnan(s).any():
        raise DataError("scores contain NaN")
    pos = y == 1
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetricError("AUC needs both classes")
    ranks = rankdata(s, method="average")
    u = float(np.sum(ranks[pos])) - n1 * (n1 + 1) / 2.0
    return u / (n1 * n0)


def f1(predictions, labels):
    """``(precision, recall, f1)``; any undefined ratio is 0."""
    p = np.asarray(predictions).astype(bool)
    y = np.asarray(labels).astype(bool)
    tp = int(np.sum(p & y))
    fp = int(np.sum(p & ~y))
    fn = int(np.sum(~p & y))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    score = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, score


def derive_seeds(seed, n):
    """``n`` independent integer seeds from one master seed."""
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def stratified_kfold(labels, k=5, seed=0):
    """Fold index per row: seeded shuffle within each class, then round-robin."""
    y = np.asarray(labels)
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    folds = np.empty(y.size, dtype=np.int64)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        if idx.size < k:
            raise DataError(f"class {cls!r} has {idx.size} rows, fewer than k={k}")
        idx = rng.permutation(idx)
        folds[idx] = np.arange(idx.size) % k
    return folds


# ---------------------------------------------------------------- learners


@dataclass(frozen=True)
class Learner:
    """A named ``fit(X, y, seed) -> model`` / ``predict(model, X) -> p`` pair."""

    name: str
    fit: Callable
    predict: Callable


def gbdt_learner(params: gbdt.GBDTParams | None = None, name="gbdt") -> Learner:
    params = params or gbdt.GBDTParams()
    return Learner(
        name,
        lambda X, y, seed: gbdt.train(params.replace(seed=seed), X, y),
        gbdt.predict,
    )


def make_learner(name: str, params: dict | None = None) -> Learner:
    """Learner by name: gbdt, naive_bayes, decision_tree, random_forest, logistic_regression."""
    from . import baselines

    params = dict(params or {})
    if name == "gbdt":
        return gbdt_learner(gbdt.GBDTParams(**params))
    if name == "naive_bayes":
        return Learner(name, lambda X, y, seed: baselines.nb_train(X, y, **params), baselines.nb_predict)
    if name == "decision_tree":
        return Learner(name, lambda X, y, seed: baselines.tree_train(X, y, **params), baselines.tree_predict)
    if name == "random_forest":
        return Learner(name, lambda X, y, seed: baselines.forest_train(X, y, seed=seed, **params),
                       baselines.forest_predict)
    if name == "logistic_regression":
        return Learner(name, lambda X, y, seed: baselines.lr_train(X, y, **params), baselines.lr_predict)
    raise ValueError(f"unknown learner {name!r}")


LEARNER_NAMES = ("gbdt", "naive_bayes", "decision_tree", "random_forest", "logistic_regression")


# ------------------------------------------------------------ cross-validation


@dataclass
class FoldResult:
    train_auc: float
    val_auc: float
    precision: float
    recall: float
    f1: float


@dataclass
class CVReport:
    learner: str
    folds: list

    @property
    def mean_train_auc(self):
        return float(np.mean([f.train_auc for f in self.folds]))

    @property
    def mean_val_auc(self):
        return float(np.mean([f.val_auc for f in self.folds]))

    @property
    def mean_f1(self):
        return float(np.mean([f.f1 for f in self.folds]))

    def to_dict(self):
        return {
            "learner": self.learner,
            "folds": [f.__dict__ for f in self.folds],
            "mean_train_auc": self.mean_train_auc,
            "mean_val_auc": self.mean_val_auc,
            "mean_f1": self.mean_f1,
        }


def cross_validate(learner: Learner, X, y, k=5, seed=0, folds=None) -> CVReport:
    """Refit ``learner`` from scratch on every fold; F1 thresholds at 0.5."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if folds is None:
        folds = stratified_kfold(y, k, seed)
    results = []
    for fold, fold_seed in zip(range(k), derive_seeds(seed, k)):
        val = folds == fold
        tr = ~val
        model = learner.fit(X[tr], y[tr], fold_seed)
        p_tr = learner.predict(model, X[tr])
        p_val = learner.predict(model, X[val])
        prec, rec, f = f1(p_val >= 0.5, y[val])
        results.append(FoldResult(auc(p_tr, y[tr]), auc(p_val, y[val]), prec, rec, f))
    return CVReport(learner.name, results)


# ------------------------------------------------------- adversarial validation


@dataclass
class AdversarialReport:
    mean_auc: float
    fold_aucs: list
    importance: list  # summed gain importance per feature
    ranking: list  # feature indices, most drift first
    feature_names: list
    drop_trace: list = field(default_factory=list)  # (feature name, mean AUC after dropping)

    @property
    def top_feature(self):
        return self.feature_names[self.ranking[0]]

    def to_dict(self):
        return {
            "mean_auc": self.mean_auc,
            "fold_aucs": self.fold_aucs,
            "importance": self.importance,
            "ranking": [self.feature_names[i] for i in self.ranking],
            "drop_trace": [list(t) for t in self.drop_trace],
        }


def _stack_adversarial(train, test):
    train = np.asarray(train, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if train.ndim != 2 or test.ndim != 2 or train.shape[1] != test.shape[1]:
        raise DataError(f"train and test widths differ: {train.shape} vs {test.shape}")
    X = np.vstack([train, test])
    y = np.concatenate([np.ones(train.shape[0], np.int64), np.zeros(test.shape[0], np.int64)])
    return X, y


def adversarial_validation(train, test, params: gbdt.GBDTParams | None = None, k=5, seed=0,
                           feature_names=None) -> AdversarialReport:
    """Train-vs-test classifier: label train rows 1, test rows 0, k-fold AUC."""
    params = params or gbdt.GBDTParams()
    X, y = _stack_adversarial(train, test)
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(X.shape[1])]
    folds = stratified_kfold(y, k, seed)
    aucs = []
    imp = np.zeros(X.shape[1])
    for fold, fold_seed in zip(range(k), derive_seeds(seed, k)):
        val = folds == fold
        model = gbdt.train(params.replace(seed=fold_seed), X[~val], y[~val])
        aucs.append(auc(gbdt.predict(model, X[val]), y[val]))
        imp += gbdt.feature_importance(model, "gain")
    ranking = [int(i) for i in np.argsort(-imp, kind="stable")]
    return AdversarialReport(float(np.mean(aucs)), aucs, imp.tolist(), ranking, names)


def adversarial_drop(train, test, params: gbdt.GBDTParams | None = None, auc_target=0.6, max_drops=None,
                     k=5, seed=0, feature_names=None) -> AdversarialReport:
    """Drop the top drift feature and re-run until mean AUC <= ``auc_target``.

    The returned report describes the starting feature set; its
    ``drop_trace`` lists every drop with the mean AUC measured after it.
    """
    train = np.asarray(train, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(train.shape[1])]
    if max_drops is None:
        max_drops = train.shape[1] - 1
    first = adversarial_validation(train, test, params, k, seed, names)
    report, keep, trace = first, list(range(train.shape[1])), []
    while report.mean_auc > auc_target and len(trace) < max_drops and len(keep) > 1:
        victim = keep[report.ranking[0]]
        keep = [j for j in keep if j != victim]
        report = adversarial_validation(train[:, keep], test[:, keep], params, k, seed, [names[j] for j in keep])
        trace.append((names[victim], report.mean_auc))
    first.drop_trace = trace
    return first


# ------------------------------------------------------- single-feature CV


SINGLE_FEATURE_PARAMS = gbdt.GBDTParams(num_trees=20, max_leaves=4)


@dataclass
class FeatureCv:
    name: str
    train_auc: float
    val_auc: float
    keep: bool

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class FeatureCvReport:
    threshold: float
    features: list

    @property
    def kept(self):
        return [f.name for f in self.features if f.keep]

    @property
    def dropped(self):
        return [f.name for f in self.features if not f.keep]


def single_feature_cv(X, y, k=5, threshold=0.5, seed=0, names=None, params=SINGLE_FEATURE_PARAMS) -> FeatureCvReport:
    """Cross-validate a small GBDT on each column alone; drop when val AUC <= threshold."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    names = list(names) if names is not None else [f"f{i}" for i in range(X.shape[1])]
    folds = stratified_kfold(y, k, seed)
    learner = gbdt_learner(params)
    out = []
    for j, name in enumerate(names):
        rep = cross_validate(learner, X[:, [j]], y, k, seed, folds=folds)
        out.append(FeatureCv(name, rep.mean_train_auc, rep.mean_val_auc, rep.mean_val_auc > threshold))
    return FeatureCvReport(threshold, out)
