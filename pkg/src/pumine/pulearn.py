"""Positive-unlabeled learning and top-K candidate ranking.

Two schemes are provided. ``bagging_pu`` repeatedly contrasts the
positives with a random draw of unlabeled rows and averages out-of-bag
scores. ``spy_two_step`` plants some positives in the unlabeled pool,
derives reliable negatives from how the spies score, and retrains against
those. ``calibrate_prior`` estimates the label frequency ``c`` under the
selected-completely-at-random assumption.
"""
from __future__ import annotations

import csv
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, gbdt
from .dataset import nearest_rank
from .errors import DataError
from .evaluation import derive_seeds

C_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class PUDataset:
    positives: np.ndarray
    positive_ids: np.ndarray
    unlabeled: np.ndarray
    unlabeled_ids: np.ndarray
    feature_names: tuple = ()

    def __post_init__(self):
        P = np.asarray(self.positives, dtype=np.float64)
        U = np.asarray(self.unlabeled, dtype=np.float64)
        if P.ndim != 2 or U.ndim != 2 or P.shape[1] != U.shape[1]:
            raise DataError(f"positives and unlabeled differ in width: {P.shape} vs {U.shape}")
        pid = np.asarray(self.positive_ids).astype(str)
        uid = np.asarray(self.unlabeled_ids).astype(str)
        if pid.shape[0] != P.shape[0] or uid.shape[0] != U.shape[0]:
            raise DataError("id arrays do not match matrix rows")
        overlap = np.intersect1d(pid, uid)
        if overlap.size:
            raise DataError(f"ids present in both positives and unlabeled, e.g. {overlap[0]!r}")
        object.__setattr__(self, "positives", P)
        object.__setattr__(self, "unlabeled", U)
        object.__setattr__(self, "positive_ids", pid)
        object.__setattr__(self, "unlabeled_ids", uid)

    @classmethod
    def from_labels(cls, X, ids, observed, feature_names=()):
        """Split one matrix by observed PU labels (1 = labeled positive)."""
        X = np.asarray(X, dtype=np.float64)
        ids = np.asarray(ids)
        s = np.asarray(observed).astype(bool)
        return cls(X[s], ids[s], X[~s], ids[~s], tuple(feature_names))


@dataclass
class PUResult:
    ids: np.ndarray
    scores: np.ndarray
    oob_rounds: np.ndarray
    fallback: np.ndarray  # row scored by in-bag models only
    method: str
    c: float | None = None
    warnings: list = field(default_factory=list)
    ranking: np.ndarray = None
    spy_threshold: float | None = None
    reliable_negatives: np.ndarray | None = None

    def __post_init__(self):
        if self.ranking is None:
            self.ranking = rank_order(self.ids, self.scores)

    @property
    def ranked_ids(self):
        return self.ids[self.ranking]

    def calibrated(self):
        """Scores rescaled by the label frequency ``c``, capped at 1."""
        if self.c is None:
            raise ValueError("no calibration constant; run calibrate_prior first")
        return np.minimum(1.0, self.scores / self.c)

    def to_dict(self):
        return {
            "method": self.method,
            "c": self.c,
            "warnings": list(self.warnings),
            "n_unlabeled": int(self.ids.size),
            "n_fallback": int(self.fallback.sum()),
            "rows": [
                {"id": str(self.ids[i]), "score": float(self.scores[i]), "oob_rounds": int(self.oob_rounds[i]),
                 "fallback": bool(self.fallback[i])}
                for i in self.ranking
            ],
        }


def rank_order(ids, scores):
    """Row order by score descending, then id ascending."""
    ids = np.asarray(ids).astype(str)
    return np.lexsort((ids, -np.asarray(scores, dtype=np.float64)))


def _check(data: PUDataset, min_pos=10):
    n_p, n_u = data.positives.shape[0], data.unlabeled.shape[0]
    if n_p < min_pos:
        raise DataError(f"need at least {min_pos} positives, got {n_p}")
    if n_u <= n_p:
        raise DataError(f"need more unlabeled rows ({n_u}) than positives ({n_p})")


def _fit_score(params, P, N, score_rows, seed):
    X = np.vstack([P, N])
    y = np.concatenate([np.ones(P.shape[0], np.int64), np.zeros(N.shape[0], np.int64)])
    model = gbdt.train(params.replace(seed=seed), X, y)
    return gbdt.predict(model, score_rows)


def bagging_pu(data: PUDataset, params: gbdt.GBDTParams | None = None, rounds=100, neg_ratio=1.0,
               seed=0) -> PUResult:
    """Average out-of-bag scores over ``rounds`` positives-vs-random-draw models."""
    _check(data)
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    params = params or gbdt.GBDTParams()
    P, U = data.positives, data.unlabeled
    n_u = U.shape[0]
    m = min(n_u, math.ceil(neg_ratio * P.shape[0]))
    seeds = derive_seeds(seed, rounds)

    def one_round(s):
        rng = np.random.default_rng(s)
        drawn = np.zeros(n_u, dtype=bool)
        drawn[rng.choice(n_u, m, replace=False)] = True
        scores = _fit_score(params, P, U[drawn], U, s)
        return drawn, scores

    threads = _kernels.get_num_threads()
    if threads > 1 and rounds > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one_round, seeds))
    else:
        results = [one_round(s) for s in seeds]

    oob_sum = np.zeros(n_u)
    oob_cnt = np.zeros(n_u, dtype=np.int64)
    inb_sum = np.zeros(n_u)
    inb_cnt = np.zeros(n_u, dtype=np.int64)
    for drawn, scores in results:  # fixed round order
        oob_sum[~drawn] += scores[~drawn]
        oob_cnt[~drawn] += 1
        inb_sum[drawn] += scores[drawn]
        inb_cnt[drawn] += 1
    fallback = oob_cnt == 0
    final = np.where(fallback, inb_sum / np.maximum(inb_cnt, 1), oob_sum / np.maximum(oob_cnt, 1))
    return PUResult(data.unlabeled_ids, final, oob_cnt, fallback, "bagging")


def spy_two_step(data: PUDataset, params: gbdt.GBDTParams | None = None, spy_frac=0.1, spy_quantile=0.05,
                 seed=0, fallback_rounds=100) -> PUResult:
    """Spy technique for reliable negatives, then positives vs reliable negatives."""
    params = params or gbdt.GBDTParams()
    P, U = data.positives, data.unlabeled
    n_p = P.shape[0]
    n_spies = int(round(spy_frac * n_p))
    if n_p * spy_frac < 5 or n_spies < 5:
        raise DataError(f"spy_frac={spy_frac} plants fewer than 5 spies among {n_p} positives")
    if n_spies >= n_p:
        raise DataError("spies would leave no training positives")
    if not 0.0 <= spy_quantile <= 1.0:
        raise ValueError("spy_quantile must be in [0, 1]")
    s1, s2 = derive_seeds(seed, 2)
    rng = np.random.default_rng(s1)
    spy = np.zeros(n_p, dtype=bool)
    spy[rng.choice(n_p, n_spies, replace=False)] = True
    mixed = np.vstack([U, P[spy]])
    step1 = _fit_score(params, P[~spy], mixed, mixed, s1)
    spy_scores = np.sort(step1[U.shape[0]:])
    threshold = nearest_rank(spy_scores, spy_quantile)
    reliable = step1[: U.shape[0]] < threshold
    if reliable.sum() < n_p:
        msg = f"only {int(reliable.sum())} reliable negatives for {n_p} positives; fell back to bagging"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        res = bagging_pu(data, params, rounds=fallback_rounds, seed=seed)
        res.method = "spy_fallback_bagging"
        res.warnings.append(msg)
        return res
    scores = _fit_score(params, P, U[reliable], U, s2)
    n_u = U.shape[0]
    return PUResult(data.unlabeled_ids, scores, np.zeros(n_u, np.int64), np.zeros(n_u, bool), "spy",
                    spy_threshold=float(threshold), reliable_negatives=reliable)


def calibrate_prior(data: PUDataset, params: gbdt.GBDTParams | None = None, holdout_frac=0.2, seed=0) -> float:
    """Label frequency ``c``: mean score of held-out positives under a
    held-in-positives vs all-unlabeled classifier, clamped to ``[1e-6, 1]``."""
    params = params or gbdt.GBDTParams()
    P, U = data.positives, data.unlabeled
    n_hold = int(round(holdout_frac * P.shape[0]))
    if n_hold < 5:
        raise DataError(f"holdout of {n_hold} positives is below the minimum of 5")
    if n_hold >= P.shape[0]:
        raise DataError("holdout leaves no training positives")
    rng = np.random.default_rng(seed)
    hold = np.zeros(P.shape[0], dtype=bool)
    hold[rng.choice(P.shape[0], n_hold, replace=False)] = True
    scores = _fit_score(params, P[~hold], U, P[hold], seed)
    return clamp_c(float(np.mean(scores)))


def clamp_c(c):
    return min(1.0, max(C_FLOOR, c))


@dataclass
class TopK:
    ids: list
    scores: list
    short_list: bool


def rank_top_k(result: PUResult, k=10000) -> TopK:
    """First ``k`` ids by (score desc, id asc); flagged when fewer rows exist."""
    if k < 1:
        raise ValueError("k must be >= 1")
    order = result.ranking[:k]
    return TopK([str(i) for i in result.ids[order]], [float(s) for s in result.scores[order]],
                k > result.ids.size)


def write_ranking(top: TopK, path):
    """``id,score,rank`` CSV, rank starting at 1."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "score", "rank"])
        for r, (i, s) in enumerate(zip(top.ids, top.scores), start=1):
            w.writerow([i, repr(s), r])
