"""Quantile histogram binning.

Bin 0 is reserved for missing values. ``edges`` are the fitted upper bin
boundaries, taken from the training values themselves. Routing uses
``cuts``, each the midpoint between an edge and the next larger training
value, so training rows fall in the same bins either way while an unseen
value in a gap goes to whichever side it is closer to. Finite values land
in bins ``1..n_bins`` where bin ``b`` holds values in ``(cuts[b-2], cuts[b-1]]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

MAX_BINS_LIMIT = 65535
SUBSAMPLE_ROWS = 1_000_000


def _feature_edges(values, max_bins):
    distinct = np.unique(values[~np.isnan(values)])
    m = distinct.size
    if m <= max_bins:
        return distinct[:-1].copy()
    # nearest-rank quantiles of the distinct values; ranks strictly increase since m > max_bins
    ranks = -(-np.arange(1, max_bins, dtype=np.int64) * m // max_bins)
    return distinct[ranks - 1]


def _feature_cuts(values, edges):
    """Midpoints between each edge and the next distinct value above it."""
    distinct = np.unique(values[~np.isnan(values)])
    nxt = distinct[np.searchsorted(distinct, edges, side="right")]
    with np.errstate(over="ignore"):
        mid = 0.5 * edges + 0.5 * nxt
    # adjacent doubles or overflow: fall back to the edge itself
    return np.where((mid >= edges) & (mid < nxt), mid, edges)


@dataclass(frozen=True, eq=False)
class BinMapper:
    edges: tuple  # one ascending float64 array per feature
    cuts: tuple = None  # routing thresholds, defaults to the edges

    def __post_init__(self):
        edges = tuple(np.asarray(e, dtype=np.float64) for e in self.edges)
        cuts = edges if self.cuts is None else tuple(np.asarray(c, dtype=np.float64) for c in self.cuts)
        if len(cuts) != len(edges) or any(c.shape != e.shape for c, e in zip(cuts, edges)):
            raise ValueError("cuts and edges differ in shape")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "cuts", cuts)

    @property
    def n_features(self):
        return len(self.edges)

    @property
    def n_bins(self):
        """Value bins per feature (bin 0 excluded)."""
        return np.array([len(e) + 1 for e in self.edges], dtype=np.int64)

    @property
    def offsets(self):
        """Start of each feature's block in a flat histogram (bin 0 included)."""
        return np.concatenate([[0], np.cumsum(self.n_bins + 1)]).astype(np.int64)

    def transform(self, X):
        """Bin a row-major ``(n, F)`` float matrix into a ``(F, n)`` uint16 array."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got shape {X.shape}")
        out = np.zeros((self.n_features, X.shape[0]), dtype=np.uint16)
        for f, e in enumerate(self.cuts):
            col = X[:, f]
            nan = np.isnan(col)
            b = np.searchsorted(e, col, side="left") + 1
            b[nan] = 0
            out[f] = b
        return out

    def to_dict(self):
        return {"edges": [e.tolist() for e in self.edges], "cuts": [c.tolist() for c in self.cuts]}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["edges"]), tuple(d["cuts"]))


def bin_features(X, max_bins=255, seed=0):
    """Fit bin edges on ``X`` and return ``(mapper, binned)``.

    Features with at most ``max_bins`` distinct values get one bin per value.
    Above one million rows the edges are estimated on a seeded row sample.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError("bin_features needs a non-empty 2-D matrix")
    if not 2 <= max_bins <= MAX_BINS_LIMIT:
        raise ValueError(f"max_bins must be in [2, {MAX_BINS_LIMIT}]")
    sample = X
    if X.shape[0] > SUBSAMPLE_ROWS:
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(X.shape[0], SUBSAMPLE_ROWS, replace=False))
        sample = X[rows]
    edges = tuple(_feature_edges(sample[:, f], max_bins) for f in range(X.shape[1]))
    cuts = tuple(_feature_cuts(sample[:, f], e) for f, e in enumerate(edges))
    mapper = BinMapper(edges, cuts)
    return mapper, mapper.transform(X)
