"""Second-order split search over bin histograms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import _kernels


@dataclass(frozen=True)
class SplitInfo:
    feature: int
    threshold: int  # left side takes value bins 1..threshold
    gain: float
    missing_left: bool


def split_gain(GL, HL, GR, HR, lam, gamma):
    G, H = GL + GR, HL + HR
    return 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - G * G / (H + lam)) - gamma


def find_split(G, H, C, n_bins, features, totals, lam, gamma, min_data, min_hess):
    """Best split given padded per-feature histograms.

    ``G``, ``H``, ``C`` have shape ``(len(features), width)`` with column 0
    holding the missing bin; ``n_bins[k]`` is the number of value bins of
    ``features[k]``. Candidates are scanned in (feature, threshold,
    missing-left-first) order and the first strict maximum wins.
    """
    found = _kernels.find_split(
        np.ascontiguousarray(G, dtype=np.float64),
        np.ascontiguousarray(H, dtype=np.float64),
        np.ascontiguousarray(C, dtype=np.int64),
        np.ascontiguousarray(n_bins, dtype=np.int64),
        totals, lam, gamma, min_data, min_hess,
    )
    if found is None:
        return None
    k, t, missing_left, gain = found
    return SplitInfo(int(features[k]), int(t), float(gain), bool(missing_left))


def best_split(histograms, totals, lam=1.0, gamma=0.0, min_data_in_leaf=20, min_child_hessian=1e-3):
    """Best split from per-feature ``(G_bin, H_bin, count_bin)`` arrays.

    Each array includes the missing bin at index 0. Returns ``None`` when no
    candidate satisfies the child constraints with strictly positive gain.
    """
    if not histograms:
        return None
    width = max(len(hg[0]) for hg in histograms)
    nf = len(histograms)
    G = np.zeros((nf, width))
    H = np.zeros((nf, width))
    C = np.zeros((nf, width), dtype=np.int64)
    for k, (g, h, c) in enumerate(histograms):
        G[k, : len(g)] = g
        H[k, : len(h)] = h
        C[k, : len(c)] = c
    n_bins = [len(hg[0]) - 1 for hg in histograms]
    return find_split(G, H, C, n_bins, np.arange(nf), totals, lam, gamma, min_data_in_leaf, min_child_hessian)
