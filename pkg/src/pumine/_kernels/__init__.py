"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when the
``PUMINE_PURE_PYTHON`` environment variable is set, the numpy fallback is
used. Both produce identical bits.
"""
import os

from . import _pykernels

if os.environ.get("PUMINE_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

_num_threads = max(1, int(os.environ.get("PUMINE_NUM_THREADS", "1")))


def set_num_threads(n):
    """Set the worker count used by the parallel kernels (clamped to >= 1)."""
    global _num_threads
    _num_threads = max(1, int(n))


def get_num_threads():
    return _num_threads


def build_histograms(binned, rows, features, offsets, g, h):
    """Per-bin gradient sum, hessian sum and row count for ``rows``.

    Returns three flat arrays indexed by ``offsets[f] + bin``; features not
    listed in ``features`` stay zero.
    """
    return _impl.build_histograms(binned, rows, features, offsets, g, h, _num_threads)


def tree_leaf_values(binned, tree):
    """Leaf value reached by every column of ``binned`` in ``tree``."""
    return _impl.tree_leaf_values(
        binned,
        tree.feature,
        tree.threshold,
        tree.missing_left,
        tree.left,
        tree.right,
        tree.value,
        _num_threads,
    )


def find_split(G, H, C, n_bins, totals, lam, gamma, min_data, min_hess):
    """Scan padded histograms for the best split.

    Returns ``(row of G, threshold, missing_left, gain)`` or ``None``.
    """
    Gt, Ht, Ct = totals
    return _impl.find_split(
        G, H, C, n_bins, float(Gt), float(Ht), int(Ct), float(lam), float(gamma), int(min_data), float(min_hess)
    )
