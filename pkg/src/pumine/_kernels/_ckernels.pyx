# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled histogram and tree-traversal kernels.

Every accumulation runs in ascending row order inside one thread per
feature (or per row for traversal), so output is bit-identical to the
numpy fallback and independent of the thread count.
"""
import numpy as np

from cython.parallel cimport prange


def build_histograms(
    const unsigned short[:, ::1] binned,
    const long long[::1] rows,
    const long long[::1] features,
    const long long[::1] offsets,
    const double[::1] g,
    const double[::1] h,
    int n_threads=1,
):
    cdef Py_ssize_t total = offsets[offsets.shape[0] - 1]
    G_arr = np.zeros(total, dtype=np.float64)
    H_arr = np.zeros(total, dtype=np.float64)
    C_arr = np.zeros(total, dtype=np.int64)
    cdef double[::1] G = G_arr
    cdef double[::1] H = H_arr
    cdef long long[::1] C = C_arr
    cdef Py_ssize_t nf = features.shape[0]
    cdef Py_ssize_t nr = rows.shape[0]
    cdef Py_ssize_t j, k, i, f, b, base
    if n_threads < 1:
        n_threads = 1
    with nogil:
        for j in prange(nf, num_threads=n_threads, schedule="static"):
            f = features[j]
            base = offsets[f]
            for k in range(nr):
                i = rows[k]
                b = base + binned[f, i]
                G[b] += g[i]
                H[b] += h[i]
                C[b] += 1
    return G_arr, H_arr, C_arr


def tree_leaf_values(
    const unsigned short[:, ::1] binned,
    const int[::1] feature,
    const int[::1] threshold,
    const unsigned char[::1] missing_left,
    const int[::1] left,
    const int[::1] right,
    const double[::1] value,
    int n_threads=1,
):
    cdef Py_ssize_t n = binned.shape[1]
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    cdef int node, f, b
    if n_threads < 1:
        n_threads = 1
    with nogil:
        for i in prange(n, num_threads=n_threads, schedule="static"):
            node = 0
            while feature[node] >= 0:
                f = feature[node]
                b = binned[f, i]
                if b == 0:
                    if missing_left[node]:
                        node = left[node]
                    else:
                        node = right[node]
                elif b <= threshold[node]:
                    node = left[node]
                else:
                    node = right[node]
            out[i] = value[node]
    return out_arr


def find_split(
    const double[:, :] G,
    const double[:, :] H,
    const long long[:, :] C,
    const long long[::1] n_bins,
    double Gt,
    double Ht,
    long long Ct,
    double lam,
    double gamma,
    long long min_data,
    double min_hess,
):
    cdef Py_ssize_t nf = G.shape[0]
    cdef Py_ssize_t k, t, d
    cdef double gl, hl, gr, hr, gain, best_gain = 0.0
    cdef double cg, ch
    cdef long long cc, cl, cr
    cdef int best_k = -1, best_t = 0, best_d = 0
    cdef bint found = False
    with nogil:
        for k in range(nf):
            cg = 0.0
            ch = 0.0
            cc = 0
            for t in range(1, n_bins[k] + 1):
                cg = cg + G[k, t]
                ch = ch + H[k, t]
                cc = cc + C[k, t]
                for d in range(2):
                    if d == 0:
                        gl = cg + G[k, 0]
                        hl = ch + H[k, 0]
                        cl = cc + C[k, 0]
                    else:
                        gl = cg
                        hl = ch
                        cl = cc
                    gr = Gt - gl
                    hr = Ht - hl
                    cr = Ct - cl
                    if cl < min_data or cr < min_data or hl < min_hess or hr < min_hess:
                        continue
                    if hl + lam <= 0.0 or hr + lam <= 0.0:
                        continue
                    gain = 0.5 * (gl * gl / (hl + lam) + gr * gr / (hr + lam) - Gt * Gt / (Ht + lam)) - gamma
                    if gain > 0.0 and (not found or gain > best_gain):
                        found = True
                        best_gain = gain
                        best_k = k
                        best_t = t
                        best_d = d
    if not found:
        return None
    return best_k, best_t, best_d == 0, best_gain
