"""Pure numpy versions of the compiled kernels.

Same signatures and bit-identical results: ``np.bincount`` accumulates
weights sequentially in input order, which is the order the compiled loop
uses.
"""
import numpy as np


def build_histograms(binned, rows, features, offsets, g, h, n_threads=1):
    total = int(offsets[-1])
    G = np.zeros(total, dtype=np.float64)
    H = np.zeros(total, dtype=np.float64)
    C = np.zeros(total, dtype=np.int64)
    if len(features) == 0 or len(rows) == 0:
        return G, H, C
    # feature-major flattening keeps each bin's contributions in row order
    flat = (binned[features][:, rows].astype(np.int64) + offsets[features][:, None]).ravel()
    nf = len(features)
    G += np.bincount(flat, weights=np.tile(g[rows], nf), minlength=total)
    H += np.bincount(flat, weights=np.tile(h[rows], nf), minlength=total)
    C += np.bincount(flat, minlength=total)
    return G, H, C


def tree_leaf_values(binned, feature, threshold, missing_left, left, right, value, n_threads=1):
    n = binned.shape[1]
    node = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        f = feature[node[active]]
        internal = f >= 0
        active = active[internal]
        if not active.size:
            break
        cur = node[active]
        f = f[internal]
        b = binned[f, active]
        go_left = np.where(b == 0, missing_left[cur].astype(bool), b <= threshold[cur])
        node[active] = np.where(go_left, left[cur], right[cur])
    return value[node].astype(np.float64, copy=True)


def find_split(G, H, C, n_bins, Gt, Ht, Ct, lam, gamma, min_data, min_hess):
    nf, width = G.shape
    Gt, Ht, lam = np.float64(Gt), np.float64(Ht), np.float64(lam)  # IEEE division, as in C
    if nf == 0 or width < 2:
        return None
    GLc = np.cumsum(G[:, 1:], axis=1)
    HLc = np.cumsum(H[:, 1:], axis=1)
    CLc = np.cumsum(C[:, 1:], axis=1)
    # last axis: 0 = missing goes left, 1 = missing goes right
    GL = np.stack([GLc + G[:, :1], GLc], axis=2)
    HL = np.stack([HLc + H[:, :1], HLc], axis=2)
    CL = np.stack([CLc + C[:, :1], CLc], axis=2)
    GR = Gt - GL
    HR = Ht - HL
    CR = Ct - CL
    thresholds = np.arange(1, width)
    ok = (thresholds[None, :] <= np.asarray(n_bins)[:, None])[:, :, None]
    ok = ok & (CL >= min_data) & (CR >= min_data) & (HL >= min_hess) & (HR >= min_hess)
    ok = ok & (HL + lam > 0.0) & (HR + lam > 0.0)
    if not ok.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - Gt * Gt / (Ht + lam)) - gamma
    gain = np.where(ok & (gain > 0.0), gain, -np.inf)
    best = int(np.argmax(gain))
    k, t, d = np.unravel_index(best, gain.shape)
    if gain[k, t, d] == -np.inf:
        return None
    return int(k), int(t) + 1, bool(d == 0), float(gain[k, t, d])
