import numpy as np

HESS_FLOOR = 1e-16


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def logloss(raw, y):
    """Mean binary cross-entropy of log-odds ``raw`` against labels ``y``."""
    raw = np.asarray(raw, dtype=np.float64)
    # log(1 + exp(raw)) - y * raw, computed without overflow
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


def logloss_grad_hess(raw, y):
    """Gradient and hessian of the logistic loss with respect to the log-odds."""
    p = sigmoid(raw)
    g = p - np.asarray(y, dtype=np.float64)
    h = np.maximum(p * (1.0 - p), HESS_FLOOR)
    return g, h
