"""Brute-force reference implementation used only by the tests.

Everything is written out with explicit loops and explicit matrix
inverses, straight from the estimator formulas, and shares no code with
the library beyond reading ``panel.y`` and ``panel.x``.
"""

import numpy as np


def difference(T):
    D = np.zeros((T - 1, T))
    for r in range(T - 1):
        D[r, r] = -1.0
        D[r, r + 1] = 1.0
    return D


def fod(T):
    F = np.zeros((T - 1, T))
    for r in range(T - 1):
        n_after = T - (r + 1)
        c = np.sqrt(n_after / (n_after + 1.0))
        F[r, r] = c
        for s in range(r + 1, T):
            F[r, s] = -c / n_after
    return F


def recent(y, x, t):
    """Recent-lags instruments of one individual; y (T+1,), x (T+1, P)."""
    if t == 1:
        return np.concatenate([[y[0]], x[0], x[1]])
    return np.concatenate([[y[t - 2], y[t - 1]], x[t - 2], x[t - 1], x[t]])


def all_lags(y, x, t):
    return np.concatenate([y[:t], x[: t + 1].ravel()])


def block_diag(vectors):
    m = sum(len(v) for v in vectors)
    Z = np.zeros((len(vectors), m))
    c = 0
    for r, v in enumerate(vectors):
        Z[r, c:c + len(v)] = v
        c += len(v)
    return Z


def individual_data(panel, i, scheme, system):
    T = panel.T
    y = panel.y[i]
    x = panel.x[i]
    yi = np.array([y[t] for t in range(1, T + 1)])
    Xi = np.array([np.concatenate([[y[t - 1]], x[t]]) for t in range(1, T + 1)])
    builder = recent if scheme == "recent-lags" else all_lags
    Z1 = block_diag([builder(y, x, t) for t in range(1, T)])
    if not system:
        return yi, Xi, Z1
    level = [x[1] - x[0]] + [np.concatenate([[y[t - 1] - y[t - 2]], x[t] - x[t - 1]]) for t in range(2, T + 1)]
    Z2 = block_diag(level)
    Z = np.zeros((Z1.shape[0] + Z2.shape[0], Z1.shape[1] + Z2.shape[1]))
    Z[: Z1.shape[0], : Z1.shape[1]] = Z1
    Z[Z1.shape[0]:, Z1.shape[1]:] = Z2
    return np.concatenate([yi, yi]), np.vstack([Xi, Xi]), Z


def transform_matrix(kind, T, system):
    K = difference(T) if kind == "fd" else fod(T)
    if not system:
        return K
    Kp = np.zeros((K.shape[0] + T, 2 * T))
    Kp[: K.shape[0], :T] = K
    Kp[K.shape[0]:, T:] = np.eye(T)
    return Kp


def gmm(panel, kind, scheme, system=False, step=2, initial=None):
    """Literal evaluation of the one-step / two-step sandwich."""
    K = transform_matrix(kind, panel.T, system)
    data = [individual_data(panel, i, scheme, system) for i in range(panel.N)]
    m = data[0][2].shape[1]
    k = data[0][1].shape[1]
    ZX = np.zeros((m, k))
    Zy = np.zeros(m)
    for yi, Xi, Zi in data:
        ZX += Zi.T @ (K @ Xi)
        Zy += Zi.T @ (K @ yi)
    if step == 1:
        S = np.zeros((m, m))
        for _, _, Zi in data:
            S += Zi.T @ K @ K.T @ Zi
    else:
        S = np.zeros((m, m))
        for yi, Xi, Zi in data:
            e = K @ (yi - Xi @ initial)
            S += Zi.T @ np.outer(e, e) @ Zi
    W = np.linalg.inv(S)
    return np.linalg.inv(ZX.T @ W @ ZX) @ (ZX.T @ W @ Zy)
