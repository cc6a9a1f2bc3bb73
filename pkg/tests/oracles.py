"""Independent reference implementations used as test oracles.

These are deliberately naive (enumeration, grids, dense linear algebra) and
share no code with the package.
"""
import itertools

import numpy as np


def kkt_prox(v, R, t=0.0):
    """argmin_{||x||_1 <= R} 0.5||x - v||^2 + t||x||_1 by enumerating active sets.

    The minimiser is sign(v)(|v| - s)_+ for the smallest s >= t keeping the l1
    norm at most R.  For each candidate support S the boundary threshold is
    s = (sum_S |v| - R)/|S|; it is valid when it separates S from its complement.
    """
    v = np.asarray(v, dtype=float)
    a = np.abs(v)
    free = np.sign(v) * np.maximum(a - t, 0.0)
    if np.abs(free).sum() <= R:
        return free
    p = v.size
    for size in range(1, p + 1):
        for S in itertools.combinations(range(p), size):
            S = list(S)
            rest = [i for i in range(p) if i not in S]
            s = (a[S].sum() - R) / len(S)
            if s < t - 1e-15:
                continue
            if a[S].min() > s and (not rest or a[rest].max() <= s + 1e-15):
                x = np.zeros(p)
                x[S] = np.sign(v[S]) * (a[S] - s)
                return x
    raise AssertionError("no valid active set found")


def grid_prox_2d(v, R, t=0.0, resolution=801):
    """Brute-force grid minimiser over the 2-d l1 ball."""
    g = np.linspace(-R, R, resolution)
    X, Y = np.meshgrid(g, g, indexing="ij")
    inside = np.abs(X) + np.abs(Y) <= R + 1e-12
    f = 0.5 * ((X - v[0]) ** 2 + (Y - v[1]) ** 2) + t * (np.abs(X) + np.abs(Y))
    f = np.where(inside, f, np.inf)
    i, j = np.unravel_index(np.argmin(f), f.shape)
    return np.array([X[i, j], Y[i, j]]), g[1] - g[0]


def brute_symmetrize_2x2(T, resolution=401, span=None):
    """Grid search over symmetric 2x2 matrices minimising max column abs sum of (X - T)."""
    T = np.asarray(T, dtype=float)
    span = span or 2.0 * (np.abs(T).max() + 1.0)
    # the diagonal can always match T exactly, so only the off-diagonal entry is searched
    g = np.linspace(-span, span, resolution)
    best, arg = np.inf, None
    for b in g:
        X = np.array([[T[0, 0], b], [b, T[1, 1]]])
        val = np.abs(X - T).sum(axis=0).max()
        if val < best:
            best, arg = val, X
    return best, arg, g[1] - g[0]


def spearman(x, y):
    """Spearman rank correlation without ties handling (continuous data)."""
    rx = np.argsort(np.argsort(x)).astype(float)
    ry = np.argsort(np.argsort(y)).astype(float)
    rx -= rx.mean()
    ry -= ry.mean()
    return float(rx @ ry / np.sqrt((rx @ rx) * (ry @ ry)))


def random_spd(rng, p, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((p, p)))
    d = np.geomspace(1.0, cond, p)
    return Q @ np.diag(d) @ Q.T
