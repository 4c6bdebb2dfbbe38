"""Independent reference computations used only by the tests.

Nothing here imports the package's estimators; each oracle recomputes its
target from the raw edge list by a different route.
"""

import mpmath
import numpy as np
import scipy.linalg as la


def nll_mpmath(theta, data, dps=40):
    """Negative log-likelihood by naive extended-precision summation."""
    mpmath.mp.dps = dps
    total = mpmath.mpf(0)
    for a, b, y in zip(data.i.tolist(), data.j.tolist(), data.ybar.tolist()):
        x = mpmath.mpf(theta[a]) - mpmath.mpf(theta[b])
        p = mpmath.e ** x / (1 + mpmath.e ** x)
        y = mpmath.mpf(y)
        if y > 0:
            total += y * mpmath.log(1 / p)
        if y < 1:
            total += (1 - y) * mpmath.log(1 / (1 - p))
    return total


def _nll_grid(t1, t2, data):
    theta = [t1, t2, -t1 - t2]
    out = np.zeros_like(t1)
    for a, b, y in zip(data.i.tolist(), data.j.tolist(), data.ybar.tolist()):
        x = theta[a] - theta[b]
        out = out + y * np.log1p(np.exp(-x)) + (1 - y) * np.log1p(np.exp(x))
    return out


def grid_mle_n3(data, half_width=6.0, points=41, levels=40):
    """Nested grid search for the centered 3-item MLE over (theta_1, theta_2)."""
    c1 = c2 = 0.0
    w = half_width
    for _ in range(levels):
        g = np.linspace(-w, w, points)
        t1, t2 = np.meshgrid(c1 + g, c2 + g, indexing="ij")
        f = _nll_grid(t1, t2, data)
        k = np.unravel_index(np.argmin(f), f.shape)
        c1, c2 = float(t1[k]), float(t2[k])
        w = w * 4.0 / (points - 1)
        if w < 1e-11:
            break
    return np.array([c1, c2, -c1 - c2])


def dense_transition(data, d):
    n = data.n
    P = np.zeros((n, n))
    for a, b, y in zip(data.i.tolist(), data.j.tolist(), data.ybar.tolist()):
        P[a, b] = (1 - y) / d
        P[b, a] = y / d
    P[np.diag_indices(n)] = 1 - P.sum(axis=1)
    return P


def stationary_nullspace(P):
    """Left null vector of (P - I) from a dense SVD, normalized to the simplex."""
    v = la.null_space(P.T - np.eye(P.shape[0]))
    assert v.shape[1] == 1, "chain is not irreducible"
    v = v[:, 0]
    return v / v.sum()


def sum_main_mle(theta, data):
    n = data.n
    b = [0.0] * n
    d = [0.0] * n
    for a, c, y in zip(data.i.tolist(), data.j.tolist(), data.ybar.tolist()):
        pa = 1 / (1 + np.exp(-(theta[a] - theta[c])))
        b[a] += y - pa
        b[c] += (1 - y) - (1 - pa)
        d[a] += pa * (1 - pa)
        d[c] += pa * (1 - pa)
    return np.array(b), np.array(d)
