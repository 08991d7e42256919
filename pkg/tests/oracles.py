"""Independent reference implementations for the tests.

Nothing here calls into latcover: gauges are recomputed from their
definitions (closed forms, scipy's LP solver for zonotopes) and the CVP
oracle is a plain scan over an integer coefficient box.
"""

import itertools
import math
from fractions import Fraction

import numpy as np
from scipy.optimize import linprog

ETA = 1e-9


def gauge_lp(X, p):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if math.isinf(p):
        return np.abs(X).max(axis=1)
    return (np.abs(X) ** p).sum(axis=1) ** (1.0 / p)


def gauge_polytope(X, A, b):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return (np.abs(X @ np.asarray(A, float).T) / np.asarray(b, float)).max(axis=1)


def gauge_zonotope_one(x, G):
    """min t s.t. x = sum lam_i g_i, |lam_i| <= t, by scipy's HiGHS."""
    G = np.asarray(G, dtype=float)
    m, n = G.shape
    # variables lam (m), t
    c = np.zeros(m + 1)
    c[-1] = 1
    A_eq = np.hstack([G.T, np.zeros((n, 1))])
    A_ub = np.vstack([np.hstack([np.eye(m), -np.ones((m, 1))]),
                      np.hstack([-np.eye(m), -np.ones((m, 1))])])
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(2 * m), A_eq=A_eq, b_eq=np.asarray(x, float),
                  bounds=[(None, None)] * m + [(0, None)], method="highs")
    return res.fun if res.status == 0 else math.inf


def gauge_zonotope(X, G):
    return np.array([gauge_zonotope_one(x, G) for x in np.atleast_2d(X)])


def box_scan_cvp(B, t, gauge, R, max_points=None):
    """Closest lattice vector by scanning every coefficient vector that can matter.

    B has basis columns, ``gauge`` maps rows to gauge values and R is any
    radius with K inside R B_2.  Ties within ETA go to the lexicographically
    smallest coefficient vector.  Returns None when the box would hold more
    than ``max_points`` coefficient vectors.
    """
    B = np.asarray(B, dtype=float)
    tf = np.array([float(v) for v in t])
    Binv = np.linalg.inv(B)
    u = Binv @ tf
    # rounding gives one candidate, hence an upper bound on the distance
    z0 = np.round(u)
    ub = float(gauge((B @ z0 - tf)[None, :])[0])
    rho = R * ub + 1e-9
    half = np.linalg.norm(Binv, axis=1) * rho
    lo = np.floor(u - half).astype(int)
    hi = np.ceil(u + half).astype(int)
    if max_points is not None and np.prod((hi - lo + 1).astype(float)) > max_points:
        return None
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    Z = np.array(list(itertools.product(*axes)), dtype=np.int64)
    V = Z @ np.asarray(B, dtype=np.int64).T
    g = gauge(V.astype(float) - tf)
    m = g.min()
    idx = np.flatnonzero(g <= m + ETA)
    best = min(idx, key=lambda i: tuple(Z[i]))
    return V[best], float(g[best]), Z[best]


def box_scan_l2_ball(B, center, radius):
    """All lattice vectors within l2 distance radius of center, exact rationals."""
    B = np.asarray(B, dtype=np.int64)
    c = [Fraction(v) for v in center]
    Binv = np.linalg.inv(B.astype(float))
    u = Binv @ np.array([float(v) for v in c])
    half = np.linalg.norm(Binv, axis=1) * radius + 1
    axes = [range(int(math.floor(a - h)), int(math.ceil(a + h)) + 1) for a, h in zip(u, half)]
    r2 = Fraction(radius) ** 2
    out = []
    for z in itertools.product(*axes):
        v = B @ np.array(z, dtype=np.int64)
        d2 = sum((Fraction(int(vi)) - ci) ** 2 for vi, ci in zip(v, c))
        if d2 <= r2:
            out.append(tuple(int(x) for x in v))
    return sorted(out)


def random_basis(rng, n, bound=5):
    while True:
        B = rng.integers(-bound, bound + 1, size=(n, n))
        if abs(round(np.linalg.det(B))) >= 1:
            return B


def random_target(rng, B, denom=32):
    n = B.shape[0]
    k = rng.integers(-denom, 2 * denom, size=n)
    return tuple(sum(Fraction(int(B[i, j]) * int(k[j]), denom) for j in range(n)) for i in range(n))
