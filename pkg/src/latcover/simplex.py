"""Small dense two-phase simplex with Bland's rule.

Only meant for the tiny programs that show up in gauge evaluation
(a few dozen variables at most).
"""

import numpy as np

_EPS = 1e-11


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run(T, basis, n_cols):
    """Minimize the objective stored in the last row over the first n_cols columns."""
    m = T.shape[0] - 1
    while True:
        cost = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if cost[j] < -_EPS), None)
        if entering is None:
            return "optimal"
        col = T[:m, entering]
        ratios = [(T[i, -1] / col[i], basis[i], i) for i in range(m) if col[i] > _EPS]
        if not ratios:
            return "unbounded"
        best = min(r[0] for r in ratios)
        # Bland: among ties leave the smallest basic index
        leave = min((r for r in ratios if r[0] <= best + _EPS), key=lambda r: r[1])[2]
        _pivot(T, basis, leave, entering)


def linprog_eq(c, A, b):
    """Solve min c.x subject to A x = b, x >= 0.

    Returns ``(status, x, value)`` with status one of
    ``"optimal"``, ``"infeasible"``, ``"unbounded"``.
    """
    A = np.array(A, dtype=float)
    b = np.array(b, dtype=float)
    c = np.array(c, dtype=float)
    m, n = A.shape
    neg = b < 0
    A[neg] *= -1
    b[neg] *= -1
    # phase 1 tableau: [A | I | b], objective = sum of artificials
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -A.sum(axis=0)
    T[-1, -1] = -b.sum()
    basis = list(range(n, n + m))
    _run(T, basis, n + m)
    if -T[-1, -1] > 1e-8 * max(1.0, np.abs(b).max(initial=0.0)):
        return "infeasible", None, None
    # drive remaining artificials out of the basis
    for i in range(m):
        if basis[i] >= n:
            j = next((j for j in range(n) if abs(T[i, j]) > _EPS), None)
            if j is not None:
                _pivot(T, basis, i, j)
    keep = [i for i in range(m) if basis[i] < n]
    T2 = np.zeros((len(keep) + 1, n + 1))
    T2[:-1, :n] = T[keep, :n]
    T2[:-1, -1] = T[keep, -1]
    basis2 = [basis[i] for i in keep]
    T2[-1, :n] = c
    for i, j in enumerate(basis2):
        if T2[-1, j] != 0.0:
            T2[-1] -= T2[-1, j] * T2[i]
    status = _run(T2, basis2, n)
    if status != "optimal":
        return status, None, None
    x = np.zeros(n)
    for i, j in enumerate(basis2):
        x[j] = T2[i, -1]
    return "optimal", x, float(c @ x)


def minmax_coefficients(G, x):
    """Minimize max_i |lam_i| subject to sum_i lam_i G[i] = x.

    G has one generator per row.  Returns ``(value, lam)`` or ``(inf, None)``
    when x is outside the span of the generators.
    """
    G = np.asarray(G, dtype=float)
    x = np.asarray(x, dtype=float)
    m, n = G.shape
    # variables: lam+ (m), lam- (m), u (m), t (1)
    nv = 3 * m + 1
    A = np.zeros((n + m, nv))
    rhs = np.zeros(n + m)
    A[:n, :m] = G.T
    A[:n, m:2 * m] = -G.T
    rhs[:n] = x
    for i in range(m):
        A[n + i, i] = 1.0
        A[n + i, m + i] = 1.0
        A[n + i, 2 * m + i] = 1.0
        A[n + i, -1] = -1.0
    c = np.zeros(nv)
    c[-1] = 1.0
    status, sol, value = linprog_eq(c, A, rhs)
    if status != "optimal":
        return float("inf"), None
    lam = sol[:m] - sol[m:2 * m]
    return value, lam
