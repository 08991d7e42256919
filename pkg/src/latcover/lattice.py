"""Exact lattice arithmetic, l2 enumeration and the brute-force CVP oracle.

Bases are integer matrices whose *columns* are the basis vectors.  Targets are
rational vectors (``fractions.Fraction``).  Enumeration runs in floating point
with padded bounds and every returned point is then re-checked exactly, so the
output is never missing a point inside the requested radius.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from . import config
from .errors import BudgetExceeded, DimensionMismatch, NotPrime


def to_rational(x) -> tuple:
    """Convert a vector of ints/floats/strings/Fractions to a tuple of Fractions."""
    out = []
    for v in x:
        if isinstance(v, Fraction):
            out.append(v)
        elif isinstance(v, (int, np.integer)):
            out.append(Fraction(int(v)))
        elif isinstance(v, str):
            out.append(Fraction(v))
        else:
            out.append(Fraction(float(v)))
    return tuple(out)


def common_denominator(t: Sequence[Fraction]) -> int:
    d = 1
    for v in t:
        d = d * v.denominator // math.gcd(d, v.denominator)
    return d


def _bareiss_det(rows: list[list[int]]) -> int:
    m = [list(r) for r in rows]
    n = len(m)
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def _adjugate(rows: list[list[int]]) -> list[list[int]]:
    n = len(rows)
    if n == 1:
        return [[1]]
    adj = [[0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for k, r in enumerate(rows) if k != i]
            adj[j][i] = (-1) ** (i + j) * _bareiss_det(minor)
    return adj


class Lattice:
    """Full-rank lattice {B z : z in Z^n} given by an integer basis (columns)."""

    def __init__(self, basis):
        rows = [[int(v) for v in row] for row in np.asarray(basis, dtype=object).tolist()]
        n = len(rows)
        if n == 0 or any(len(r) != n for r in rows):
            raise DimensionMismatch("basis must be a square matrix")
        self.rows = tuple(tuple(r) for r in rows)
        self.n = n
        self.det = _bareiss_det(rows)
        if self.det == 0:
            raise ValueError("basis is not full rank")
        bound = max(abs(v) for r in rows for v in r)
        if bound > config.FLOAT_EXACT_BUDGET:
            raise OverflowError("basis entries exceed the precision budget")
        self.max_entry = bound

    @classmethod
    def identity(cls, n: int, scale: int = 1) -> "Lattice":
        return cls(np.eye(n, dtype=np.int64) * scale)

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.rows == other.rows

    def __hash__(self):
        return hash(self.rows)

    def __repr__(self):
        return f"Lattice({[list(r) for r in self.rows]})"

    @cached_property
    def B(self) -> np.ndarray:
        return np.array(self.rows, dtype=np.int64)

    @cached_property
    def Bf(self) -> np.ndarray:
        return self.B.astype(float)

    @cached_property
    def adj(self) -> np.ndarray:
        # det * B^{-1}, exact
        return np.array(_adjugate([list(r) for r in self.rows]), dtype=object)

    @cached_property
    def _qr(self):
        q, r = np.linalg.qr(self.Bf)
        return q, r

    def gram_schmidt_norms(self) -> np.ndarray:
        return np.abs(np.diag(self._qr[1]))

    def basis_columns(self) -> list[tuple[int, ...]]:
        return [tuple(self.rows[i][j] for i in range(self.n)) for j in range(self.n)]

    def vector(self, z) -> np.ndarray:
        return self.B @ np.asarray(z, dtype=np.int64)

    def coefficients(self, v):
        """Exact coefficients of v in the basis, or None if v is not in the lattice."""
        v = to_rational(v)
        if len(v) != self.n:
            raise DimensionMismatch("vector dimension mismatch")
        den = common_denominator(v)
        num = [int(x * den) for x in v]
        z = []
        for i in range(self.n):
            s = sum(int(self.adj[i, j]) * num[j] for j in range(self.n))
            q, r = divmod(s, self.det * den)
            if r != 0:
                return None
            z.append(q)
        return tuple(z)

    def contains(self, v) -> bool:
        return self.coefficients(v) is not None

    def coefficients_many(self, V: np.ndarray) -> np.ndarray:
        """Exact integer coefficients for integer vectors known to be lattice points."""
        V = np.asarray(V, dtype=object)
        Z = V.dot(self.adj.T)
        if np.any(Z % self.det != 0):
            raise ValueError("not all vectors lie in the lattice")
        return (Z // self.det).astype(np.int64)

    def scaled(self, k: int) -> "Lattice":
        return Lattice(self.B * int(k))

    def reduce_target(self, t):
        """Translate t by a lattice vector into the fundamental parallelepiped."""
        t = to_rational(t)
        coeff = [sum(Fraction(int(self.adj[i, j])) * t[j] for j in range(self.n)) / self.det
                 for i in range(self.n)]
        shift = [math.floor(c) for c in coeff]
        v = self.vector(shift)
        return tuple(t[i] - int(v[i]) for i in range(self.n))


def babai(lattice: Lattice, target) -> np.ndarray:
    """Nearest-plane rounding; returns integer coefficients of a lattice vector near target."""
    q, r = lattice._qr
    y = q.T @ np.array([float(x) for x in target])
    n = lattice.n
    z = np.zeros(n, dtype=np.int64)
    for j in range(n - 1, -1, -1):
        s = y[j] - r[j, j + 1:] @ z[j + 1:]
        z[j] = int(round(s / r[j, j]))
    return z


def _exact_sqdist_le(V: np.ndarray, center: tuple, bound: Fraction) -> np.ndarray:
    """Mask of rows v of V with ||v - center||_2^2 <= bound, computed exactly."""
    if len(V) == 0:
        return np.zeros(0, dtype=bool)
    den = common_denominator(center)
    num = np.array([int(c * den) for c in center], dtype=object)
    diff = V.astype(object) * den - num
    sq = (diff * diff).sum(axis=1)
    lhs = sq * bound.denominator
    rhs = bound.numerator * den * den
    return np.array([int(x) <= rhs for x in lhs], dtype=bool)


def _exact_sqdist(V: np.ndarray, center: tuple) -> list[Fraction]:
    den = common_denominator(center)
    num = np.array([int(c * den) for c in center], dtype=object)
    diff = V.astype(object) * den - num
    sq = (diff * diff).sum(axis=1)
    return [Fraction(int(s), den * den) for s in sq]


def _enumerate_coeffs(lattice: Lattice, center_f: np.ndarray, radius: float,
                      max_points: int) -> np.ndarray:
    """Breadth-first Fincke-Pohst over coefficient vectors (float, padded bounds)."""
    q, r = lattice._qr
    n = lattice.n
    y = np.linalg.solve(lattice.Bf, center_f)
    rad2 = radius * radius
    slack = 1e-7
    # D[:, i] = sum over fixed levels l > j of r[i, l] * (z_l - y_l)
    D = np.zeros((1, n))
    S = np.zeros(1)
    Z = np.zeros((1, 0), dtype=np.int64)
    for j in range(n - 1, -1, -1):
        rjj = r[j, j]
        center = y[j] - D[:, j] / rjj
        rem = np.maximum(rad2 - S, 0.0)
        half = np.sqrt(rem) / abs(rjj)
        pad = slack * (1.0 + np.abs(center) + half)
        lo = np.ceil(center - half - pad).astype(np.int64)
        hi = np.floor(center + half + pad).astype(np.int64)
        counts = np.maximum(hi - lo + 1, 0)
        total = int(counts.sum())
        if total == 0:
            return np.zeros((0, n), dtype=np.int64)
        if total > max_points:
            raise BudgetExceeded(f"enumeration exceeds {max_points} nodes")
        idx = np.repeat(np.arange(len(counts)), counts)
        starts = np.cumsum(counts) - counts
        offs = np.arange(total) - np.repeat(starts, counts)
        zj = lo[idx] + offs
        diff = zj - y[j]
        Drep = D[idx]
        contrib = rjj * diff + Drep[:, j]
        S = S[idx] + contrib * contrib
        D = Drep + np.outer(diff, r[:, j])
        Z = np.column_stack([zj, Z[idx]])
        keep = S <= rad2 * (1 + 1e-9) + 1e-9 + slack * (1 + rad2)
        Z, S, D = Z[keep], S[keep], D[keep]
    return Z


def enumerate_l2(lattice: Lattice, center, radius: float, *, tol: float | None = None,
                 return_coeffs: bool = False, max_points: int | None = None):
    """All lattice vectors v with ||v - center||_2 <= radius + tol.

    The output is sorted lexicographically by coefficient vector.  With
    ``return_coeffs`` a pair ``(vectors, coeffs)`` is returned.
    """
    eta = config.tol() if tol is None else tol
    max_points = config.MAX_ENUM_POINTS if max_points is None else max_points
    if radius < 0 or not math.isfinite(radius):
        raise ValueError("radius must be finite and nonnegative")
    c = to_rational(center)
    if len(c) != lattice.n:
        raise DimensionMismatch("center dimension mismatch")
    cf = np.array([float(x) for x in c])
    if np.max(np.abs(cf), initial=0.0) > config.FLOAT_EXACT_BUDGET:
        raise OverflowError("center exceeds the precision budget")
    Z = _enumerate_coeffs(lattice, cf, radius + eta, max_points)
    if len(Z):
        zmax = int(np.abs(Z).max())
        if zmax * lattice.max_entry * lattice.n >= config.INT_BUDGET:
            raise OverflowError("lattice vectors exceed the int64 budget")
    V = Z @ lattice.B.T if len(Z) else np.zeros((0, lattice.n), dtype=np.int64)
    bound = Fraction(radius + eta) ** 2
    mask = _exact_sqdist_le(V, c, bound)
    Z, V = Z[mask], V[mask]
    order = np.lexsort(Z.T[::-1]) if len(Z) else np.zeros(0, dtype=np.int64)
    Z, V = Z[order], V[order]
    if return_coeffs:
        return V, Z
    return V


class CvpResult(NamedTuple):
    vector: np.ndarray
    distance: float
    coeffs: np.ndarray


def _lex_argmin(values: np.ndarray, Z: np.ndarray, eta: float) -> int:
    """Index of the minimum value; near-ties (within eta) go to the lexicographically
    smallest coefficient vector.  Z is assumed lexicographically sorted."""
    m = values.min()
    return int(np.flatnonzero(values <= m + eta)[0])


def closest_l2(lattice: Lattice, target) -> CvpResult:
    """Exact l2 closest vector, with exact rational distance comparison."""
    t = to_rational(target)
    z0 = babai(lattice, t)
    v0 = lattice.vector(z0)
    d0 = math.sqrt(float(_exact_sqdist(v0[None, :], t)[0]))
    V, Z = enumerate_l2(lattice, t, d0 * (1 + 1e-12), return_coeffs=True)
    sq = _exact_sqdist(V, t)
    best = min(sq)
    i = next(k for k, s in enumerate(sq) if s == best)
    return CvpResult(V[i], math.sqrt(float(best)), Z[i])


def gauge_distances(norm, V: np.ndarray, target) -> np.ndarray:
    tf = np.array([float(x) for x in target])
    return norm.gauge(V.astype(float) - tf)


def exact_cvp(lattice: Lattice, target, norm=None) -> CvpResult:
    """Closest lattice vector to target in the gauge of ``norm`` (l2 if None).

    A first l2 pass yields an upper bound u on the gauge distance; every gauge
    minimizer then lies in the l2 ball of radius R*u around the target, where
    K is contained in R*B_2.
    """
    t = to_rational(target)
    if len(t) != lattice.n:
        raise DimensionMismatch("target dimension mismatch")
    first = closest_l2(lattice, t)
    if norm is None:
        return first
    eta = config.tol()
    _, R = norm.sandwich
    ub = float(gauge_distances(norm, first.vector[None, :], t)[0])
    radius = R * ub * (1 + 1e-12) + eta
    V, Z = enumerate_l2(lattice, t, radius, return_coeffs=True)
    g = gauge_distances(norm, V, t)
    i = _lex_argmin(g, Z, eta)
    return CvpResult(V[i], float(g[i]), Z[i])


def inner_two_approx(lattice: Lattice, target, norm):
    """Inner solver: a lattice vector within gauge distance 2, or None.

    Returns the exact minimizer when its distance is at most 2, which meets
    the requirement of a 2-approximate solver that only reports vectors at
    distance <= 2.
    """
    res = exact_cvp(lattice, target, norm)
    if res.distance <= 2 + config.tol():
        return res.vector
    return None


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    if p % 2 == 0:
        return p == 2
    f = 3
    while f * f <= p:
        if p % f == 0:
            return False
        f += 2
    return True


def column_hnf(M) -> list[list[int]]:
    """Lower-triangular column Hermite normal form of a nonsingular integer matrix."""
    A = [list(map(int, row)) for row in M]
    n = len(A)

    def col_op(i, j, a, b, c, d):
        # (col_i, col_j) <- (a col_i + b col_j, c col_i + d col_j)
        for r in range(n):
            x, y = A[r][i], A[r][j]
            A[r][i], A[r][j] = a * x + b * y, c * x + d * y

    for i in range(n):
        for j in range(i + 1, n):
            if A[i][j] == 0:
                continue
            x, y = A[i][i], A[i][j]
            g, s, t = _xgcd(x, y)
            col_op(i, j, s, t, -y // g, x // g)
        if A[i][i] < 0:
            for r in range(n):
                A[r][i] = -A[r][i]
        d = A[i][i]
        for j in range(i):
            q = A[i][j] // d
            if q:
                for r in range(n):
                    A[r][j] -= q * A[r][i]
    return A


def _xgcd(a: int, b: int):
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    return a, x0, y0


def congruence_basis(a: Sequence[int], p: int) -> list[list[int]]:
    """HNF basis (columns) of {z in Z^n : <a, z> = 0 mod p}."""
    n = len(a)
    a = [int(x) % p for x in a]
    if all(x == 0 for x in a):
        return [[int(i == j) for j in range(n)] for i in range(n)]
    i = next(k for k, x in enumerate(a) if x != 0)
    inv = pow(a[i], -1, p)
    cols = []
    for j in range(n):
        col = [0] * n
        if j == i:
            col[i] = p
        else:
            col[j] = 1
            col[i] = (-a[j] * inv) % p
        cols.append(col)
    M = [[cols[j][r] for j in range(n)] for r in range(n)]
    return column_hnf(M)


def hnf_sublattice(lattice: Lattice, a: Sequence[int], p: int) -> Lattice:
    """Basis of {B z : <a, z> = 0 mod p}; index p unless a = 0 mod p."""
    if not is_prime(int(p)):
        raise NotPrime(f"{p} is not prime")
    if len(a) != lattice.n:
        raise DimensionMismatch("congruence vector dimension mismatch")
    H = np.array(congruence_basis(a, int(p)), dtype=object)
    return Lattice(np.array(lattice.rows, dtype=object).dot(H))
