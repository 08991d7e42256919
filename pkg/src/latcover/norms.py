"""Gauge functions of centrally symmetric convex bodies and moduli of smoothness.

Every body exposes a vectorized ``gauge`` (rows of a 2-d array, or a single
vector), sandwich radii ``(r, R)`` with ``r*B_2 <= K <= R*B_2``, an optional
smoothness profile, a support normal at boundary points and a uniform sampler.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError, UnboundedGauge
from .simplex import minmax_coefficients


@dataclass(frozen=True)
class SmoothnessProfile:
    """Bound rho_K(tau) <= C * tau**q."""

    C: float
    q: float

    @property
    def threshold(self) -> float:
        """Largest epsilon for which the cap construction has its counting bound."""
        if self.q <= 1:
            return 0.0
        return (1.0 / (8.0 * self.C ** (1.0 / self.q))) ** (self.q / (self.q - 1.0))

    def bound(self, tau):
        return self.C * np.asarray(tau, dtype=float) ** self.q

    def cap_radius(self, eps: float) -> float:
        return 0.25 * (eps / self.C) ** (1.0 / self.q)


def _as_rows(x):
    x = np.asarray(x, dtype=float)
    return x[None, :] if x.ndim == 1 else x, x.ndim == 1


class NormBody:
    """Base class.  Subclasses implement ``_gauge_rows``."""

    n: int
    smoothness: SmoothnessProfile | None = None
    is_symmetric: bool = True

    def gauge(self, x):
        X, single = _as_rows(x)
        if X.shape[1] != self.n:
            raise ValueError(f"expected dimension {self.n}, got {X.shape[1]}")
        g = self._gauge_rows(X)
        return float(g[0]) if single else g

    def _gauge_rows(self, X):
        raise NotImplementedError

    @property
    def sandwich(self) -> tuple[float, float]:
        raise NotImplementedError

    def normal(self, p) -> np.ndarray:
        """Support normal u at boundary point p, scaled so that <u, p> = 1 and
        <u, x> <= gauge(x) for all x."""
        raise NotImplementedError

    def normals(self, P) -> np.ndarray:
        """Row-wise ``normal`` for boundary points P."""
        return np.array([self.normal(p) for p in np.asarray(P, dtype=float)])

    def sample(self, rng, count: int) -> np.ndarray:
        """Uniform samples from the body by rejection from the bounding box."""
        _, R = self.sandwich
        out = []
        have = 0
        while have < count:
            X = rng.uniform(-R, R, size=(max(2 * (count - have), 64), self.n))
            X = X[self.gauge(X) <= 1.0]
            out.append(X)
            have += len(X)
        return np.concatenate(out)[:count]

    def sample_boundary(self, rng, count: int) -> np.ndarray:
        U = rng.standard_normal((count, self.n))
        return U / self.gauge(U)[:, None]

    def scaled(self, s: float) -> "NormBody":
        return Scaled(self, s)

    def to_json(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


class Lp(NormBody):
    def __init__(self, p: float, n: int):
        p = float(p)
        if not (p >= 1) or math.isinf(p):
            raise DomainError("Lp needs 1 <= p < inf; use cube() for p = inf")
        self.p = p
        self.n = int(n)
        self.smoothness = lp_profile(p)

    def __repr__(self):
        return f"Lp(p={self.p:g}, n={self.n})"

    def _gauge_rows(self, X):
        if self.p == 2.0:
            return np.sqrt(np.einsum("ij,ij->i", X, X))
        if self.p == 1.0:
            return np.abs(X).sum(axis=1)
        A = np.abs(X)
        m = A.max(axis=1)
        safe = np.where(m > 0, m, 1.0)
        return m * ((A / safe[:, None]) ** self.p).sum(axis=1) ** (1.0 / self.p)

    @property
    def sandwich(self):
        e = 0.5 - 1.0 / self.p
        return self.n ** min(0.0, e), self.n ** max(0.0, e)

    def normal(self, p):
        p = np.asarray(p, dtype=float)
        if self.p == 1.0:
            u = np.sign(p)
        else:
            u = np.sign(p) * np.abs(p) ** (self.p - 1)
        return u / (u @ p)

    def normals(self, P):
        P = np.asarray(P, dtype=float)
        U = np.sign(P) if self.p == 1.0 else np.sign(P) * np.abs(P) ** (self.p - 1)
        return U / np.einsum("ij,ij->i", U, P)[:, None]

    def sample(self, rng, count):
        p = self.p
        if p == 2.0:
            G = rng.standard_normal((count, self.n))
            rad = rng.random(count) ** (1.0 / self.n) / np.sqrt(np.einsum("ij,ij->i", G, G))
            return G * rad[:, None]
        # generalized Gaussian construction: uniform in the l_p ball
        G = rng.gamma(1.0 / p, 1.0, size=(count, self.n)) ** (1.0 / p)
        G *= rng.choice([-1.0, 1.0], size=(count, self.n))
        W = rng.exponential(1.0, size=count)
        return G / ((np.abs(G) ** p).sum(axis=1) + W)[:, None] ** (1.0 / p)

    def to_json(self):
        return {"type": "lp", "p": self.p if self.p != int(self.p) else int(self.p)}


class PolytopeH(NormBody):
    """{x : |<a_i, x>| <= b_i}; bounded and full dimensional."""

    def __init__(self, A, b):
        self.A = np.array(A, dtype=float)
        self.b = np.array(b, dtype=float)
        if self.A.ndim != 2 or self.A.shape[0] != len(self.b):
            raise ValueError("A must be m x n and b of length m")
        if np.any(self.b <= 0):
            raise ValueError("b must be positive")
        self.n = self.A.shape[1]
        self.m = self.A.shape[0]
        if np.linalg.matrix_rank(self.A) < self.n:
            raise ValueError("polytope is unbounded")
        self._W = self.A / self.b[:, None]

    def __repr__(self):
        return f"PolytopeH(m={self.m}, n={self.n})"

    def _gauge_rows(self, X):
        return np.abs(X @ self._W.T).max(axis=1)

    @cached_property
    def vertices(self) -> np.ndarray:
        return _polytope_vertices(self._W)

    @cached_property
    def box(self) -> np.ndarray:
        return np.abs(self.vertices).max(axis=0)

    @property
    def sandwich(self):
        r = float(np.min(self.b / np.linalg.norm(self.A, axis=1)))
        R = float(np.sqrt((self.vertices ** 2).sum(axis=1)).max())
        return r, R

    def normal(self, p):
        v = self._W @ np.asarray(p, dtype=float)
        i = int(np.argmax(np.abs(v)))
        u = np.sign(v[i]) * self._W[i]
        return u / (u @ p)

    def sample(self, rng, count):
        h = self.box
        out, have = [], 0
        while have < count:
            X = rng.uniform(-h, h, size=(max(2 * (count - have), 64), self.n))
            X = X[self.gauge(X) <= 1.0]
            out.append(X)
            have += len(X)
        return np.concatenate(out)[:count]

    def to_json(self):
        return {"type": "polytope", "A": self.A.tolist(), "b": self.b.tolist()}


def cube(n: int) -> PolytopeH:
    """The l_inf unit ball as an H-polytope."""
    return PolytopeH(np.eye(n), np.ones(n))


def _polytope_vertices(W: np.ndarray) -> np.ndarray:
    """Vertices of {x : |W x| <= 1} by brute force over facet choices."""
    m, n = W.shape
    verts = []
    for rows in itertools.combinations(range(m), n):
        M = W[list(rows)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        Minv = np.linalg.inv(M)
        for signs in itertools.product((-1.0, 1.0), repeat=n):
            x = Minv @ np.array(signs)
            if np.abs(W @ x).max() <= 1 + 1e-9:
                verts.append(x)
    V = np.unique(np.round(np.array(verts), 12), axis=0)
    return V


def _facet_normals(G: np.ndarray):
    """Normals a and offsets h with Z = {x : |<a, x>| <= h} for the zonotope of G."""
    m, n = G.shape
    if n == 1:
        return np.ones((1, 1)), np.array([np.abs(G).sum()])
    normals = []
    for rows in itertools.combinations(range(m), n - 1):
        S = G[list(rows)]
        # generalized cross product via cofactors
        a = np.array([(-1) ** j * np.linalg.det(np.delete(S, j, axis=1)) for j in range(n)])
        nrm = np.linalg.norm(a)
        if nrm < 1e-10:
            continue
        a /= nrm
        i = int(np.argmax(np.abs(a) > 1e-12))
        if a[i] < 0:
            a = -a
        normals.append(a)
    A = np.unique(np.round(np.array(normals), 12), axis=0)
    h = np.abs(A @ G.T).sum(axis=1)
    return A, h


class Zonotope(NormBody):
    """Minkowski sum of segments [-g_i, g_i] (generators are rows)."""

    def __init__(self, gens):
        self.gens = np.array(gens, dtype=float)
        if self.gens.ndim != 2:
            raise ValueError("generators must be an m x n array")
        self.m, self.n = self.gens.shape
        self.full = np.linalg.matrix_rank(self.gens) == self.n
        if self.full:
            self.facets, self.offsets = _facet_normals(self.gens)
            self._W = self.facets / self.offsets[:, None]

    def __repr__(self):
        return f"Zonotope(m={self.m}, n={self.n})"

    def _gauge_rows(self, X):
        if self.full:
            return np.abs(X @ self._W.T).max(axis=1)
        return np.array([self.gauge_lp(x) for x in X])

    def gauge_lp(self, x) -> float:
        value, _ = minmax_coefficients(self.gens, x)
        if not math.isfinite(value):
            raise UnboundedGauge("point outside the span of the generators")
        return value

    def coefficients(self, x):
        """Witness lam with sum lam_i g_i = x and max |lam_i| = gauge(x)."""
        x = np.asarray(x, dtype=float)
        if self.full and self.m - self.n <= 1:
            return self._coefficients_small_kernel(x)
        value, lam = minmax_coefficients(self.gens, x)
        if lam is None:
            raise UnboundedGauge("point outside the span of the generators")
        return lam

    @cached_property
    def _kernel(self):
        # particular-solution operator and kernel direction of G^T lam = x
        pinv = np.linalg.pinv(self.gens.T)
        if self.m == self.n:
            return pinv, None
        _, _, vt = np.linalg.svd(self.gens.T)
        return pinv, vt[-1]

    def _coefficients_small_kernel(self, x):
        pinv, k = self._kernel
        lam0 = pinv @ x
        if k is None:
            return lam0
        # minimize max_i |lam0_i + s k_i| over s: check all pairwise breakpoints
        a = np.concatenate([lam0, -lam0])
        c = np.concatenate([k, -k])
        ai, aj = np.meshgrid(a, a, indexing="ij")
        ci, cj = np.meshgrid(c, c, indexing="ij")
        den = ci - cj
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(np.abs(den) > 1e-14, (aj - ai) / den, np.nan)
        s = np.concatenate([s[np.isfinite(s)], [0.0]])
        vals = np.abs(lam0[None, :] + s[:, None] * k[None, :]).max(axis=1)
        return lam0 + s[int(np.argmin(vals))] * k

    def with_scaled_generators(self, h) -> "Zonotope":
        """Zonotope of rows h_i * g_i (h_i > 0), reusing the facet normals."""
        z = Zonotope.__new__(Zonotope)
        z.gens = self.gens * np.asarray(h, dtype=float)[:, None]
        z.m, z.n, z.full = self.m, self.n, self.full
        z.smoothness = None
        z.facets = self.facets
        z.offsets = np.abs(self.facets @ z.gens.T).sum(axis=1)
        z._W = z.facets / z.offsets[:, None]
        return z

    @cached_property
    def sandwich(self):
        if not self.full:
            raise UnboundedGauge("zonotope is not full dimensional")
        r = float(self.offsets.min())
        if self.m <= 16:
            # exact: the farthest vertex sum_i +-g_i
            signs = np.array(list(itertools.product((-1.0, 1.0), repeat=self.m)))
            R = float(np.linalg.norm(signs @ self.gens, axis=1).max())
        else:
            R = float(min(np.linalg.norm(self.gens, axis=1).sum(), np.linalg.norm(self.box)))
        return r, R

    @cached_property
    def box(self):
        return np.abs(self.gens).sum(axis=0)

    def normal(self, p):
        v = self._W @ np.asarray(p, dtype=float)
        i = int(np.argmax(np.abs(v)))
        u = np.sign(v[i]) * self._W[i]
        return u / (u @ p)

    def sample(self, rng, count):
        h = self.box
        out, have = [], 0
        while have < count:
            X = rng.uniform(-h, h, size=(max(2 * (count - have), 64), self.n))
            X = X[self.gauge(X) <= 1.0]
            out.append(X)
            have += len(X)
        return np.concatenate(out)[:count]

    def to_json(self):
        return {"type": "zonotope", "gens": self.gens.tolist()}


class Scaled(NormBody):
    """The body s*K."""

    def __init__(self, base: NormBody, s: float):
        if s <= 0:
            raise ValueError("scale must be positive")
        if isinstance(base, Scaled):
            base, s = base.base, base.s * s
        self.base = base
        self.s = float(s)
        self.n = base.n
        self.smoothness = base.smoothness

    def __repr__(self):
        return f"Scaled({self.base!r}, {self.s:g})"

    def _gauge_rows(self, X):
        return self.base.gauge(X) / self.s

    @property
    def sandwich(self):
        r, R = self.base.sandwich
        return r * self.s, R * self.s

    def normal(self, p):
        return self.base.normal(np.asarray(p) / self.s) / self.s

    def sample(self, rng, count):
        return self.base.sample(rng, count) * self.s

    def to_json(self):
        return {"type": "scaled", "s": self.s, "base": self.base.to_json()}


class PrismSlice(NormBody):
    """Origin-centred slab of a cap cylinder.

    Points are decomposed as x = t*p + w with <normal, w> = 0; the body is
    {|t| <= half_width, gauge_base(w) <= delta}.
    """

    def __init__(self, base: NormBody, p, normal, delta: float, half_width: float):
        self.base = base
        self.p = np.asarray(p, dtype=float)
        self.u = np.asarray(normal, dtype=float)
        self.delta = float(delta)
        self.half_width = float(half_width)
        self.n = base.n
        self._up = float(self.u @ self.p)
        if abs(self._up) < 1e-14:
            raise ValueError("normal is orthogonal to the boundary point")

    def __repr__(self):
        return f"PrismSlice(delta={self.delta:g}, half_width={self.half_width:g})"

    def split(self, X):
        t = (X @ self.u) / self._up
        return t, X - t[:, None] * self.p

    def _gauge_rows(self, X):
        t, w = self.split(X)
        gw = self.base.gauge(w) if self.n > 1 else np.zeros(len(X))
        return np.maximum(np.abs(t) / self.half_width, gw / self.delta)

    @property
    def sandwich(self):
        rb, Rb = self.base.sandwich
        R = self.half_width * float(np.linalg.norm(self.p)) + self.delta * Rb
        # |t| <= |x| |u| / <u,p> and gauge(w) <= (|x| + |t||p|) / rb
        a = float(np.linalg.norm(self.u)) / abs(self._up)
        pn = float(np.linalg.norm(self.p))
        r = min(self.half_width / a, self.delta * rb / (1 + a * pn))
        return r, R

    def normal(self, p):
        raise NotImplementedError

    def to_json(self):
        return {"type": "prism", "p": self.p.tolist(), "normal": self.u.tolist(),
                "delta": self.delta, "half_width": self.half_width,
                "base": self.base.to_json()}


class HalfspaceBody(NormBody):
    """{x : <a_i, x> <= b_i} with b > 0; convex but not necessarily symmetric."""

    is_symmetric = False

    def __init__(self, A, b):
        self.A = np.array(A, dtype=float)
        self.b = np.array(b, dtype=float)
        if np.any(self.b <= 0):
            raise ValueError("the origin must be interior (b > 0)")
        self.n = self.A.shape[1]
        self._W = self.A / self.b[:, None]

    @classmethod
    def from_vertices(cls, V, center=None):
        """Polygon through the given vertices (n = 2), relative to its centroid."""
        from scipy.spatial import ConvexHull

        V = np.asarray(V, dtype=float)
        hull = ConvexHull(V)
        c = V[hull.vertices].mean(axis=0) if center is None else np.asarray(center, float)
        A = hull.equations[:, :-1]
        b = -hull.equations[:, -1] - A @ c
        return cls(A, b), c

    def _gauge_rows(self, X):
        return np.maximum((X @ self._W.T).max(axis=1), 0.0)

    @property
    def sandwich(self):
        r = float(np.min(self.b / np.linalg.norm(self.A, axis=1)))
        return r, float(np.sqrt((self.vertices ** 2).sum(axis=1)).max())

    @cached_property
    def vertices(self):
        verts = []
        for rows in itertools.combinations(range(len(self.b)), self.n):
            M = self._W[list(rows)]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            x = np.linalg.solve(M, np.ones(self.n))
            if (self._W @ x).max() <= 1 + 1e-9:
                verts.append(x)
        return np.unique(np.round(np.array(verts), 12), axis=0)

    def symmetric_part(self) -> PolytopeH:
        """The symmetric slab body {|<a_i, x>| <= b_i}, contained in K and -K."""
        return PolytopeH(self.A, self.b)

    def to_json(self):
        return {"type": "halfspace", "A": self.A.tolist(), "b": self.b.tolist()}


class OracleBody(NormBody):
    """Body given by a gauge callback and explicit sandwich radii.

    Without radii the body can still be evaluated but not normalized.
    """

    def __init__(self, n, gauge_fn, sandwich=None, smoothness=None, normal_fn=None):
        self.n = int(n)
        self._fn = gauge_fn
        self._sandwich = None if sandwich is None else tuple(map(float, sandwich))
        self.smoothness = smoothness
        self._normal = normal_fn

    def _gauge_rows(self, X):
        return np.array([float(self._fn(x)) for x in X])

    @property
    def sandwich(self):
        if self._sandwich is None:
            raise NotImplementedError("oracle body without sandwich radii")
        return self._sandwich

    def normal(self, p):
        if self._normal is None:
            raise NotImplementedError("oracle body without a separation callback")
        return self._normal(p)


def body_from_json(d: dict, n: int | None = None) -> NormBody:
    kind = d["type"]
    if kind == "lp":
        p = d["p"]
        if p in ("inf", float("inf")):
            return cube(n)
        return Lp(float(p), n if n is not None else d["n"])
    if kind == "polytope":
        return PolytopeH(d["A"], d["b"])
    if kind == "zonotope":
        return Zonotope(d["gens"])
    if kind == "halfspace":
        return HalfspaceBody(d["A"], d["b"])
    if kind == "scaled":
        return Scaled(body_from_json(d["base"], n), d["s"])
    if kind == "prism":
        base = body_from_json(d["base"], n)
        return PrismSlice(base, d["p"], d["normal"], d["delta"], d["half_width"])
    raise ValueError(f"unknown body type {kind!r}")


def lp_profile(p: float) -> SmoothnessProfile:
    """Power-type bound on the l_p modulus: (2^p, 2) for p >= 2, (1/p, p) below."""
    if p >= 2:
        return SmoothnessProfile(2.0 ** p, 2.0)
    return SmoothnessProfile(1.0 / p, float(p))


def modulus_lp(p: float, tau):
    """Closed-form modulus of smoothness of the l_p unit ball."""
    tau = np.asarray(tau, dtype=float)
    if np.any((tau <= 0) | (tau >= 1)):
        raise DomainError("tau must lie in (0, 1)")
    if p >= 2:
        val = (((1 + tau) ** p + np.abs(1 - tau) ** p) / 2) ** (1 / p) - 1
    else:
        val = (1 + tau ** p) ** (1 / p) - 1
    return float(val) if val.ndim == 0 else val


def pair_values(body: NormBody, X, Y, tau: float) -> np.ndarray:
    """0.5*(|x + tau y| + |x - tau y| - 2) for unit rows x, y."""
    return 0.5 * (body.gauge(X + tau * Y) + body.gauge(X - tau * Y) - 2.0)


def modulus_estimate(body: NormBody, tau: float, trials: int, rng, refine: int = 8) -> float:
    """Lower estimate of the modulus of smoothness at tau.

    Random unit pairs are scored, then the best few are locally refined with
    Nelder-Mead.  Every reported value is attained by an explicit pair, so the
    estimate never exceeds the true supremum.
    """
    if not 0 < tau < 1:
        raise DomainError("tau must lie in (0, 1)")
    n = body.n
    best = -np.inf
    starts = []
    chunk = 20000
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        X = body.sample_boundary(rng, k)
        Y = body.sample_boundary(rng, k)
        v = pair_values(body, X, Y, tau)
        order = np.argsort(v)[::-1][:refine]
        starts.extend((float(v[i]), X[i], Y[i]) for i in order)
        best = max(best, float(v.max()))
        done += k
    starts.sort(key=lambda s: -s[0])

    def objective(z):
        x, y = z[:n], z[n:]
        gx, gy = body.gauge(x), body.gauge(y)
        if gx <= 0 or gy <= 0:
            return 0.0
        return -pair_values(body, (x / gx)[None], (y / gy)[None], tau)[0]

    for _, x0, y0 in starts[:refine]:
        res = minimize(objective, np.concatenate([x0, y0]), method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000 * n})
        best = max(best, -float(res.fun))
    return best
