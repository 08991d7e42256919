"""(2, eps)-coverings of symmetric convex bodies.

A covering of K is a family of centred bodies Q_i with translations c_i such
that K is inside the union of the c_i + Q_i and every doubled piece
c_i + 2 Q_i stays inside (1 + eps) K.

Small coverings are stored as explicit piece lists.  The structured
constructions (grid, zonotope, polytope, cap-cylinder) can have millions of
pieces in dimension 4 or 5, so they are implicit: pieces are generated on
demand and ``locate`` finds a piece containing a given point directly from the
geometry of the construction.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import cKDTree

from . import config
from .errors import BudgetExceeded, Infeasible, InvalidCovering, MissingSmoothness
from .norms import (
    NormBody, PolytopeH, PrismSlice, Scaled, Zonotope, body_from_json,
)


@dataclass(frozen=True, eq=False)
class CoveringBody:
    """A centred piece ``body`` translated to ``center``."""

    body: NormBody
    center: np.ndarray

    def gauge(self, X):
        return self.body.gauge(np.asarray(X, dtype=float) - self.center)

    def contains(self, x, factor: float = 1.0) -> bool:
        return self.gauge(x) <= factor * (1 + config.tol())

    def scaled(self, lam: float) -> "CoveringBody":
        return CoveringBody(Scaled(self.body, lam), lam * np.asarray(self.center))

    def to_json(self) -> dict:
        return {"center": np.asarray(self.center, dtype=float).tolist(),
                "body": self.body.to_json()}


class Covering:
    """Explicit list of pieces covering ``parent`` with parameter ``epsilon``."""

    scale_factor = 2

    def __init__(self, pieces, epsilon: float, parent: NormBody, raw_count: int | None = None):
        self._pieces = list(pieces)
        self.epsilon = float(epsilon)
        self.parent = parent
        self.raw_count = len(self._pieces) if raw_count is None else int(raw_count)

    @property
    def n(self) -> int:
        return self.parent.n

    def __len__(self):
        return len(self._pieces)

    def __iter__(self):
        return iter(self._pieces)

    def __repr__(self):
        return f"{type(self).__name__}(pieces={len(self)}, eps={self.epsilon:.6g})"

    @property
    def is_explicit(self) -> bool:
        return True

    def sample_pieces(self, rng, count: int) -> list[CoveringBody]:
        if count >= len(self):
            return list(self)
        idx = rng.choice(len(self), size=count, replace=False)
        return [self._pieces[i] for i in sorted(idx)]

    def piece_gauges(self, Y) -> np.ndarray:
        """Matrix of gauges gauge_{Q_i}(y - c_i), one row per point."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        return np.column_stack([q.gauge(Y) for q in self]) if len(self) else np.full((len(Y), 0), np.inf)

    def locate(self, y) -> CoveringBody | None:
        """A piece containing y, or None."""
        g = self.piece_gauges(y)[0]
        if len(g) == 0:
            return None
        i = int(np.argmin(g))
        return self._pieces[i] if g[i] <= 1 + config.tol() else None

    def find_hit(self, y, factor: float = 2.0) -> CoveringBody | None:
        """A piece whose ``factor``-homothet contains y.

        Sound (never returns a piece not containing y in its homothet) and
        complete for points of the parent body.
        """
        g = self.piece_gauges(y)[0]
        if len(g) == 0:
            return None
        i = int(np.argmin(g))
        return self._pieces[i] if g[i] <= factor * (1 + config.tol()) else None

    def coverage_margins(self, Y) -> np.ndarray:
        """For each point, min_i gauge_{Q_i}(y - c_i) - 1 (inf when uncovered)."""
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        if not self.is_explicit or len(self) > 5000:
            out = np.empty(len(Y))
            for j, y in enumerate(Y):
                q = self.locate(y)
                out[j] = np.inf if q is None else q.gauge(y) - 1.0
            return out
        return self.piece_gauges(Y).min(axis=1) - 1.0

    def containment_certificate(self) -> float | None:
        """Exact worst value of max gauge_K(c + 2Q) - (1 + eps), when the
        construction admits one; None otherwise."""
        return None

    def scaled(self, lam: float) -> "Covering":
        return ScaledCovering(self, lam)

    def to_json(self) -> dict:
        if len(self) > config.MAX_MATERIALIZED:
            raise BudgetExceeded(f"{len(self)} pieces exceed the serialization budget")
        return {"epsilon": self.epsilon, "scale_factor": self.scale_factor, "n": self.n,
                "parent": self.parent.to_json(), "raw_count": self.raw_count,
                "pieces": [q.to_json() for q in self]}


def covering_from_json(d: dict, n: int | None = None) -> Covering:
    parent = body_from_json(d["parent"], d.get("n", n))
    pieces = [CoveringBody(body_from_json(p["body"], parent.n), np.array(p["center"], dtype=float))
              for p in d["pieces"]]
    return Covering(pieces, d["epsilon"], parent, d.get("raw_count"))


class ScaledCovering(Covering):
    """The covering {lam Q_i + lam c_i} of lam K."""

    def __init__(self, base: Covering, lam: float):
        self.base = base
        self.lam = float(lam)
        self.epsilon = base.epsilon
        self.parent = Scaled(base.parent, lam)
        self.raw_count = base.raw_count

    @property
    def is_explicit(self):
        return self.base.is_explicit

    def __len__(self):
        return len(self.base)

    def __iter__(self):
        return (q.scaled(self.lam) for q in self.base)

    def sample_pieces(self, rng, count):
        return [q.scaled(self.lam) for q in self.base.sample_pieces(rng, count)]

    def piece_gauges(self, Y):
        return self.base.piece_gauges(np.asarray(Y, dtype=float) / self.lam)

    def locate(self, y):
        q = self.base.locate(np.asarray(y, dtype=float) / self.lam)
        return None if q is None else q.scaled(self.lam)

    def find_hit(self, y, factor=2.0):
        q = self.base.find_hit(np.asarray(y, dtype=float) / self.lam, factor)
        return None if q is None else q.scaled(self.lam)

    def coverage_margins(self, Y):
        return self.base.coverage_margins(np.asarray(Y, dtype=float) / self.lam)

    def containment_certificate(self):
        return self.base.containment_certificate()


# ---------------------------------------------------------------------------
# grid coverings by homothets (eps/2) K


def _pull_in(body: NormBody, X: np.ndarray) -> np.ndarray:
    g = body.gauge(X)
    return X / np.maximum(g, 1.0)[:, None]


def _box_half_widths(body: NormBody) -> np.ndarray:
    box = getattr(body, "box", None)
    if box is not None:
        return np.asarray(box, dtype=float)
    return np.full(body.n, body.sandwich[1])


class GreedyGridCovering(Covering):
    """Explicit covering whose centres form a greedy net of a fine grid."""

    def __init__(self, centers, epsilon, parent, raw_count=None):
        piece = Scaled(parent, epsilon / 2)
        super().__init__([CoveringBody(piece, c) for c in centers], epsilon, parent, raw_count)
        self.centers = np.asarray(centers, dtype=float)
        self._piece = piece
        self._tree = cKDTree(self.centers)
        self._R = parent.sandwich[1]

    def _nearby(self, y, gauge_radius):
        idx = self._tree.query_ball_point(np.asarray(y, dtype=float), gauge_radius * self._R * (1 + 1e-9))
        if not idx:
            return None, np.inf
        idx = np.asarray(idx)
        g = self._piece.gauge(np.asarray(y, dtype=float) - self.centers[idx])
        j = int(np.argmin(g))
        return int(idx[j]), float(g[j])

    def locate(self, y):
        i, g = self._nearby(y, self.epsilon / 2)
        return self._pieces[i] if i is not None and g <= 1 + config.tol() else None

    def find_hit(self, y, factor=2.0):
        i, g = self._nearby(y, factor * self.epsilon / 2)
        return self._pieces[i] if i is not None and g <= factor * (1 + config.tol()) else None

    def coverage_margins(self, Y):
        Y = np.atleast_2d(np.asarray(Y, dtype=float))
        out = np.full(len(Y), np.inf)
        for j, y in enumerate(Y):
            i, g = self._nearby(y, self.epsilon)
            if i is not None:
                out[j] = g - 1.0
        return out

    def containment_certificate(self):
        # c + eps K lies in (1 + eps) K for centres in K (subadditivity)
        return float(self.parent.gauge(self.centers).max()) - 1.0


class LatticeGridCovering(Covering):
    """Implicit covering: grid points of spacing h pulled into K."""

    def __init__(self, parent: NormBody, epsilon: float):
        self.parent = parent
        self.epsilon = float(epsilon)
        n = parent.n
        r, _ = parent.sandwich
        self.h = self.epsilon * r / (2.0 * math.sqrt(n))
        self._piece = Scaled(parent, self.epsilon / 2)
        self._half = np.ceil(_box_half_widths(parent) * (1 + self.epsilon / 4) / self.h).astype(int)
        self._count = None

    @property
    def is_explicit(self):
        return False

    def _grid_rows(self):
        n = self.n
        ranges = [np.arange(-k, k + 1) for k in self._half]
        total = int(np.prod([len(a) for a in ranges]))
        if total > 50 * config.MAX_ENUM_POINTS:
            raise BudgetExceeded(f"grid of {total} points exceeds the enumeration budget")
        # chunk over the first coordinate to bound memory
        rest = np.array(list(itertools.product(*ranges[1:]))).reshape(-1, n - 1) if n > 1 else np.zeros((1, 0))
        for a in ranges[0]:
            Z = np.hstack([np.full((len(rest), 1), a), rest]) * self.h
            yield Z[self.parent.gauge(Z) <= 1 + self.epsilon / 4 + 1e-12]

    def __len__(self):
        if self._count is None:
            self._count = sum(len(Z) for Z in self._grid_rows())
        return self._count

    @property
    def raw_count(self):
        return len(self)

    def __iter__(self):
        for Z in self._grid_rows():
            for c in _pull_in(self.parent, Z):
                yield CoveringBody(self._piece, c)

    def sample_pieces(self, rng, count):
        out = []
        while len(out) < count:
            Z = rng.integers(-self._half, self._half + 1, size=(4 * count, self.n)) * self.h
            Z = Z[self.parent.gauge(Z) <= 1 + self.epsilon / 4 + 1e-12]
            out.extend(CoveringBody(self._piece, c) for c in _pull_in(self.parent, Z))
        return out[:count]

    def _candidate(self, y):
        y = np.asarray(y, dtype=float)
        g = self.parent.gauge(y)
        u = y / max(1.0, g)
        c = _pull_in(self.parent, (np.round(u / self.h) * self.h)[None])[0]
        return CoveringBody(self._piece, c), g

    def locate(self, y):
        q, g = self._candidate(y)
        if g > 1 + config.tol():
            return None
        return q if q.gauge(y) <= 1 + config.tol() else None

    def find_hit(self, y, factor=2.0):
        q, g = self._candidate(y)
        if g > 1 + self.epsilon + config.tol():
            return None
        return q if q.gauge(y) <= factor * (1 + config.tol()) else None

    def containment_certificate(self):
        return 0.0


def cover_grid(body: NormBody, eps: float, method: str = "auto") -> Covering:
    """Cover ``body`` by translates of (eps/2) * body centred inside it.

    ``method`` is "greedy" (explicit greedy net of a fine grid, small n),
    "lattice" (implicit grid) or "auto".
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = body.n
    r, R = body.sandwich
    # candidate grid: every point of K within gauge eps/16 of a grid point
    g = eps * r / (8.0 * math.sqrt(n))
    half = np.ceil(_box_half_widths(body) * (1 + eps / 16) / g).astype(int)
    n_cand = float(np.prod(2.0 * half + 1))
    if method == "auto":
        method = "greedy" if n_cand <= config.MAX_GREEDY_CANDIDATES else "lattice"
    if method == "lattice":
        return LatticeGridCovering(body, eps)
    if method != "greedy":
        raise ValueError(f"unknown grid method {method!r}")
    if n_cand > 10 * config.MAX_GREEDY_CANDIDATES:
        raise BudgetExceeded(f"{n_cand:.0f} grid candidates exceed the budget")
    axes = [np.arange(-k, k + 1) * g for k in half]
    Z = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    Z = Z[body.gauge(Z) <= 1 + eps / 16 + 1e-12]
    C = _pull_in(body, Z)
    # greedy: each candidate ends within gauge 3 eps / 8 of a centre
    rho = 3 * eps / 8
    tree = cKDTree(C)
    covered = np.zeros(len(C), dtype=bool)
    centers = []
    for i in range(len(C)):
        if covered[i]:
            continue
        centers.append(C[i])
        idx = np.asarray(tree.query_ball_point(C[i], rho * R * (1 + 1e-9)))
        idx = idx[body.gauge(C[idx] - C[i]) <= rho]
        covered[idx] = True
        if len(centers) > config.MAX_PIECES:
            raise BudgetExceeded("greedy covering exceeds the piece budget")
    return GreedyGridCovering(np.array(centers), eps, body)


# ---------------------------------------------------------------------------
# zonotopes


def zonotope_k(eps: float) -> int:
    """Smallest k with 1/(2^k - 1) <= eps."""
    k = max(1, math.ceil(math.log2(1 + 1 / eps) - 1e-9))
    while 1.0 / (2 ** k - 1) > eps * (1 + 1e-12):
        k += 1
    return k


class ZonotopeCovering(Covering):
    """Product construction over the generator coefficients.

    Per generator, the coefficient interval [-1, 1] is covered by the 2k
    intervals with centre d (1 - (2^j - 1) e) and half-width 2^(j-1) e,
    d = +-1, j = 1..k; the two j = k intervals coincide.
    """

    def __init__(self, zono: Zonotope, k: int):
        if not zono.full:
            raise InvalidCovering("zonotope is not full dimensional")
        self.parent = zono
        self.k = k
        self.epsilon = 1.0 / (2 ** k - 1)
        e = self.epsilon
        opts = []
        for d in (1, -1):
            for j in range(1, k + 1):
                gamma = d * (1 - (2 ** j - 1) * e)
                if j == k:
                    gamma = 0.0
                    if d == -1:
                        continue
                opts.append((gamma, 2 ** (j - 1) * e))
        self.options = opts  # (centre, half-width) per generator
        self._bodies = {}

    @property
    def is_explicit(self):
        return False

    @property
    def raw_count(self):
        return (2 * self.k) ** self.parent.m

    def __len__(self):
        return len(self.options) ** self.parent.m

    def _piece(self, choice) -> CoveringBody:
        gam = np.array([self.options[c][0] for c in choice])
        h = tuple(self.options[c][1] for c in choice)
        body = self._bodies.get(h)
        if body is None:
            body = self.parent.with_scaled_generators(h)
            self._bodies[h] = body
        return CoveringBody(body, gam @ self.parent.gens)

    def __iter__(self):
        for choice in itertools.product(range(len(self.options)), repeat=self.parent.m):
            yield self._piece(choice)

    def sample_pieces(self, rng, count):
        m = self.parent.m
        return [self._piece(rng.integers(0, len(self.options), size=m)) for _ in range(count)]

    def interval_index(self, lam: float) -> int:
        """Index of an option interval containing the coefficient lam."""
        lam = min(1.0, max(-1.0, lam))
        best, best_slack = 0, -np.inf
        for i, (g, h) in enumerate(self.options):
            slack = h - abs(lam - g)
            if slack >= 0:
                return i
            if slack > best_slack:
                best, best_slack = i, slack
        return best

    def _piece_for(self, y, pull: bool):
        y = np.asarray(y, dtype=float)
        lam = self.parent.coefficients(y)
        g = float(np.abs(lam).max())
        if pull and g > 1:
            lam = lam / g
        return self._piece([self.interval_index(v) for v in lam]), g

    def locate(self, y):
        q, g = self._piece_for(y, pull=False)
        if g > 1 + config.tol():
            return None
        return q if q.gauge(y) <= 1 + config.tol() else None

    def find_hit(self, y, factor=2.0):
        if self.parent.gauge(y) > 1 + self.epsilon + config.tol():
            return None
        q, _ = self._piece_for(y, pull=True)
        return q if q.gauge(y) <= factor * (1 + config.tol()) else None

    def containment_certificate(self):
        # c + 2Q has coefficients in prod [gamma - 2h, gamma + 2h]
        worst = max(abs(g) + 2 * h for g, h in self.options)
        return worst - (1 + self.epsilon)


def cover_zonotope(gens, eps: float) -> ZonotopeCovering:
    """(2, eps)-covering of the zonotope with the given generator rows.

    eps is rounded down to 1/(2^k - 1); the effective value is ``.epsilon``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    zono = gens if isinstance(gens, Zonotope) else Zonotope(gens)
    return ZonotopeCovering(zono, zonotope_k(eps))


# ---------------------------------------------------------------------------
# polytopes


def polytope_k(eps: float) -> int:
    """Smallest k with 1/((4/3)^k - 1) <= eps."""
    k = max(1, math.ceil(math.log(1 + 1 / eps) / math.log(4 / 3) - 1e-9))
    while 1.0 / ((4 / 3) ** k - 1) > eps * (1 + 1e-12):
        k += 1
    return k


def _chebyshev(W, lo, hi):
    """Chebyshev centre and radius of {lo <= W x <= hi} (None if empty)."""
    m, n = W.shape
    norms = np.linalg.norm(W, axis=1)
    A = np.vstack([np.hstack([W, norms[:, None]]), np.hstack([-W, norms[:, None]])])
    b = np.concatenate([hi, -lo])
    c = np.zeros(n + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(None, None)] * n + [(0, None)], method="highs")
    if res.status != 0:
        return None, -1.0
    return res.x[:n], float(res.x[-1])


def _analytic_center(W, lo, hi, x0, iters=50):
    """Newton's method for the analytic centre of the slab system."""
    x = np.array(x0, dtype=float)

    def f(x):
        z = W @ x
        s1, s2 = z - lo, hi - z
        if np.any(s1 <= 0) or np.any(s2 <= 0):
            return np.inf
        return -np.log(s1).sum() - np.log(s2).sum()

    for _ in range(iters):
        z = W @ x
        s1, s2 = z - lo, hi - z
        grad = W.T @ (-1 / s1 + 1 / s2)
        H = W.T @ ((1 / s1 ** 2 + 1 / s2 ** 2)[:, None] * W)
        step = np.linalg.solve(H, -grad)
        dec = -grad @ step
        if dec < 1e-20:
            break
        t, fx = 1.0, f(x)
        while f(x + t * step) > fx - 0.25 * t * dec and t > 1e-12:
            t *= 0.5
        x = x + t * step
    return x


def _analytic_centers(W, lo, hi, x0, iters=50):
    """Batched form of ``_analytic_center``: one row of lo, hi, x0 per system."""
    x = np.array(x0, dtype=float)

    def f(x, rows):
        z = x @ W.T
        s1, s2 = z - lo[rows], hi[rows] - z
        bad = np.any(s1 <= 0, axis=1) | np.any(s2 <= 0, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = -np.log(np.where(s1 > 0, s1, 1)).sum(1) - np.log(np.where(s2 > 0, s2, 1)).sum(1)
        return np.where(bad, np.inf, v)

    rows = np.arange(len(x))
    for _ in range(iters):
        xr = x[rows]
        z = xr @ W.T
        s1, s2 = z - lo[rows], hi[rows] - z
        grad = (-1 / s1 + 1 / s2) @ W
        H = np.einsum("km,mi,mj->kij", 1 / s1 ** 2 + 1 / s2 ** 2, W, W)
        step = -np.linalg.solve(H, grad[..., None])[..., 0]
        dec = -(grad * step).sum(1)
        keep = dec >= 1e-20
        rows, xr, step, dec = rows[keep], xr[keep], step[keep], dec[keep]
        if len(rows) == 0:
            break
        t = np.ones(len(rows))
        fx = f(xr, rows)
        todo = np.arange(len(rows))
        for _ in range(45):
            r = rows[todo]
            bad = f(xr[todo] + t[todo, None] * step[todo], r) > fx[todo] - 0.25 * t[todo] * dec[todo]
            todo = todo[bad]
            t[todo] *= 0.5
            todo = todo[t[todo] > 1e-12]
            if len(todo) == 0:
                break
        t[t <= 1e-12] = 0.0
        x[rows] = xr + t[:, None] * step
    return x


class PolytopeCovering(Covering):
    """Slab-cell construction.

    Each facet pair |<a_i, x>| <= b_i is cut into 2k slabs at the levels
    beta_a = 1 - ((4/3)^a - 1) e (and their negatives).  A piece is a nonempty
    cell of the resulting arrangement, symmetrized about an interior witness
    by doubling each slab constraint.
    """

    def __init__(self, poly: PolytopeH, k: int):
        self.parent = poly
        self.k = k
        self.epsilon = 1.0 / ((4 / 3) ** k - 1)
        e = self.epsilon
        beta = [1 - ((4 / 3) ** a - 1) * e for a in range(k + 1)]
        beta[k] = 0.0
        self.beta = beta
        # option (delta, alpha) -> interval of z = <a_i, x> / b_i
        self.options = [(d, a) for d in (1, -1) for a in range(1, k + 1)]
        self.intervals = np.array([(beta[a], beta[a - 1]) if d == 1 else (-beta[a - 1], -beta[a])
                                   for d, a in self.options])
        self.W = poly._W
        self.square = poly.m == poly.n
        if self.square:
            self._Winv = np.linalg.inv(self.W)
        # with one redundant facet the image of W is the hyperplane <c, z> = 0
        self._normal = None
        self._hp = self._hp_index = None
        if poly.m == poly.n + 1:
            c = np.linalg.svd(self.W.T)[2][-1]
            self._normal = c / np.abs(c).max()
        self._cells = {}
        self._listing = None

    @property
    def is_explicit(self):
        return False

    @property
    def raw_count(self):
        return (2 * self.k) ** self.parent.m

    def _cell(self, choice) -> CoveringBody | None:
        choice = tuple(int(c) for c in choice)
        if choice in self._cells:
            return self._cells[choice]
        iv = self.intervals[list(choice)]
        lo, hi = iv[:, 0], iv[:, 1]
        if self.square:
            x = self._Winv @ ((lo + hi) / 2)
        elif self._normal is not None:
            if self._hp is not None:
                i = self._hp_index.get(choice)
                if i is None:
                    return None
                x = self._hp[1][i]
            else:
                x0 = self._hyperplane_starts(lo[None], hi[None])[0]
                if x0 is None:
                    self._cells[choice] = None
                    return None
                x = _analytic_center(self.W, lo, hi, x0)
        else:
            x0, rad = _chebyshev(self.W, lo, hi)
            if x0 is None or rad <= 1e-10:
                self._cells[choice] = None
                return None
            x = _analytic_center(self.W, lo, hi, x0)
        z = self.W @ x
        w = np.maximum(hi - z, z - lo)
        piece = CoveringBody(PolytopeH(self.parent.A, self.parent.b * w), x)
        if len(self._cells) < config.MAX_MATERIALIZED:
            self._cells[choice] = piece
        return piece

    def _hyperplane_starts(self, lo, hi):
        """Interior points of cells cut by the hyperplane image (None where empty).

        Along z(l) = mid + l sign(c) half the value <c, z> is linear in l, so
        the cell has interior exactly when the root l* satisfies |l*| < 1.
        """
        c = self._normal
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        spread = half @ np.abs(c)
        lam = -(mid @ c) / spread
        ok = np.abs(lam) < 1 - 1e-9
        Z = mid + lam[:, None] * np.sign(c) * half
        X = np.linalg.lstsq(self.W, Z[ok].T, rcond=None)[0].T
        out = np.empty(len(lo), dtype=object)
        out[:] = None
        for i, x in zip(np.flatnonzero(ok), X):
            out[i] = x
        return out

    def _all_cells(self):
        if self._listing is None:
            if self._normal is not None:
                self._listing = self._list_hyperplane_cells()
                return self._listing
            if self.raw_count > config.MAX_MATERIALIZED:
                raise BudgetExceeded(f"{self.raw_count} cells exceed the enumeration budget")
            self._listing = [c for c in itertools.product(range(2 * self.k), repeat=self.parent.m)
                             if self._cell(c) is not None]
        return self._listing

    def _list_hyperplane_cells(self):
        if self.raw_count > config.MAX_PIECES:
            raise BudgetExceeded(f"{self.raw_count} cells exceed the enumeration budget")
        m = self.parent.m
        C = np.indices((2 * self.k,) * m).reshape(m, -1).T
        lo, hi = self.intervals[C, 0], self.intervals[C, 1]
        c = self._normal
        mid, half = (lo + hi) / 2, (hi - lo) / 2
        lam = -(mid @ c) / (half @ np.abs(c))
        keep = np.flatnonzero(np.abs(lam) < 1 - 1e-9)
        C, lo, hi = C[keep], lo[keep], hi[keep]
        Z = mid[keep] + lam[keep, None] * np.sign(c) * half[keep]
        X0 = np.linalg.lstsq(self.W, Z.T, rcond=None)[0].T
        X = _analytic_centers(self.W, lo, hi, X0)
        # compact storage; bodies are built on demand
        listing = list(map(tuple, C.tolist()))
        self._hp = (C, X, lo, hi)
        self._hp_index = {choice: i for i, choice in enumerate(listing)}
        return listing

    def __len__(self):
        if self.square:
            return self.raw_count
        return len(self._all_cells())

    def __iter__(self):
        if self.square:
            for choice in itertools.product(range(2 * self.k), repeat=self.parent.m):
                yield self._cell(choice)
        else:
            for choice in self._all_cells():
                yield self._cell(choice)

    def sample_pieces(self, rng, count):
        if self.square:
            return [self._cell(rng.integers(0, 2 * self.k, size=self.parent.m)) for _ in range(count)]
        cells = self._all_cells()
        idx = rng.choice(len(cells), size=min(count, len(cells)), replace=False)
        return [self._cell(cells[i]) for i in idx]

    def option_index(self, z: float) -> int:
        """Index of a slab option whose interval contains the level z."""
        z = min(1.0, max(-1.0, z))
        d = 1 if z >= 0 else -1
        a = abs(z)
        for alpha in range(1, self.k + 1):
            if a >= self.beta[alpha] - 1e-15:
                return self.options.index((d, alpha))
        return self.options.index((d, self.k))

    def _piece_for(self, y, pull: bool):
        z = self.W @ np.asarray(y, dtype=float)
        g = float(np.abs(z).max())
        if pull and g > 1:
            z = z / g
        return self._cell([self.option_index(v) for v in z]), g

    def locate(self, y):
        q, g = self._piece_for(y, pull=False)
        if g > 1 + config.tol() or q is None:
            return None
        return q if q.gauge(y) <= 1 + config.tol() else None

    def find_hit(self, y, factor=2.0):
        q, g = self._piece_for(y, pull=True)
        if g > 1 + self.epsilon + config.tol() or q is None:
            return None
        return q if q.gauge(y) <= factor * (1 + config.tol()) else None

    def containment_certificate(self):
        # |<a_i, c + 2y>| / b_i <= |z_i| + 2 w_i for y in the piece
        one = 1 + self.epsilon
        if self.square:
            iv = self.intervals
            mid = (iv[:, 0] + iv[:, 1]) / 2
            half = (iv[:, 1] - iv[:, 0]) / 2
            return float((np.abs(mid) + 2 * half).max()) - one
        if self._normal is not None:
            self._all_cells()
            _, X, lo, hi = self._hp
            Z = X @ self.W.T
            return float((np.abs(Z) + 2 * np.maximum(hi - Z, Z - lo)).max()) - one
        worst = -np.inf
        for choice in self._all_cells():
            q = self._cell(choice)
            z = self.W @ q.center
            w = q.body.b / self.parent.b
            worst = max(worst, float((np.abs(z) + 2 * w).max()))
        return worst - one


def cover_polytope(A, b, eps: float) -> PolytopeCovering:
    """(2, eps)-covering of {x : |<a_i, x>| <= b_i}.

    eps is rounded down to 1/((4/3)^k - 1); the effective value is ``.epsilon``.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    b = np.asarray(b, dtype=float)
    if np.any(b <= 0):
        raise Infeasible("b must be positive for a symmetric polytope with interior")
    poly = PolytopeH(A, b)
    return PolytopeCovering(poly, polytope_k(eps))


# ---------------------------------------------------------------------------
# smooth bodies: cap cylinders over a boundary net


def slice_geometry(i: int, e: float) -> tuple[float, float]:
    """Centroid t0 (along p) and half-width of the i-th cylinder slice."""
    return 1 - (1.5 * 2 ** (i - 1) - 1) * e, 2 ** (i - 2) * e


def _cap_delta(profile, e: float) -> float:
    return min(0.25, profile.cap_radius(e))


class SmoothCovering(Covering):
    """Cap-cylinder slices over a net of the boundary.

    The net is the set of radial projections onto the boundary of the points
    of a grid on the surface of the cube [-1, 1]^n.  Its spacing is chosen so
    that every boundary point is within gauge distance delta/2 of a net point,
    which is what the slices need to cover K.  For each net point p there are
    k slices x = t p + w, t in [1 - (2^i - 1) e, 1 - (2^(i-1) - 1) e],
    gauge(w) <= delta, with e = eps/2 rounded down to 1/(2^k - 1).
    """

    def __init__(self, body: NormBody, eps: float):
        prof = body.smoothness
        if prof is None:
            raise MissingSmoothness("cap-cylinder covering needs a smoothness profile")
        self.parent = body
        self.k = zonotope_k(eps / 2)
        self.e = 1.0 / (2 ** self.k - 1)
        self.epsilon = 2 * self.e
        self.delta = _cap_delta(prof, self.e)
        n = body.n
        r, R = body.sandwich
        if n > 1:
            s = self.delta * r / (2 * R * math.sqrt(n - 1))
            self.ns = math.ceil(2 / s)
        else:
            self.ns = 1
        self.step = 2.0 / self.ns
        self.net_size = 2 * n * self.ns ** (n - 1)

    @property
    def is_explicit(self):
        return False

    def __len__(self):
        return self.net_size * self.k

    @property
    def raw_count(self):
        return len(self)

    def net_point(self, axis: int, sign: int, idx) -> np.ndarray:
        z = np.empty(self.n)
        others = [j for j in range(self.n) if j != axis]
        z[others] = -1 + self.step * (np.asarray(idx) + 0.5)
        z[axis] = sign
        return z / self.parent.gauge(z)

    def net(self):
        n = self.n
        for axis in range(n):
            for sign in (1, -1):
                for idx in itertools.product(range(self.ns), repeat=n - 1):
                    yield self.net_point(axis, sign, idx)

    def slice(self, p, i: int, normal=None) -> CoveringBody:
        u = self.parent.normal(p) if normal is None else normal
        t0, hw = slice_geometry(i, self.e)
        return CoveringBody(PrismSlice(self.parent, p, u, self.delta, hw), t0 * np.asarray(p))

    def __iter__(self):
        for p in self.net():
            u = self.parent.normal(p)
            for i in range(1, self.k + 1):
                yield self.slice(p, i, u)

    def sample_pieces(self, rng, count):
        out = []
        n = self.n
        for _ in range(count):
            axis = int(rng.integers(n))
            sign = int(rng.choice([1, -1]))
            p = self.net_point(axis, sign, rng.integers(0, self.ns, size=n - 1))
            out.append(self.slice(p, int(rng.integers(1, self.k + 1))))
        return out

    def slice_index(self, t: float) -> int:
        for i in range(1, self.k + 1):
            if t >= 1 - (2 ** i - 1) * self.e - 1e-15:
                return i
        return self.k

    def _piece_for(self, y, pull: bool):
        y = np.asarray(y, dtype=float)
        g = self.parent.gauge(y)
        u = y / g if g > 0 else np.eye(self.n)[0] / self.parent.gauge(np.eye(self.n)[0])
        z = u / np.abs(u).max()
        axis = int(np.argmax(np.abs(z)))
        others = [j for j in range(self.n) if j != axis]
        idx = np.clip(np.floor((z[others] + 1) / self.step), 0, self.ns - 1).astype(int)
        p = self.net_point(axis, 1 if z[axis] > 0 else -1, idx)
        nrm = self.parent.normal(p)
        x = y / max(1.0, g) if pull else y
        return self.slice(p, self.slice_index(float(nrm @ x)), nrm), g

    def locate(self, y):
        q, g = self._piece_for(y, pull=False)
        if g > 1 + config.tol():
            return None
        return q if q.gauge(y) <= 1 + config.tol() else None

    def find_hit(self, y, factor=2.0):
        q, g = self._piece_for(y, pull=True)
        if g > 1 + self.epsilon + config.tol():
            return None
        return q if q.gauge(y) <= factor * (1 + config.tol()) else None


def cover_smooth(body: NormBody, eps: float, strict_threshold: bool = False) -> Covering:
    """Cap-cylinder covering of a body with a smoothness profile (C, q).

    The construction is valid for every eps; its size bound needs
    eps <= threshold.  With ``strict_threshold`` larger eps fall back to
    ``cover_grid``, as in the counting argument.
    """
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    if body.smoothness is None:
        raise MissingSmoothness("body has no smoothness profile")
    if strict_threshold and eps > body.smoothness.threshold:
        return cover_grid(body, eps)
    return SmoothCovering(body, eps)


# ---------------------------------------------------------------------------
# symmetrization of non-symmetric pieces


def symmetrize(cov: Covering, max_per_piece: int | None = None) -> Covering:
    """Replace every non-symmetric piece by symmetric pieces.

    A piece c + Q (Q given by halfspaces <a_i, x> <= b_i around its centroid)
    is replaced by translates b_j + S/2, S = {|<a_i, x>| <= b_i}, at a greedy
    packing of points b_j of c + Q.  Since S is inside Q - c, each
    b_j + S lies in c + 2(Q - c), so the doubled pieces keep the containment
    property.  Symmetric pieces pass through untouched.  Non-symmetric pieces
    are supported in dimension 2.
    """
    from shapely.affinity import translate
    from shapely.geometry import MultiPoint, Polygon

    out = []
    for q in cov:
        if q.body.is_symmetric:
            out.append(q)
            continue
        if q.body.n != 2:
            raise NotImplementedError("symmetrization of non-symmetric pieces needs n = 2")
        half = PolytopeH(q.body.A, q.body.b / 2)
        region = Polygon(MultiPoint([tuple(v) for v in q.body.vertices + q.center]).convex_hull)
        shape = Polygon(MultiPoint([tuple(v) for v in half.vertices]).convex_hull)
        remaining = region
        limit = max_per_piece or 5 ** q.body.n * 4
        count = 0
        while remaining.area > 1e-12 * region.area:
            pt = remaining.representative_point()
            out.append(CoveringBody(half, np.array([pt.x, pt.y])))
            remaining = remaining.difference(translate(shape, pt.x, pt.y))
            count += 1
            if count > limit:
                raise BudgetExceeded("symmetrization did not converge")
    return Covering(out, cov.epsilon, cov.parent)


# ---------------------------------------------------------------------------
# randomized local covering


@dataclass
class LocalSample:
    pieces: list
    branch: str
    point: np.ndarray


def local_cover_parameters(body: NormBody, eps: float, branch: str | None = None) -> dict:
    """Branch and per-sample hit-probability bound used by the local sampler."""
    prof = body.smoothness
    if prof is None:
        raise MissingSmoothness("local covering needs a smoothness profile")
    e = eps / 3
    n = body.n
    if branch is None:
        branch = "large" if e > prof.threshold else "small"
    if branch not in ("large", "small"):
        raise ValueError(f"unknown branch {branch!r}")
    if branch == "large":
        return {"branch": "large", "e": e, "prob": (e / (1 + e)) ** n}
    k = zonotope_k(e)
    ee = 1.0 / (2 ** k - 1)
    delta = _cap_delta(prof, ee)
    return {"branch": "small", "e": ee, "k": k, "delta": delta,
            "prob": 0.5 * (delta / 4) ** n / (1 + delta / 4) ** n}


def local_cover_sample(body: NormBody, eps: float, rng, return_info: bool = False,
                       branch: str | None = None):
    """O(log 1/eps) pieces around a random point; each satisfies
    c + 2Q inside (1 + eps) K.

    ``branch`` forces "large" or "small"; by default it follows the
    smoothness threshold.  Both branches keep the containment property for
    every eps, only their hit probabilities differ.
    """
    par = local_cover_parameters(body, eps, branch)
    if par["branch"] == "large":
        e = par["e"]
        x = body.sample(rng, 1)[0] * (1 + e)
        pieces = [CoveringBody(Scaled(body, e), x)]
    else:
        ee, delta = par["e"], par["delta"]
        x = body.sample(rng, 1)[0] * (1 + delta / 4)
        g = body.gauge(x)
        p = x / g if g > 0 else body.sample_boundary(rng, 1)[0]
        u = body.normal(p)
        pieces = []
        for i in range(1, par["k"] + 1):
            t0, hw = slice_geometry(i, ee)
            pieces.append(CoveringBody(PrismSlice(body, p, u, delta, hw), t0 * p))
    if return_info:
        return LocalSample(pieces, par["branch"], x)
    return pieces


# ---------------------------------------------------------------------------
# validation


@dataclass
class ValidationReport:
    coverage_checked: int = 0
    coverage_violations: int = 0
    worst_coverage: float = -np.inf
    containment_checked: int = 0
    containment_violations: int = 0
    worst_containment: float = -np.inf
    certificate: float | None = None
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.coverage_violations == 0 and self.containment_violations == 0

    def to_json(self) -> dict:
        return {"ok": self.ok, "coverage_checked": self.coverage_checked,
                "coverage_violations": self.coverage_violations,
                "worst_coverage": float(self.worst_coverage),
                "containment_checked": self.containment_checked,
                "containment_violations": self.containment_violations,
                "worst_containment": float(self.worst_containment),
                "certificate": self.certificate, "notes": list(self.notes)}


def _piece_test_points(q: CoveringBody, rng, per_piece: int) -> np.ndarray:
    """Points of the boundary of c + 2Q: exact vertices when known, plus samples."""
    body = q.body
    pts = [2 * body.sample_boundary(rng, per_piece)]
    base, s = (body.base, body.s) if isinstance(body, Scaled) else (body, 1.0)
    if isinstance(base, PolytopeH) and base.m <= 8:
        pts.append(2 * s * base.vertices)
    elif isinstance(base, Zonotope) and base.m <= 10:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=base.m)))
        pts.append(2 * s * signs @ base.gens)
    return np.vstack(pts) + q.center


def validate_cover(cov: Covering, mode: str = "sampled", count: int = 10_000, rng=None,
                   max_pieces: int = 2000, per_piece: int = 32,
                   eta: float | None = None) -> ValidationReport:
    """Check coverage of K and containment of the doubled pieces in (1+eps)K.

    ``mode`` is "sampled" (uniform and boundary samples of K, boundary
    samples and vertices of each checked piece) or "vertex-exact" (only the
    exact checks: vertices of polytopal pieces and construction certificates).
    """
    rng = np.random.default_rng(0) if rng is None else rng
    eta = config.tol() if eta is None else eta
    K = cov.parent
    rep = ValidationReport()
    one = 1 + cov.epsilon
    if mode == "sampled":
        Y = np.vstack([K.sample(rng, count - count // 5), K.sample_boundary(rng, count // 5)])
        marg = cov.coverage_margins(Y)
        rep.coverage_checked = len(Y)
        rep.coverage_violations = int(np.sum(marg > eta))
        rep.worst_coverage = float(np.max(marg))
    elif mode != "vertex-exact":
        raise ValueError(f"unknown validation mode {mode!r}")

    rep.certificate = cov.containment_certificate()
    if rep.certificate is not None:
        rep.containment_checked += 1
        rep.worst_containment = rep.certificate
        if rep.certificate > eta:
            rep.containment_violations += 1
    pieces = list(cov) if len(cov) <= max_pieces else cov.sample_pieces(rng, max_pieces)
    if len(cov) > max_pieces:
        rep.notes.append(f"containment checked on {max_pieces} random pieces of {len(cov)}")
    for q in pieces:
        if mode == "vertex-exact":
            P = _piece_test_points(q, rng, 0)
        else:
            P = _piece_test_points(q, rng, per_piece)
        if len(P) == 0:
            continue
        worst = float(K.gauge(P).max()) - one
        rep.containment_checked += 1
        rep.worst_containment = max(rep.worst_containment, worst)
        if worst > eta:
            rep.containment_violations += 1
    return rep
