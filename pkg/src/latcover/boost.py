"""Boosting a 2-approximate CVP solver to a (1 + eps)-approximation.

Both solvers run a binary search over exponents f with (1 + eps)^f bracketing
the normalized distance.  At exponent M the covering pieces are scaled by
s = (1 + eps)^M and centred at t + s c_i; a hit of the inner solver proves the
distance is at most (1 + eps) s, a miss proves it is above s.

The default inner solver is exact.  With an exact solver a piece reports a
hit iff some lattice vector lies in its doubled copy, so the step reduces to
asking whether any lattice point of t + (1 + eps) s K falls in the union of
the doubled pieces; coverings answer that through ``find_hit`` without
visiting every piece.  Passing ``inner`` explicitly calls it on every piece.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import config
from .coverings import Covering, local_cover_parameters, slice_geometry
from .errors import BudgetExceeded, DimensionMismatch, InvalidCovering, MissingSandwich
from .lattice import Lattice, babai, common_denominator, enumerate_l2, exact_cvp, to_rational
from .norms import NormBody, Scaled


@dataclass
class CvpInstance:
    lattice: Lattice
    target: tuple
    norm: NormBody
    epsilon: float

    def __post_init__(self):
        self.target = to_rational(self.target)
        if len(self.target) != self.lattice.n or self.norm.n != self.lattice.n:
            raise DimensionMismatch("lattice, target and norm dimensions differ")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")

    @property
    def target_f(self) -> np.ndarray:
        return np.array([float(x) for x in self.target])


@dataclass
class NormalizedInstance:
    """Integral rescaling of an instance with K inside B_2 and d_K >= 1.

    With D the common denominator of the target and R the outer sandwich
    radius, the lattice D*L, the target D*t and the body K/R give distances
    ``scale`` = D*R times the original ones.
    """

    lattice: Lattice
    target: tuple
    norm: NormBody
    scale: float
    denominator: int
    inner_radius: float

    def to_original(self, d: float) -> float:
        return d / self.scale


def normalize_instance(inst: CvpInstance) -> NormalizedInstance:
    try:
        r, R = inst.norm.sandwich
    except NotImplementedError as exc:
        raise MissingSandwich("norm has no sandwich radii") from exc
    D = common_denominator(inst.target)
    lat = inst.lattice.scaled(D) if D != 1 else inst.lattice
    t = tuple(Fraction(x * D) for x in inst.target)
    return NormalizedInstance(lat, t, Scaled(inst.norm, 1.0 / R), D * R, D, r / R)


@dataclass
class StepRecord:
    L: int
    U: int
    M: int
    hit: bool
    L_new: int
    U_new: int
    invariant_ok: bool | None = None
    contraction_ok: bool | None = None


@dataclass
class SearchState:
    L: int
    U: int
    x: np.ndarray
    epsilon: float
    history: list = field(default_factory=list)


@dataclass
class SolveReport:
    vector: tuple
    coeffs: tuple
    distance: float
    iterations: int
    inner_calls: int
    wall_ms: float
    method: str
    epsilon: float
    opt_distance: float | None = None
    seed: int | None = None
    status: str = "ok"
    steps: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float | None:
        if self.opt_distance is None:
            return None
        if self.opt_distance == 0:
            return 1.0 if self.distance == 0 else math.inf
        return self.distance / self.opt_distance

    @property
    def invariant_ok(self) -> bool:
        return all(s.invariant_ok is not False for s in self.steps)

    @property
    def contraction_ok(self) -> bool:
        return all(s.contraction_ok is not False for s in self.steps)

    def to_json(self) -> dict:
        return {"vector": [int(v) for v in self.vector], "coeffs": [int(v) for v in self.coeffs],
                "distance": self.distance, "opt_distance": self.opt_distance,
                "ratio": self.ratio, "iterations": self.iterations,
                "inner_calls": self.inner_calls, "wall_ms": self.wall_ms, "seed": self.seed,
                "method": self.method, "epsilon": self.epsilon, "status": self.status,
                **({"extra": self.extra} if self.extra else {})}


def _in_lattice(inst: CvpInstance):
    return inst.lattice.coefficients(inst.target)


def _trivial_report(inst, z, method, t0, seed=None):
    v = inst.lattice.vector(z)
    return SolveReport(tuple(int(a) for a in v), tuple(int(a) for a in z), 0.0, 0, 0,
                       (time.perf_counter() - t0) * 1e3, method, inst.epsilon,
                       opt_distance=0.0, seed=seed)


def _ceil_log(x: float, base: float) -> int:
    return math.ceil(math.log(x) / base - 1e-9)


def _candidates(inst: CvpInstance, radius: float):
    """Lattice vectors within gauge ``radius`` of the target, best first
    (ties in lexicographic coefficient order)."""
    _, R = inst.norm.sandwich
    V, Z = enumerate_l2(inst.lattice, inst.target, radius * R * (1 + 1e-9), return_coeffs=True)
    if len(V) == 0:
        return V, Z, np.zeros(0)
    g = inst.norm.gauge(V.astype(float) - inst.target_f)
    keep = g <= radius * (1 + config.tol())
    V, Z, g = V[keep], Z[keep], g[keep]
    order = np.argsort(g, kind="stable")
    return V[order], Z[order], g[order]


class _Search:
    """Shared binary-search skeleton; ``probe(s)`` returns a hit or None."""

    def __init__(self, inst: CvpInstance, eps: float, test_mode: bool):
        self.inst = inst
        self.eps = eps
        self.base = math.log1p(eps)
        self.norm_inst = normalize_instance(inst)
        self.scale = self.norm_inst.scale
        z = babai(inst.lattice, inst.target)
        v = inst.lattice.vector(z)
        d = float(inst.norm.gauge(v.astype(float) - inst.target_f))
        self.best = (v, z, d)
        self.opt = exact_cvp(inst.lattice, inst.target, inst.norm).distance if test_mode else None
        U = max(_ceil_log(self.scale * d, self.base), 0)
        self.state = SearchState(0, U, z, eps)

    def check(self, L, U):
        if self.opt is None:
            return None
        d = self.scale * self.opt
        tol = 1e-9
        return (1 + self.eps) ** L <= d * (1 + tol) and d <= (1 + self.eps) ** U * (1 + tol)

    def run(self, probe):
        st = self.state
        while st.U - st.L >= 4:
            L, U = st.L, st.U
            M = L + math.ceil((U - L) / 2)
            s = (1 + self.eps) ** M / self.scale
            hit = probe(s)
            if hit is not None:
                v, z, d = hit
                U_new = min(U, _ceil_log(self.scale * d, self.base))
                L_new = L
                if d < self.best[2]:
                    self.best = (v, z, d)
                    st.x = z
            else:
                L_new, U_new = M, U
            rec = StepRecord(L, U, M, hit is not None, L_new, U_new, self.check(L_new, U_new))
            if U - L >= 6:
                rec.contraction_ok = (U_new - L_new) <= 0.75 * (U - L)
            elif U - L >= 4:
                rec.contraction_ok = (U_new - L_new) <= (U - L) - 1
            st.history.append(rec)
            st.L, st.U = L_new, U_new
        return self.best


def _report(search: _Search, method, inner_calls, t0, seed=None, extra=None):
    v, z, d = search.best
    return SolveReport(tuple(int(a) for a in v), tuple(int(a) for a in z), d,
                       len(search.state.history), inner_calls,
                       (time.perf_counter() - t0) * 1e3, method, search.eps,
                       opt_distance=search.opt, seed=seed, steps=search.state.history,
                       extra=extra or {})


def _check_covering(inst: CvpInstance, cov: Covering):
    if cov.n != inst.lattice.n:
        raise InvalidCovering("covering dimension differs from the instance")
    if cov.epsilon > inst.epsilon * (1 + 1e-12):
        raise InvalidCovering(f"covering eps {cov.epsilon:g} exceeds instance eps {inst.epsilon:g}")
    rng = np.random.default_rng(12345)
    X = rng.standard_normal((8, cov.n))
    if not np.allclose(cov.parent.gauge(X), inst.norm.gauge(X), rtol=1e-9, atol=1e-12):
        raise InvalidCovering("covering parent differs from the instance norm")


def boost_deterministic(inst: CvpInstance, cov: Covering, inner=None, *,
                        test_mode: bool = False) -> SolveReport:
    """(1 + 7 eps)-approximate CVP from a (2, eps)-covering of the unit ball.

    The covering's effective eps (at most ``inst.epsilon``) is the search base.
    ``inner(lattice, target, body)`` must return a lattice vector within
    gauge 2 of the target, or None; it may only return None when no vector is
    within gauge 1.
    """
    t0 = time.perf_counter()
    z = _in_lattice(inst)
    if z is not None:
        return _trivial_report(inst, z, "boost-det", t0)
    _check_covering(inst, cov)
    search = _Search(inst, cov.epsilon, test_mode)
    calls = 0
    eps = cov.epsilon
    tf = inst.target_f
    eta = config.tol()

    def probe_union(s):
        nonlocal calls
        V, Z, g = _candidates(inst, (1 + eps) * s)
        for v, zz, gg in zip(V, Z, g):
            calls += 1
            if cov.find_hit((v - tf) / s) is not None:
                return v, zz, float(gg)
        return None

    def probe_inner(s):
        nonlocal calls
        for q in cov:
            calls += 1
            v = inner(inst.lattice, tf + s * q.center, Scaled(q.body, s))
            if v is None:
                continue
            v = np.asarray(v, dtype=np.int64)
            zz = inst.lattice.coefficients(v)
            if zz is None:
                raise ValueError("inner solver returned a non-lattice vector")
            if q.body.gauge((v - tf) / s - q.center) > 2 * (1 + eta):
                raise ValueError("inner solver returned a vector outside the doubled piece")
            return v, np.asarray(zz, dtype=np.int64), float(inst.norm.gauge(v - tf))
        return None

    if inner is None:
        search.run(probe_union)
    else:
        if not cov.is_explicit and len(cov) > config.MAX_MATERIALIZED:
            raise BudgetExceeded("too many pieces for per-piece inner calls")
        search.run(probe_inner)
    return _report(search, "boost-det", calls, t0)


def _covered_large(Y, X, e, K):
    """hits[j]: whether y_j lies in x + 2 e K for some sample x."""
    return np.array([bool((K.gauge(y - X) <= 2 * e * (1 + config.tol())).any()) for y in Y])


def _covered_small(Y, P, Un, par, K):
    e, delta, k = par["e"], par["delta"], par["k"]
    geo = [slice_geometry(i, e) for i in range(1, k + 1)]
    out = []
    for y in Y:
        t = Un @ y
        W = y[None, :] - t[:, None] * P
        ok_w = K.gauge(W) <= 2 * delta * (1 + config.tol())
        ok_t = np.zeros(len(P), dtype=bool)
        for t0, hw in geo:
            ok_t |= np.abs(t - t0) <= 2 * hw * (1 + config.tol())
        out.append(bool((ok_w & ok_t).any()))
    return np.array(out, dtype=bool)


def boost_randomized(inst: CvpInstance, rng=None, *, seed: int | None = None,
                     confidence_n: int | None = None, max_samples: int | None = None,
                     repetitions: int | None = None, on_budget: str = "cap",
                     branch: str | None = None, test_mode: bool = False) -> SolveReport:
    """(1 + eps)-approximate CVP for a body with a smoothness profile.

    Runs the binary search with eps/7; each step draws N local coverings
    around random points, with N = ceil(confidence_n / p) where p is the
    per-sample probability bound of the local sampler, so that a fixed point
    of K is missed with probability at most exp(-confidence_n).  N is capped
    at ``max_samples``; the effective per-step probability is reported.
    """
    t0 = time.perf_counter()
    if rng is None:
        rng = np.random.Generator(np.random.Philox(seed))
    z = _in_lattice(inst)
    if z is not None:
        return _trivial_report(inst, z, "boost-rand", t0, seed)
    K = inst.norm
    eps = inst.epsilon / 7
    par = local_cover_parameters(K, eps, branch)
    n = inst.lattice.n
    conf = n if confidence_n is None else confidence_n
    p = par["prob"]
    full = math.ceil(conf / p)
    cap = config.RAND_MAX_SAMPLES if max_samples is None else max_samples
    N = full if repetitions is None else int(repetitions)
    if N > cap:
        if on_budget == "raise":
            raise BudgetExceeded(f"{full} samples per step exceed the budget {cap}",
                                 partial={"samples": cap, "step_success": 1 - (1 - p) ** cap})
        N = cap
    step_success = 1 - (1 - p) ** N
    search = _Search(inst, eps, test_mode)
    tf = inst.target_f
    calls = 0
    per_sample = 1 if par["branch"] == "large" else par["k"]
    chunk = 1 << 16

    def probe(s):
        nonlocal calls
        V, Z, g = _candidates(inst, (1 + eps) * s)
        calls += N * per_sample
        if len(V) == 0:
            # nothing to hit; skipping the draw keeps runs reproducible since
            # the enumeration is deterministic
            return None
        Y = (V.astype(float) - tf) / s
        first = len(Y)
        done = 0
        while done < N and first > 0:
            m = min(chunk, N - done)
            hits = _test(Y[:first], m)
            idx = np.flatnonzero(hits)
            if len(idx):
                first = int(idx[0])
            done += m
        if first < len(Y):
            return V[first], Z[first], float(g[first])
        return None

    def _draw(m):
        if par["branch"] == "large":
            return K.sample(rng, m) * (1 + par["e"])
        return K.sample(rng, m) * (1 + par["delta"] / 4)

    def _test(Y, m):
        X = _draw(m)
        if len(Y) == 0:
            return np.zeros(0, dtype=bool)
        if par["branch"] == "large":
            return _covered_large(Y, X, par["e"], K)
        P = X / K.gauge(X)[:, None]
        return _covered_small(Y, P, K.normals(P), par, K)

    search.run(probe)
    extra = {"branch": par["branch"], "samples_per_step": N, "required_samples": full,
             "sample_probability": p, "step_success": step_success,
             "capped": N < full and repetitions is None,
             "generator": type(rng.bit_generator).__name__}
    return _report(search, "boost-rand", calls, t0, seed, extra)


def solve_cvp(inst: CvpInstance, construction: str = "auto", *, test_mode: bool = False) -> SolveReport:
    """(1 + eps)-approximate CVP by deterministic boosting with an eps/7 covering."""
    from .coverings import cover_grid, cover_polytope, cover_smooth, cover_zonotope
    from .norms import PolytopeH, Zonotope

    K = inst.norm
    e = inst.epsilon / 7
    if construction == "auto":
        if isinstance(K, Zonotope):
            construction = "zonotope"
        elif isinstance(K, PolytopeH):
            construction = "polytope"
        elif K.smoothness is not None:
            construction = "smooth"
        else:
            construction = "grid"
    if construction == "zonotope":
        cov = cover_zonotope(K, e)
    elif construction == "polytope":
        cov = cover_polytope(K.A, K.b, e)
    elif construction == "smooth":
        cov = cover_smooth(K, e)
    elif construction == "grid":
        cov = cover_grid(K, e)
    else:
        raise ValueError(f"unknown construction {construction!r}")
    rep = boost_deterministic(inst, cov, test_mode=test_mode)
    rep.extra["construction"] = construction
    rep.extra["requested_epsilon"] = inst.epsilon
    return rep
