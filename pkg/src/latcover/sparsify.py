"""Desk-scale lattice sparsifiers and the sparsifier-based CVP algorithm.

A (K, delta)-sparsifier of L is a sublattice L' with
  (1) G(K, L') <= O(1/delta)^n, and
  (2) d_K(L', x) <= d_K(L, x) + delta for every x.

Candidates are mod-p sublattices {B z : <a, z> = 0 mod p}.  Condition (2) is
certified exactly: it holds iff every coset representative w of L / L'
satisfies d_K(L', w) <= delta (take x = w for necessity; for sufficiency move
the closest vector of L by a short vector of L').  A grid over the
fundamental parallelepiped of L' is available as an independent check.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import config
from .boost import CvpInstance, SolveReport, _in_lattice, _trivial_report
from .errors import NoCertifiedSparsifier
from .lattice import Lattice, closest_l2, column_hnf, enumerate_l2, exact_cvp, hnf_sublattice, is_prime
from .norms import NormBody, Scaled, SmoothnessProfile

G_CAP_CONST = 5.0


@dataclass
class Certificate:
    certified: bool
    cond2_margin: float
    g_upper: int
    g_cap: float
    method: str
    resolution: float | None = None
    worst_point: tuple | None = None

    def to_json(self):
        return {"certified": self.certified, "cond2_margin": self.cond2_margin,
                "g_upper": self.g_upper, "g_cap": self.g_cap, "method": self.method,
                "resolution": self.resolution,
                "worst_point": None if self.worst_point is None else [float(v) for v in self.worst_point]}


@dataclass
class Sparsifier:
    sublattice: Lattice
    parent: Lattice
    delta: float
    certificate: Certificate | None = None
    congruence: tuple | None = None
    fallback: bool = False

    @property
    def certified(self) -> bool:
        return self.certificate is not None and self.certificate.certified

    @property
    def index(self) -> int:
        return abs(self.sublattice.det // self.parent.det)

    def is_sublattice(self) -> bool:
        return all(self.parent.coefficients(c) is not None for c in self.sublattice.basis_columns())

    def to_json(self):
        return {"sublattice": [list(r) for r in self.sublattice.rows],
                "parent": [list(r) for r in self.parent.rows],
                "delta": self.delta, "index": self.index,
                "congruence": None if self.congruence is None
                else {"a": list(self.congruence[0]), "p": self.congruence[1]},
                "fallback": self.fallback,
                "certificate": None if self.certificate is None else self.certificate.to_json()}


@dataclass
class GCountReport:
    lower: int
    upper: int
    witness: tuple

    def to_json(self):
        return {"lower": self.lower, "upper": self.upper, "witness": [float(v) for v in self.witness]}


def count_in_body(K: NormBody, lattice: Lattice, center, radius: float = 1.0) -> int:
    """|(center + radius K) cap L|, boundary included."""
    _, R = K.sandwich
    c = np.asarray([float(v) for v in center])
    V = enumerate_l2(lattice, center, radius * R * (1 + 1e-9))
    if len(V) == 0:
        return 0
    return int(np.sum(K.gauge(V - c) <= radius * (1 + config.tol())))


def _fundamental_grid(lattice: Lattice, resolution: float) -> np.ndarray:
    """Points B u with u on a grid of [0, 1)^n, spacing about ``resolution``."""
    B = lattice.Bf
    steps = [max(1, math.ceil(np.linalg.norm(B[:, j]) / resolution)) for j in range(lattice.n)]
    axes = [np.arange(s) / s for s in steps]
    U = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lattice.n)
    return U @ B.T


def g_count(K: NormBody, lattice: Lattice, resolution: float = 0.1) -> GCountReport:
    """Bounds on G(K, L) = max_x |(x + K) cap L|.

    The upper bound is |2K cap L|: all differences of points of one translate
    lie in 2K.  The lower bound is the best translate found on a grid of the
    fundamental parallelepiped and at midpoints of pairs of points of 2K.
    """
    upper = count_in_body(K, lattice, [0] * lattice.n, 2.0)
    _, R = K.sandwich
    cands = list(_fundamental_grid(lattice, resolution))
    V = enumerate_l2(lattice, [0] * lattice.n, 2 * R * (1 + 1e-9))
    V = V[K.gauge(V.astype(float)) <= 2 * (1 + config.tol())]
    for v in V:
        cands.append(v / 2.0)
    best, witness = 0, None
    for x in cands:
        c = count_in_body(K, lattice, [Fraction(float(v)) for v in x])
        if c > best:
            best, witness = c, tuple(float(v) for v in x)
    return GCountReport(best, upper, witness)


def g_cap(delta: float, n: int, const: float = G_CAP_CONST) -> float:
    return math.inf if delta <= 0 else math.ceil((const / delta) ** n)


def coset_representatives(parent: Lattice, sub: Lattice) -> list:
    """Vectors of the parent, one per coset of the sublattice."""
    C = []
    for col in sub.basis_columns():
        z = parent.coefficients(col)
        if z is None:
            raise ValueError("not a sublattice")
        C.append([int(v) for v in z])
    H = column_hnf(np.array(C, dtype=object).T.tolist())
    diag = [abs(int(H[i][i])) for i in range(parent.n)]
    reps = []
    for r in itertools.product(*[range(d) for d in diag]):
        reps.append(parent.vector(np.array(r, dtype=np.int64)))
    return reps


def certify_sparsifier(cand: Sparsifier, K: NormBody, delta: float | None = None,
                       method: str = "coset", resolution: float = 0.05,
                       cap_const: float = G_CAP_CONST) -> Certificate:
    """Check both sparsifier conditions; stores and returns the certificate."""
    delta = cand.delta if delta is None else delta
    eta = config.tol()
    sub, par = cand.sublattice, cand.parent
    n = par.n
    worst, worst_pt = 0.0, None
    if method == "coset":
        for w in coset_representatives(par, sub):
            d = exact_cvp(sub, w, K).distance
            if d > worst:
                worst, worst_pt = d, tuple(int(v) for v in w)
    elif method == "grid":
        # the gap d(L', x) - d(L, x) is periodic under L' only
        for x in _fundamental_grid(sub, resolution):
            t = [Fraction(float(v)) for v in x]
            gap = exact_cvp(sub, t, K).distance - exact_cvp(par, t, K).distance
            if gap > worst:
                worst, worst_pt = gap, tuple(float(v) for v in x)
    else:
        raise ValueError(f"unknown certification method {method!r}")
    margin = delta - worst
    upper = count_in_body(K, sub, [0] * n, 2.0)
    cap = g_cap(delta, n, cap_const)
    cert = Certificate(margin >= -eta and upper <= cap, margin, upper, cap, method,
                       resolution if method == "grid" else None, worst_pt)
    cand.certificate = cert
    return cert


def _primes_from(start: int, count: int) -> list[int]:
    out, p = [], max(2, start)
    while len(out) < count:
        if is_prime(p):
            out.append(p)
        p += 1
    return out


def sparsify_candidates(lattice: Lattice, K: NormBody, delta: float, trials: int = 4, rng=None,
                        primes=None, method: str = "coset",
                        cap_const: float = G_CAP_CONST) -> list[Sparsifier]:
    """Certified mod-p sparsifiers, sparsest first.

    Primes default to the three smallest primes at or above the index needed
    to bring |2K cap L| under the cap.  When nothing certifies, the parent
    lattice itself is returned (a (K, 0)-sparsifier) with ``fallback`` set.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = lattice.n
    if primes is None:
        need = count_in_body(K, lattice, [0] * n, 2.0) / g_cap(delta, n, cap_const)
        primes = _primes_from(max(2, math.ceil(need)), 3)
    seen, out = set(), []
    for p in primes:
        tried = set()
        for _ in range(trials):
            a = tuple(int(v) for v in rng.integers(0, p, size=n))
            if not any(a) or a in tried:
                continue
            tried.add(a)
            sub = hnf_sublattice(lattice, a, p)
            if sub.rows in seen:
                continue
            seen.add(sub.rows)
            cand = Sparsifier(sub, lattice, delta, congruence=(a, p))
            if certify_sparsifier(cand, K, delta, method, cap_const=cap_const).certified:
                out.append(cand)
    if not out:
        cand = Sparsifier(lattice, lattice, delta, fallback=True)
        certify_sparsifier(cand, K, delta, method, cap_const=cap_const)
        return [cand]
    out.sort(key=lambda s: -s.index)
    return out


# ---------------------------------------------------------------------------


@dataclass
class LemmaReport:
    trials: int = 0
    violations: int = 0
    worst_slack: float = math.inf
    nontrivial: bool = False
    index: int = 1
    scale: float = 1.0
    skipped: int = 0
    rows: list = field(default_factory=list)

    def to_json(self):
        return {"trials": self.trials, "violations": self.violations,
                "worst_slack": self.worst_slack, "nontrivial": self.nontrivial,
                "index": self.index, "scale": self.scale, "skipped": self.skipped}


def _fundamental_sample(lattice: Lattice, rng, denom: int = 1000):
    u = rng.integers(0, denom, size=lattice.n)
    return tuple(sum(Fraction(int(lattice.rows[i][j]) * int(u[j]), denom) for j in range(lattice.n))
                 for i in range(lattice.n))


def check_smoothness_lemma(lattice: Lattice, K: NormBody, eps: float, trials: int = 50, rng=None,
                           *, profile: SmoothnessProfile | None = None, scale: float | None = None,
                           sparsifier: Sparsifier | None = None, max_draws: int | None = None,
                           sparsifier_trials: int = 8) -> LemmaReport:
    """Test d_K(L', t) <= d_K(L, t) + 2 C eps with exact distances.

    K is scaled by ``scale`` (default: 0.9 times the largest sampled distance
    of a target to the lattice) so that targets with t + K free of lattice
    points in its interior exist; the modulus of smoothness is scale
    invariant.  L' is a certified (sK, eps^(1/q))-sparsifier.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    prof = profile or K.smoothness
    if prof is None:
        raise NoCertifiedSparsifier("no smoothness profile to test against")
    if scale is None:
        probe = [exact_cvp(lattice, _fundamental_sample(lattice, rng), K).distance for _ in range(64)]
        scale = 0.9 * max(probe)
    Ks = Scaled(K, scale)
    delta = eps ** (1.0 / prof.q)
    rep = LemmaReport(scale=scale)
    if sparsifier is None:
        cands = sparsify_candidates(lattice, Ks, delta, trials=sparsifier_trials, rng=rng)
        sparsifier = cands[0]
    elif sparsifier.certificate is None:
        certify_sparsifier(sparsifier, Ks, delta)
    if not sparsifier.certified:
        raise NoCertifiedSparsifier("no certified sparsifier at this delta")
    sub = sparsifier.sublattice
    rep.nontrivial = not sparsifier.fallback and sparsifier.index > 1
    rep.index = sparsifier.index
    bound = 2 * prof.C * eps
    draws = 0
    limit = max_draws or 200 * trials
    while rep.trials < trials and draws < limit:
        draws += 1
        t = _fundamental_sample(lattice, rng)
        d = exact_cvp(lattice, t, Ks).distance
        if d < 1 - config.tol():
            rep.skipped += 1
            continue
        d2 = exact_cvp(sub, t, Ks).distance
        slack = d + bound - d2
        rep.trials += 1
        rep.worst_slack = min(rep.worst_slack, slack)
        if slack < -config.tol():
            rep.violations += 1
            rep.rows.append((tuple(float(v) for v in t), d, d2))
    return rep


def sparsifier_cvp(inst: CvpInstance, rng=None, *, test_mode: bool = False,
                   sparsifier_trials: int = 4, max_levels: int = 64) -> SolveReport:
    """(1 + eps)-approximate CVP for a body with a smoothness profile.

    With d0 = d_2(L, t) / R (a lower bound on d_K) and K_d = 2^d d0 K, level
    d builds a certified (K_d, (eps / 4C)^(1/q))-sparsifier L' and returns the
    closest point of L' in t + (2 + eps) K_d when there is one.
    """
    t0 = time.perf_counter()
    rng = np.random.default_rng(0) if rng is None else rng
    z = _in_lattice(inst)
    if z is not None:
        return _trivial_report(inst, z, "sparsify", t0)
    K = inst.norm
    prof = K.smoothness
    if prof is None:
        raise NoCertifiedSparsifier("sparsifier CVP needs a smoothness profile")
    eps = inst.epsilon
    delta = (eps / (4 * prof.C)) ** (1.0 / prof.q)
    _, R = K.sandwich
    tf = inst.target_f
    d0 = closest_l2(inst.lattice, inst.target).distance / R
    levels, fallbacks, calls = [], 0, 0
    result = None
    for d in range(max_levels):
        Kd = Scaled(K, d0 * 2 ** d)
        cands = sparsify_candidates(inst.lattice, Kd, delta, trials=sparsifier_trials, rng=rng)
        sp = cands[0]
        fallbacks += sp.fallback
        calls += 1
        radius = (2 + eps) * d0 * 2 ** d
        V, Z = enumerate_l2(sp.sublattice, inst.target, radius * R * (1 + 1e-9), return_coeffs=True)
        g = K.gauge(V.astype(float) - tf) if len(V) else np.zeros(0)
        keep = g <= radius * (1 + config.tol())
        levels.append({"level": d, "index": sp.index, "fallback": sp.fallback,
                       "candidates": int(keep.sum())})
        if keep.any():
            V, g = V[keep], g[keep]
            i = int(np.flatnonzero(g <= g.min() + config.tol())[0])
            v = V[i]
            zz = inst.lattice.coefficients(v)
            result = (v, zz, float(g[i]), d)
            break
    if result is None:
        raise NoCertifiedSparsifier("no level produced a lattice vector")
    v, zz, dist, level = result
    extra = {"level": level, "levels": levels, "fallback_levels": fallbacks, "delta": delta,
             "d0": d0}
    opt = None
    if test_mode:
        opt = exact_cvp(inst.lattice, inst.target, K).distance
        # largest k with t + 2^k d0 K free of lattice points in its interior
        extra["k"] = math.floor(math.log2(opt / d0) + 1e-12)
    return SolveReport(tuple(int(a) for a in v), tuple(int(a) for a in zz), dist, level + 1, calls,
                       (time.perf_counter() - t0) * 1e3, "sparsify", eps, opt_distance=opt,
                       extra=extra)
