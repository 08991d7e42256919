import math
from fractions import Fraction

import numpy as np
import pytest

from latcover.coverings import (Covering, CoveringBody, PolytopeCovering, ZonotopeCovering,
                                cover_grid, cover_polytope, cover_smooth, cover_zonotope, covering_from_json, local_cover_parameters,
                                local_cover_sample, slice_geometry, symmetrize, validate_cover)
from latcover.errors import MissingSmoothness
from latcover.norms import HalfspaceBody, Lp, PolytopeH, Scaled, Zonotope, cube

SQUARE = np.eye(2)


def rng(seed=0):
    return np.random.default_rng(seed)


# ---------------------------------------------------------------- grid

def test_grid_interval():
    K = Lp(2, 1)
    cov = cover_grid(K, 0.5)
    assert len(cov) <= 10
    for q in cov:
        # pieces are (eps/2) K: intervals of half-length 0.25
        assert q.body.gauge([0.25]) == pytest.approx(1.0)
        assert abs(q.center[0]) <= 1
    assert validate_cover(cov, rng=rng()).ok


def test_grid_l2_count_bound():
    cov = cover_grid(Lp(2, 2), 0.5)
    assert len(cov) <= (5 / 0.5) ** 2
    assert validate_cover(cov, rng=rng()).ok


def test_grid_centers_inside_body():
    K = Lp(3, 2)
    cov = cover_grid(K, 0.25)
    C = np.array([q.center for q in cov])
    assert np.all(K.gauge(C) <= 1 + 1e-12)


def test_grid_lattice_variant_valid():
    cov = cover_grid(Lp(1.5, 3), 0.25, method="lattice")
    assert not cov.is_explicit
    assert validate_cover(cov, count=4000, rng=rng(1)).ok


def test_grid_json_roundtrip():
    cov = cover_grid(Lp(2, 2), 0.5)
    back = covering_from_json(cov.to_json())
    Y = Lp(2, 2).sample(rng(), 200)
    assert np.allclose(back.coverage_margins(Y), cov.coverage_margins(Y))


# ---------------------------------------------------------------- zonotope

def test_zonotope_interval_pieces():
    cov = cover_zonotope([[1.0]], 1 / 3)
    assert cov.k == 2 and cov.raw_count == 4 and len(cov) == 3
    ivals = sorted((q.center[0] - q.body.gens[0, 0], q.center[0] + q.body.gens[0, 0]) for q in cov)
    assert np.allclose(ivals, [(-1, -1 / 3), (-2 / 3, 2 / 3), (1 / 3, 1)])


def test_zonotope_raw_count_formula():
    for m, n in ((1, 1), (2, 2), (3, 2), (3, 3)):
        G = np.vstack([np.eye(n), np.ones((m - n, n))]) if m > n else np.eye(n)
        for k in (1, 2, 3, 4):
            # k = 1 means eps = 1, outside the public domain
            cov = ZonotopeCovering(Zonotope(G), k) if k == 1 else cover_zonotope(G, 1 / (2 ** k - 1))
            assert cov.k == k
            assert cov.raw_count == (2 * k) ** m
            assert len(cov) <= cov.raw_count
    assert cover_zonotope(SQUARE, 1 / 7).raw_count == 36


def test_zonotope_eps_rounded_down():
    cov = cover_zonotope(SQUARE, 0.2)
    assert cov.epsilon == pytest.approx(1 / 7)


def test_zonotope_square_validates():
    rep = validate_cover(cover_zonotope(SQUARE, 1 / 3), count=10_000, rng=rng())
    assert rep.ok and rep.coverage_checked == 10_000


def test_zonotope_pieces_share_generators():
    G = np.array([[1.0, 0], [0, 1], [1, 1]])
    cov = cover_zonotope(G, 1 / 3)
    for q in list(cov)[:10]:
        for g, row in zip(G, q.body.gens):
            h = (row @ g) / (g @ g)
            assert h > 0 and np.allclose(row, h * g)
    assert validate_cover(cov, count=3000, rng=rng()).ok


# ---------------------------------------------------------------- polytope

def test_polytope_interval_cells():
    cov = cover_polytope([[1.0]], [1.0], 0.47)
    assert cov.k == 4
    assert Fraction(cov.epsilon).limit_denominator(1000) == Fraction(81, 175)
    assert len(cov) == 8
    e = cov.epsilon
    i = cov.options.index((1, 4))
    assert np.allclose(cov.intervals[i], [0.0, 1 - 37 / 27 * e])
    assert np.isclose(1 - 175 / 81 * e, 0.0)
    # cells tile [-1, 1]
    iv = sorted(map(tuple, cov.intervals))
    assert iv[0][0] == pytest.approx(-1) and iv[-1][1] == pytest.approx(1)
    assert all(a[1] == pytest.approx(b[0]) for a, b in zip(iv, iv[1:]))


def test_polytope_count_formula():
    for m in (1, 2, 3):
        A = np.vstack([np.eye(2), np.ones((1, 2))])[:m] if m >= 2 else [[1.0]]
        b = [1.0] * m if m != 3 else [1, 1, 1.5]
        for k in (1, 2, 3, 4):
            eps = 1 / ((4 / 3) ** k - 1)
            cov = PolytopeCovering(PolytopeH(A, b), k) if eps >= 1 else cover_polytope(A, b, eps)
            assert cov.k == k
            assert cov.raw_count == (2 * k) ** m
            assert len(cov) <= cov.raw_count


def test_polytope_pieces_symmetric_about_center():
    A = [[1, 0], [0, 1], [1, 1]]
    cov = cover_polytope(A, [1, 1, 1.5], 0.5)
    X = rng().normal(size=(20, 2))
    for q in cov:
        assert np.allclose(q.gauge(q.center + X), q.gauge(q.center - X))


def test_polytope_cells_scale_by_four():
    cov = cover_polytope(np.eye(2), [1, 1], 0.25)
    e = cov.epsilon
    for lo, hi in cov.intervals:
        mid, w = (lo + hi) / 2, (hi - lo) / 2
        assert max(abs(mid + 4 * w), abs(mid - 4 * w)) <= 1 + e + 1e-12


@pytest.mark.parametrize("A,b", [
    (np.eye(3), [1, 1, 1]),
    ([[1, 0], [0, 1], [1, 1]], [1, 1, 1.5]),
])
def test_polytope_validates(A, b):
    cov = cover_polytope(A, b, 0.25)
    assert validate_cover(cov, count=10_000, rng=rng()).ok


# ---------------------------------------------------------------- smooth

def test_slice_geometry_identities():
    for k in range(1, 7):
        e = 1 / (2 ** k - 1)
        for i in range(1, k + 1):
            t0, hw = slice_geometry(i, e)
            lo, hi = 1 - (2 ** i - 1) * e, 1 - (2 ** (i - 1) - 1) * e
            assert t0 == pytest.approx((lo + hi) / 2, abs=1e-15)
            assert hw == pytest.approx((hi - lo) / 2, abs=1e-15)
            assert t0 == pytest.approx(1 - (1.5 * 2 ** (i - 1) - 1) * e)
            assert hw == pytest.approx(2 ** (i - 2) * e)
        # the last slice reaches the origin
        assert 1 - (2 ** k - 1) * e == pytest.approx(0.0, abs=1e-12)


def test_smooth_l2_validates():
    cov = cover_smooth(Lp(2, 2), 0.1)
    assert validate_cover(cov, count=10_000, rng=rng()).ok


@pytest.mark.parametrize("p,n", [(3, 3), (1.5, 2)])
def test_smooth_lp_validates(p, n):
    cov = cover_smooth(Lp(p, n), 0.25)
    assert validate_cover(cov, count=4000, rng=rng(2)).ok


def test_smooth_fallback_equals_grid():
    K = Lp(2, 2)
    eps = 0.5
    assert eps > K.smoothness.threshold
    a, b = cover_smooth(K, eps, strict_threshold=True), cover_grid(K, eps)
    assert len(a) == len(b)
    assert np.allclose([q.center for q in a], [q.center for q in b])


def test_smooth_missing_profile():
    with pytest.raises(MissingSmoothness):
        cover_smooth(cube(2), 0.1)


def test_smooth_count_scaling():
    grid = [0.2, 0.1, 0.05]
    counts = [cover_smooth(Lp(2, 2), e).raw_count for e in grid]
    slope = np.polyfit(np.log(1 / np.array(grid)), np.log(counts), 1)[0]
    assert 0.5 <= slope <= 2


# ---------------------------------------------------------------- generic properties

CONSTRUCTIONS = [
    lambda: cover_grid(Lp(2, 2), 0.25),
    lambda: cover_zonotope([[1, 0], [0, 1], [1, 1]], 1 / 3),
    lambda: cover_polytope([[1, 0], [0, 1], [1, 1]], [1, 1, 1.5], 0.25),
    lambda: cover_smooth(Lp(3, 2), 0.1),
]


@pytest.mark.parametrize("make", CONSTRUCTIONS)
def test_scaling_covariance(make):
    base = make()
    cov = base.scaled(2.0)
    x = np.array([0.7, -0.4])
    assert cov.parent.gauge(2 * x) == pytest.approx(base.parent.gauge(x))
    assert validate_cover(cov, count=3000, rng=rng(3)).ok


@pytest.mark.parametrize("make", CONSTRUCTIONS)
def test_find_hit_sound_and_complete(make):
    cov = make()
    K = cov.parent
    r = rng(4)
    for y in K.sample(r, 200):
        assert cov.locate(y) is not None
        q = cov.find_hit(y)
        assert q is not None and q.gauge(y) <= 2 + 1e-9
    for y in K.sample(r, 200) * 1.3:
        q = cov.find_hit(y)
        if q is not None:
            assert q.gauge(y) <= 2 + 1e-9


# ---------------------------------------------------------------- symmetrize

def test_symmetrize_identity_on_symmetric():
    cov = cover_grid(Lp(2, 2), 0.5)
    out = symmetrize(cov)
    assert len(out) == len(cov)
    assert all(a is b for a, b in zip(cov, out))


def test_symmetrize_triangle():
    tri = np.array([[0, 0], [1, 0], [0, 1]], dtype=float) * 0.4 + [0.1, 0.1]
    T, c = HalfspaceBody.from_vertices(tri)
    K = Lp(2, 2)
    cov = Covering([CoveringBody(T, c)], 1.0, K)
    out = symmetrize(cov)
    assert len(out) <= 5 ** 2
    X = rng().normal(size=(30, 2))
    for q in out:
        assert q.body.is_symmetric
        assert np.allclose(q.gauge(q.center + X), q.gauge(q.center - X))
    # union still covers the triangle
    w = rng(1).dirichlet([1, 1, 1], size=3000)
    Y = w @ tri
    assert np.all(out.coverage_margins(Y) <= 1e-9)
    # doubled pieces stay inside the doubled triangle
    for q in out:
        V = q.center + 2 * q.body.vertices
        assert np.all(T.gauge(V - c) <= 2 + 1e-9)


# ---------------------------------------------------------------- validation

def test_validator_whole_body_boundary_case():
    K = Lp(2, 2)
    cov = Covering([CoveringBody(K, np.zeros(2))], 1.0, K)
    rep = validate_cover(cov, count=2000, rng=rng())
    assert rep.ok
    assert abs(rep.worst_containment) <= 1e-9


def test_validator_flags_adversarial_piece():
    K = Lp(2, 2)
    eps = 0.2
    cov = Covering([CoveringBody(K, np.zeros(2)), CoveringBody(Scaled(K, eps), np.array([1.0, 0]))],
                   eps, K)
    rep = validate_cover(cov, count=1000, rng=rng())
    assert not rep.ok
    assert rep.containment_violations >= 1
    assert rep.worst_containment > 0


def test_validator_flags_gap():
    K = Lp(2, 2)
    cov = Covering([CoveringBody(Scaled(K, 0.5), np.zeros(2))], 0.5, K)
    rep = validate_cover(cov, count=1000, rng=rng())
    assert rep.coverage_violations > 0


# ---------------------------------------------------------------- local covering

def _check_local_containment(K, pieces, eps, r):
    for q in pieces:
        P = q.center + 2 * q.body.sample_boundary(r, 64) if hasattr(q.body, "sample_boundary") else None
        assert np.all(K.gauge(P) <= 1 + eps + 1e-9)


def test_local_containment_every_call():
    K = Lp(2, 2)
    r = rng(5)
    for eps, branch in ((0.3, "large"), (0.05, "small"), (0.05, None)):
        for _ in range(100):
            pieces = local_cover_sample(K, eps, r, branch=branch)
            assert 1 <= len(pieces) <= max(1, local_cover_parameters(K, eps, branch).get("k", 1))
            _check_local_containment(K, pieces, eps, r)


def test_local_large_branch_hit_rate():
    K = Lp(2, 2)
    eps = 0.9
    par = local_cover_parameters(K, eps, "large")
    assert par["branch"] == "large"
    e = par["e"]
    r = rng(6)
    q = np.array([0.3, -0.5])
    trials = 100_000
    # one uniform point of (1 + e) K per call; a hit means q is in x + eK
    X = K.sample(r, trials) * (1 + e)
    hits = np.mean(K.gauge(q - X) <= e)
    p = (e / (1 + e)) ** 2
    assert hits >= p - 3 * math.sqrt(p * (1 - p) / trials)
    # the sampler itself draws from the same law
    for _ in range(200):
        s = local_cover_sample(K, eps, r, return_info=True, branch="large")
        assert s.branch == "large" and K.gauge(s.point) <= 1 + e + 1e-12


def test_local_small_branch_hit_rate():
    K = Lp(2, 2)
    eps = 0.05
    par = local_cover_parameters(K, eps, "small")
    r = rng(7)
    q = np.array([0.99, 0.0])
    trials = 20_000
    hits = 0
    for _ in range(trials):
        pieces = local_cover_sample(K, eps, r, branch="small")
        hits += any(p.contains(q) for p in pieces)
    freq = hits / trials
    bound = par["prob"]
    assert bound == pytest.approx(0.5 * (par["delta"] / 4) ** 2 / (1 + par["delta"] / 4) ** 2)
    assert freq > 0
    assert freq >= bound - 3 * math.sqrt(bound / trials)
