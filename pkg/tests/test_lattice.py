from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latcover import config
from latcover.errors import DimensionMismatch, NotPrime
from latcover.lattice import (Lattice, closest_l2, enumerate_l2, exact_cvp, hnf_sublattice,
                              inner_two_approx)
from latcover.norms import Lp, cube

from oracles import box_scan_cvp, box_scan_l2_ball, gauge_lp, random_basis, random_target


def pts(V):
    return sorted(tuple(int(x) for x in v) for v in V)


# ---------------------------------------------------------------- enumeration

def test_enumerate_unit_ball_z2():
    V = enumerate_l2(Lattice.identity(2), (0, 0), 1)
    assert pts(V) == [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]


def test_enumerate_half_offset_radius_06_is_empty():
    # the four corners are at distance sqrt(0.5) > 0.6
    assert len(enumerate_l2(Lattice.identity(2), (Fraction(1, 2), Fraction(1, 2)), 0.6)) == 0
    V = enumerate_l2(Lattice.identity(2), (Fraction(1, 2), Fraction(1, 2)), 0.75)
    assert pts(V) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_enumerate_even_lattice():
    V = enumerate_l2(Lattice([[2, 0], [0, 2]]), (0, 0), 1.9)
    assert pts(V) == [(0, 0)]


def test_enumerate_boundary_admitted():
    # radius exactly hits (3,4)
    V = enumerate_l2(Lattice.identity(2), (0, 0), 5)
    assert (3, 4) in pts(V) and (4, 4) not in pts(V)


def test_enumerate_sorted_by_coefficients():
    lat = Lattice([[2, 1], [0, 3]])
    V, Z = enumerate_l2(lat, (Fraction(1, 3), 0), 4, return_coeffs=True)
    assert [tuple(z) for z in Z] == sorted(tuple(z) for z in Z)
    assert np.array_equal(Z @ lat.B.T, V)


def test_enumerate_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        enumerate_l2(Lattice.identity(2), (0, 0, 0), 1)


def test_enumerate_overflow_budget():
    with pytest.raises(OverflowError):
        enumerate_l2(Lattice.identity(2), (2 ** 45, 0), 1)


@pytest.mark.parametrize("seed", range(25))
def test_enumerate_matches_box_scan(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    B = random_basis(rng, n, bound=10 if n <= 2 else 4)
    t = random_target(rng, B, denom=7)
    r = float(rng.uniform(0.5, 6.0))
    lat = Lattice(B)
    assert pts(enumerate_l2(lat, t, r)) == box_scan_l2_ball(B, t, r)


# ---------------------------------------------------------------- exact cvp

@pytest.mark.parametrize("p", [1, 1.5, 2, 3])
def test_cvp_rounding_example(p):
    for n in (1, 2, 3):
        t = (Fraction(2, 5),) + (0,) * (n - 1)
        res = exact_cvp(Lattice.identity(n), t, Lp(p, n))
        assert tuple(res.vector) == (0,) * n
        assert res.distance == pytest.approx(0.4, abs=1e-12)


def test_cvp_l1_tie_goes_to_lex_smallest():
    res = exact_cvp(Lattice.identity(2), (Fraction(1, 2), Fraction(1, 2)), Lp(1, 2))
    assert res.distance == pytest.approx(1.0)
    assert tuple(res.coeffs) == (0, 0)


def test_cvp_linf_example():
    res = exact_cvp(Lattice.identity(2), (Fraction(3, 10), Fraction(9, 10)), cube(2))
    assert tuple(res.vector) == (0, 1)
    assert res.distance == pytest.approx(0.3)


def test_closest_l2_exact_distance():
    res = closest_l2(Lattice([[3, 1], [0, 2]]), (Fraction(1, 2), Fraction(1, 3)))
    assert res.distance == pytest.approx(float(np.hypot(0.5, 1 / 3)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_cvp_matches_box_scan(seed, p):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    B = random_basis(rng, n, bound=4)
    t = random_target(rng, B, denom=16)
    res = exact_cvp(Lattice(B), t, Lp(p, n))
    R = n ** max(0.0, 0.5 - 1 / p)
    v, d, _ = box_scan_cvp(B, t, lambda X: gauge_lp(X, p), R)
    assert tuple(res.vector) == tuple(v)
    assert res.distance == pytest.approx(d, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_cvp_translation_invariant(seed):
    rng = np.random.default_rng(seed)
    B = random_basis(rng, 3, 4)
    lat = Lattice(B)
    t = random_target(rng, B)
    w = B @ rng.integers(-3, 4, size=3)
    K = Lp(3, 3)
    d1 = exact_cvp(lat, t, K).distance
    d2 = exact_cvp(lat, tuple(a + int(b) for a, b in zip(t, w)), K).distance
    assert d1 == pytest.approx(d2, abs=1e-9)


@pytest.mark.parametrize("p", [1, 1.5, 3, 4])
def test_cvp_sandwich(p):
    rng = np.random.default_rng(int(p * 10))
    for _ in range(10):
        B = random_basis(rng, 3, 4)
        t = random_target(rng, B)
        K = Lp(p, 3)
        r, R = K.sandwich
        d2 = closest_l2(Lattice(B), t).distance
        dK = exact_cvp(Lattice(B), t, K).distance
        assert d2 / R - 1e-9 <= dK <= d2 / r + 1e-9


# ---------------------------------------------------------------- inner solver

def test_inner_returns_lattice_target():
    v = inner_two_approx(Lattice([[2, 1], [0, 3]]), (3, 3), Lp(2, 2))
    assert tuple(v) == (3, 3)


def test_inner_tie_three_z2():
    v = inner_two_approx(Lattice.identity(2, 3), (Fraction(3, 2), 0), Lp(2, 2))
    assert tuple(v) == (0, 0)


def test_inner_refuses_far_target():
    assert inner_two_approx(Lattice.identity(2, 5), (Fraction(5, 2), 0), Lp(2, 2)) is None


# ---------------------------------------------------------------- sublattices

def test_hnf_zero_congruence_is_parent():
    lat = Lattice([[2, 1], [1, 3]])
    sub = hnf_sublattice(lat, (0, 5), 5)
    assert abs(sub.det) == abs(lat.det)
    assert all(lat.coefficients(c) is not None for c in sub.basis_columns())


def test_hnf_even_first_coordinate():
    sub = hnf_sublattice(Lattice.identity(2), (1, 0), 2)
    assert abs(sub.det) == 2
    for col in sub.basis_columns():
        assert col[0] % 2 == 0


def test_hnf_index_three_by_counting():
    sub = hnf_sublattice(Lattice.identity(2), (1, 1), 3)
    assert abs(sub.det) == 3
    # count points of the sublattice in the box [0, 30)^2: density 1/3
    inside = [(x, y) for x in range(30) for y in range(30) if (x + y) % 3 == 0]
    assert all(sub.contains((x, y)) for x, y in inside[:50])
    assert len(inside) == 300


def test_hnf_not_prime():
    with pytest.raises(NotPrime):
        hnf_sublattice(Lattice.identity(2), (1, 0), 4)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), p=st.sampled_from([2, 3, 5, 7]))
def test_hnf_sublattice_properties(seed, p):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    lat = Lattice(random_basis(rng, n, 4))
    a = tuple(int(v) for v in rng.integers(0, p, size=n))
    sub = hnf_sublattice(lat, a, p)
    index = p if any(v % p for v in a) else 1
    assert abs(sub.det) == index * abs(lat.det)
    for col in sub.basis_columns():
        z = lat.coefficients(col)
        assert z is not None
        assert sum(int(ai) * int(zi) for ai, zi in zip(a, z)) % p == 0


def test_singular_basis_rejected():
    with pytest.raises(ValueError):
        Lattice([[1, 2], [2, 4]])


def test_tolerance_env_override(monkeypatch):
    monkeypatch.setenv("LATCOVER_TOL", "1e-6")
    assert config.tol() == 1e-6
