"""Acceptance criteria, one test per criterion.

Each test prints a single ``ACCEPTANCE <id> PASS|FAIL`` line (visible with or
without ``-s``) before asserting, so a run lists every criterion's outcome.
"""

import math
import time

import numpy as np
import pytest

from latcover.boost import CvpInstance, boost_deterministic, boost_randomized
from latcover.coverings import (PolytopeCovering, ZonotopeCovering, cover_grid, cover_polytope,
                                cover_smooth, cover_zonotope, validate_cover)
from latcover.io import gen_instance, random_zonotope
from latcover.lattice import Lattice, exact_cvp
from latcover.norms import (Lp, PolytopeH, SmoothnessProfile, Zonotope, cube, lp_profile,
                            modulus_estimate, modulus_lp)
from latcover.sparsify import check_smoothness_lemma, sparsifier_cvp

from oracles import box_scan_cvp, gauge_lp, gauge_polytope, random_basis, random_target

ETA = 1e-9


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


def cube_plus(n):
    """The cube cut by |x_1 + ... + x_n| <= 1.5: one facet more than the cube."""
    return PolytopeH(np.vstack([np.eye(n), np.ones((1, n))]), [1.0] * n + [1.5])


# ---------------------------------------------------------------- 1

def test_1_covering_counts(report):
    bad, slowest = [], 0.0
    for m in (1, 2, 3):
        for n in range(1, m + 1):
            G = np.vstack([np.eye(n), np.ones((m - n, n))])
            for k in (1, 2, 3, 4):
                for kind in ("zonotope", "polytope"):
                    t0 = time.perf_counter()
                    if kind == "zonotope":
                        eps = 1 / (2 ** k - 1)
                        # eps = 1 (k = 1) is outside the public domain
                        cov = ZonotopeCovering(Zonotope(G), k) if k == 1 else cover_zonotope(G, eps)
                    else:
                        eps = 1 / ((4 / 3) ** k - 1)
                        poly = PolytopeH(G, np.ones(m) * (1 + 0.5 * np.arange(m) / m))
                        cov = PolytopeCovering(poly, k) if eps >= 1 else cover_polytope(poly.A, poly.b, eps)
                    val = validate_cover(cov, count=10_000, rng=np.random.default_rng(k))
                    dt = time.perf_counter() - t0
                    slowest = max(slowest, dt)
                    if cov.k != k or cov.raw_count != (2 * k) ** m or not val.ok or dt >= 10:
                        bad.append((kind, m, n, k, cov.raw_count, val.ok, round(dt, 2)))
    report(1, not bad, f"{2 * 6 * 4} coverings, (2k)^m exact, slowest {slowest:.2f}s, bad={bad}")


# ---------------------------------------------------------------- 2

def test_2_covering_validity(report):
    bad, checked = [], 0
    for n in (2, 3, 4):
        zono = random_zonotope(n, n + 1, np.random.default_rng(n))
        makers = {
            "grid-l2": lambda e: cover_grid(Lp(2, n), e),
            "grid-cube": lambda e: cover_grid(cube(n), e),
            "zonotope": lambda e: cover_zonotope(zono, e),
            "polytope-cube": lambda e: cover_polytope(cube(n).A, cube(n).b, e),
            "polytope-cut": lambda e: cover_polytope(cube_plus(n).A, cube_plus(n).b, e),
            "smooth-l1.5": lambda e: cover_smooth(Lp(1.5, n), e),
            "smooth-l2": lambda e: cover_smooth(Lp(2, n), e),
            "smooth-l3": lambda e: cover_smooth(Lp(3, n), e),
        }
        for eps in (0.5, 0.25, 0.1):
            for name, make in makers.items():
                cov = make(eps)
                rep = validate_cover(cov, count=10_000, rng=np.random.default_rng(checked), eta=ETA)
                checked += 1
                if not rep.ok:
                    bad.append((name, n, eps, rep.worst_coverage, rep.worst_containment))
    report(2, not bad, f"{checked} coverings validated with 10^4 samples, violations={bad}")


# ---------------------------------------------------------------- 3

def test_3_boosting_correctness(report):
    bad, runs, worst = [], 0, 0.0
    for n in (2, 3, 4, 5):
        norms = {f"l{p}": Lp(p, n) for p in (1, 1.5, 2, 3)}
        norms["cube"] = cube(n)
        norms["zonotope"] = random_zonotope(n, n + 1, np.random.default_rng(100 + n))
        for eps in (0.5, 0.25, 0.1):
            for name, K in norms.items():
                if name == "cube":
                    cov = cover_polytope(K.A, K.b, eps)
                elif name == "zonotope":
                    cov = cover_zonotope(K, eps)
                else:
                    cov = cover_smooth(K, eps, strict_threshold=True)
                for seed in range(100):
                    inst = gen_instance(n, K, 10_000 * n + seed, epsilon=eps)
                    runs += 1
                    try:
                        rep = boost_deterministic(inst, cov, test_mode=True)
                    except Exception as exc:  # any exception fails the criterion
                        bad.append((n, name, eps, seed, repr(exc)))
                        continue
                    opt = exact_cvp(inst.lattice, inst.target, K).distance
                    ratio = 1.0 if rep.distance == opt else rep.distance / opt
                    worst = max(worst, ratio / (1 + 7 * eps))
                    steps_ok = all(
                        s.invariant_ok and (s.U - s.L < 6 or s.U_new - s.L_new <= 0.75 * (s.U - s.L))
                        for s in rep.steps)
                    if ratio > 1 + 7 * eps + ETA or not (rep.invariant_ok and rep.contraction_ok
                                                          and steps_ok):
                        bad.append((n, name, eps, seed, ratio))
    report(3, not bad, f"{runs} runs, worst ratio/(1+7eps) = {worst:.4f}, failures={bad[:5]}")


# ---------------------------------------------------------------- 4

def test_4_randomized_boosting(report):
    eps = 0.3
    lattices = {"Z2": Lattice.identity(2),
                "n3": Lattice(random_basis(np.random.default_rng(2024), 3, 4))}
    summary, ok = [], True
    for name, lat in lattices.items():
        # one fixed instance per lattice, 200 seeds
        t = random_target(np.random.default_rng(7), np.array(lat.rows))
        inst = CvpInstance(lat, t, Lp(2, lat.n), eps)
        opt = exact_cvp(lat, t, Lp(2, lat.n)).distance
        good = valid = 0
        for seed in range(200):
            rep = boost_randomized(inst, seed=seed)
            valid += lat.coefficients(rep.vector) is not None
            good += rep.distance <= (1 + eps) * opt + ETA
        summary.append(f"{name}: {good}/200 within 1+eps, {valid}/200 valid")
        ok &= good >= 190 and valid == 200
    report(4, ok, "; ".join(summary))


# ---------------------------------------------------------------- 5

def test_5_lp_modulus(report):
    worst, bad = 0.0, []
    for p in (1, 1.5, 2, 3, 4):
        for n in (2, 3, 4):
            for tau in (0.1, 0.3, 0.5):
                est = modulus_estimate(Lp(p, n), tau, 100_000, np.random.default_rng(int(10 * p) + n))
                err = abs(est - modulus_lp(p, tau))
                worst = max(worst, err)
                if err > 1e-3:
                    bad.append((p, n, tau, est))
    taus = np.linspace(0.001, 0.999, 999)
    for p in (1, 1.25, 1.5, 1.75, 2):
        if np.any(modulus_lp(p, taus) > taus ** p / p * (1 + 1e-12)):
            bad.append(("small-p bound", p))
    for p in (2, 2.5, 3, 4, 6):
        if np.any(modulus_lp(p, taus) > 2 ** p * taus ** 2 * (1 + 1e-12)):
            bad.append(("large-p bound", p))
    report(5, not bad, f"45 estimates, max |est - closed form| = {worst:.2e}, bad={bad}")


# ---------------------------------------------------------------- 6

def test_6_smoothness_lemma(report):
    prof = lp_profile(2)
    lats = {"Z2": Lattice.identity(2), "random": Lattice(random_basis(np.random.default_rng(6), 2, 4))}
    out, ok = [], prof == SmoothnessProfile(4.0, 2.0)
    for i, (name, lat) in enumerate(lats.items()):
        rep = check_smoothness_lemma(lat, Lp(2, 2), 0.04, trials=50, rng=np.random.default_rng(i))
        out.append(f"{name}: {rep.trials} trials, {rep.violations} violations, "
                   f"index {rep.index}, worst slack {rep.worst_slack:.4f}")
        ok &= rep.trials == 50 and rep.violations == 0
    report(6, ok, "; ".join(out))


# ---------------------------------------------------------------- 7

def test_7_sparsifier_cvp(report):
    bad, worst, count = [], 0.0, 0
    rng = np.random.default_rng(77)
    while count < 50:
        n, p = (2, 3)[count % 2], (2, 3)[(count // 2) % 2]
        K = Lp(p, n)
        B = random_basis(rng, n, 3)
        t = random_target(rng, B)
        lat = Lattice(B)
        if lat.coefficients(t) is not None:
            continue
        count += 1
        rep = sparsifier_cvp(CvpInstance(lat, t, K, 0.25), np.random.default_rng(count), test_mode=True)
        # independent oracle distances for the ratio and for k
        _, opt, _ = box_scan_cvp(B, t, lambda X: gauge_lp(X, p), n ** max(0.0, 0.5 - 1 / p))
        _, d2, _ = box_scan_cvp(B, t, lambda X: gauge_lp(X, 2), 1.0)
        d0 = d2 / K.sandwich[1]
        k = math.floor(math.log2(opt / d0) + 1e-12)
        ratio = rep.distance / opt
        worst = max(worst, ratio)
        if ratio > 1.25 + ETA or rep.extra["level"] > k or lat.coefficients(rep.vector) is None:
            bad.append((n, p, ratio, rep.extra["level"], k))
    report(7, not bad, f"50 instances, max ratio {worst:.4f}, failures={bad}")


# ---------------------------------------------------------------- 8

def test_8_scaling_exponents(report):
    grid = np.array([0.2, 0.1, 0.05, 0.025])
    smooth = [cover_smooth(Lp(2, 2), e).raw_count for e in grid]
    gridded = [cover_grid(Lp(2, 2), e).raw_count for e in grid]
    s1 = np.polyfit(np.log(1 / grid), np.log(smooth), 1)[0]
    s2 = np.polyfit(np.log(1 / grid), np.log(gridded), 1)[0]
    report(8, 0.5 <= s1 <= 2 and s1 < s2,
           f"smooth slope {s1:.3f} (counts {smooth}), grid slope {s2:.3f} (counts {gridded})")


# ---------------------------------------------------------------- 9

def test_9_oracle_self_consistency(report):
    rng = np.random.default_rng(9)
    kinds = ["l1", "l1.5", "l2", "l3", "cube", "cut"]
    bad, done = [], 0
    while done < 500:
        n = int(rng.integers(1, 5))
        kind = kinds[done % len(kinds)]
        B = random_basis(rng, n, 3)
        t = random_target(rng, B, denom=16)
        if kind.startswith("l"):
            p = float(kind[1:])
            K, gauge, R = Lp(p, n), (lambda X, p=p: gauge_lp(X, p)), n ** max(0.0, 0.5 - 1 / p)
        else:
            K = cube(n) if kind == "cube" else cube_plus(n)
            gauge, R = (lambda X, K=K: gauge_polytope(X, K.A, K.b)), math.sqrt(n)
        scan = box_scan_cvp(B, t, gauge, R, max_points=300_000)
        if scan is None:  # box too large for the naive scan; draw again
            continue
        done += 1
        res = exact_cvp(Lattice(B), t, K)
        if tuple(int(v) for v in res.vector) != tuple(int(v) for v in scan[0]):
            bad.append((n, kind, tuple(res.vector), tuple(scan[0])))
    report(9, not bad, f"500 instances n<=4, mismatches={bad[:5]}")
