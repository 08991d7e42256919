"""Instance files, experiment runs and covering size tables.

Instances and results are JSON with sorted keys; tables are RFC-4180 CSV.
All randomness comes from numpy's Philox generator seeded from the run
configuration, so every output except the wall-clock columns is reproducible
byte for byte.
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import math
import time
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import config
from .boost import CvpInstance, boost_deterministic, boost_randomized
from .coverings import cover_grid, cover_polytope, cover_smooth, cover_zonotope, validate_cover
from .errors import BudgetExceeded, LatcoverError
from .lattice import Lattice, exact_cvp
from .norms import Lp, NormBody, PolytopeH, Zonotope, body_from_json, cube
from .sparsify import sparsifier_cvp

GENERATOR = "Philox"
METHODS = ("exact", "boost-det", "boost-rand", "sparsify")
CONSTRUCTIONS = ("grid", "zonotope", "polytope", "smooth")


def make_rng(*seed) -> np.random.Generator:
    """Counter-based 64-bit generator keyed by the integers in ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(s) for s in seed])))


# ---------------------------------------------------------------- norms

def random_zonotope(n: int, m: int, rng, entry_bound: int = 3) -> Zonotope:
    """Zonotope with m integer generators spanning R^n."""
    while True:
        G = rng.integers(-entry_bound, entry_bound + 1, size=(m, n))
        if np.linalg.matrix_rank(G) == n and not np.any(np.all(G == 0, axis=1)):
            return Zonotope(G)


def _load_json(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def parse_norm(desc: str, n: int, seed: int = 0) -> NormBody:
    """Build a norm from a descriptor.

    ``lp:P`` (P a number or ``inf``), ``cube``, ``polytope:FILE`` with keys
    A and b, ``zonotope:FILE`` with key gens, or ``zonotope:random[:M]`` for
    a seeded random zonotope with M generators (default n + 1).
    """
    kind, _, arg = desc.partition(":")
    if kind == "lp":
        if arg in ("inf", "infinity"):
            return cube(n)
        return Lp(float(arg), n)
    if kind == "cube":
        return cube(n)
    if kind == "polytope":
        d = _load_json(arg)
        return PolytopeH(d["A"], d["b"])
    if kind == "zonotope":
        if arg.startswith("random"):
            m = int(arg.split(":")[1]) if ":" in arg else n + 1
            return random_zonotope(n, m, make_rng(seed, 7919))
        d = _load_json(arg)
        return Zonotope(d["gens"] if "gens" in d else d["generators"])
    raise ValueError(f"unknown norm descriptor {desc!r}")


# ---------------------------------------------------------------- instances

def _frac_str(x: Fraction) -> str:
    return str(Fraction(x))


def instance_to_json(inst: CvpInstance) -> dict:
    return {"basis": [list(r) for r in inst.lattice.rows],
            "target": [_frac_str(v) for v in inst.target],
            "norm": inst.norm.to_json(), "epsilon": inst.epsilon}


def instance_from_json(d: dict) -> CvpInstance:
    lat = Lattice(d["basis"])
    norm = body_from_json(d["norm"], lat.n)
    return CvpInstance(lat, tuple(Fraction(v) for v in d["target"]), norm, float(d["epsilon"]))


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def gen_instance(n: int, norm: NormBody, seed: int, entry_bound: int = 5,
                 epsilon: float = 0.25, denominator: int = 64) -> CvpInstance:
    """Random full-rank integer basis and a rational target in its parallelepiped.

    Singular bases are resampled.  The target is B u with u_i = k_i / denominator,
    0 <= k_i < denominator.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = make_rng(seed, n, entry_bound)
    while True:
        B = rng.integers(-entry_bound, entry_bound + 1, size=(n, n))
        if round(abs(np.linalg.det(B.astype(float)))) == 0:
            continue
        try:
            lat = Lattice(B)
        except ValueError:
            continue
        break
    k = rng.integers(0, denominator, size=n)
    u = [Fraction(int(v), denominator) for v in k]
    t = tuple(sum(lat.rows[i][j] * u[j] for j in range(n)) for i in range(n))
    return CvpInstance(lat, t, norm, epsilon)


def write_instance(inst: CvpInstance, path) -> None:
    Path(path).write_text(dumps(instance_to_json(inst)))


def read_instance(path) -> CvpInstance:
    return instance_from_json(_load_json(path))


# ---------------------------------------------------------------- experiments

@dataclass
class ExperimentConfig:
    method: str = "boost-det"
    norm: str = "lp:2"
    epsilon: float = 0.25
    n: int = 2
    seed: int = 0
    count: int = 10
    entry_bound: int = 5
    max_pieces: int = config.MAX_PIECES
    max_enum_points: int = config.MAX_ENUM_POINTS
    max_wall_ms: float = 600_000.0
    test_mode: bool = True
    timing: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")
        if min(self.max_pieces, self.max_enum_points, self.max_wall_ms, self.count, self.n) <= 0:
            raise ValueError("budgets, count and n must be positive")


@dataclass
class ResultRow:
    instance: int
    method: str
    epsilon: float
    distance: float | None
    opt_distance: float | None
    ratio: float | None
    inner_calls: int
    pieces: int
    wall_ms: float
    status: str


RESULT_FIELDS = [f for f in ResultRow.__dataclass_fields__]


def method_bound(method: str, eps: float) -> float:
    """Largest ratio a run of ``method`` may report at parameter eps."""
    if method == "exact":
        return 1.0
    if method == "boost-det":
        return 1 + 7 * eps
    return 1 + eps


@contextlib.contextmanager
def budgets(max_pieces=None, max_enum_points=None):
    old = config.MAX_PIECES, config.MAX_ENUM_POINTS
    if max_pieces is not None:
        config.MAX_PIECES = int(max_pieces)
    if max_enum_points is not None:
        config.MAX_ENUM_POINTS = int(max_enum_points)
    try:
        yield
    finally:
        config.MAX_PIECES, config.MAX_ENUM_POINTS = old


def build_covering(norm: NormBody, eps: float, construction: str = "auto"):
    if construction == "auto":
        if isinstance(norm, Zonotope):
            construction = "zonotope"
        elif isinstance(norm, PolytopeH):
            construction = "polytope"
        elif norm.smoothness is not None:
            construction = "smooth"
        else:
            construction = "grid"
    if construction == "zonotope":
        return cover_zonotope(norm, eps)
    if construction == "polytope":
        return cover_polytope(norm.A, norm.b, eps)
    if construction == "smooth":
        return cover_smooth(norm, eps)
    if construction == "grid":
        return cover_grid(norm, eps)
    raise ValueError(f"unknown construction {construction!r}")


def _solve(cfg: ExperimentConfig, inst: CvpInstance, idx: int, cov):
    if cfg.method == "exact":
        t0 = time.perf_counter()
        res = exact_cvp(inst.lattice, inst.target, inst.norm)
        return res.distance, 0, (time.perf_counter() - t0) * 1e3
    if cfg.method == "boost-det":
        rep = boost_deterministic(inst, cov, test_mode=cfg.test_mode)
        if cfg.test_mode and not (rep.invariant_ok and rep.contraction_ok):
            raise AssertionError("search invariant violated")
    elif cfg.method == "boost-rand":
        rep = boost_randomized(inst, make_rng(cfg.seed, idx, 1), test_mode=cfg.test_mode)
    else:
        rep = sparsifier_cvp(inst, make_rng(cfg.seed, idx, 2), test_mode=cfg.test_mode)
    return rep.distance, rep.inner_calls, rep.wall_ms


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Run ``cfg.count`` generated instances; returns the result document.

    The document holds the config, the generator name, one row per instance,
    the failure list and ``ok`` (all statuses OK and all ratios in bounds).
    """
    norm = parse_norm(cfg.norm, cfg.n, cfg.seed)
    rows, failures = [], []
    start = time.perf_counter()
    cov, pieces = None, 0
    with budgets(cfg.max_pieces, cfg.max_enum_points):
        if cfg.method == "boost-det":
            try:
                cov = build_covering(norm, cfg.epsilon)
                pieces = cov.raw_count
                # implicit coverings are never materialized
                if cov.is_explicit and pieces > cfg.max_pieces:
                    raise BudgetExceeded(f"{pieces} pieces exceed the budget")
            except LatcoverError as exc:
                failures.append({"instance": None, "status": f"error:{type(exc).__name__}",
                                 "message": str(exc)})
                cov = None
        for idx in range(cfg.count):
            inst = gen_instance(cfg.n, norm, cfg.seed * 1_000_003 + idx, cfg.entry_bound, cfg.epsilon)
            dist = opt = ratio = None
            calls, wall, status = 0, 0.0, "ok"
            if (time.perf_counter() - start) * 1e3 > cfg.max_wall_ms:
                status = "budget:wall"
            elif cfg.method == "boost-det" and cov is None:
                status = "skipped"
            else:
                try:
                    dist, calls, wall = _solve(cfg, inst, idx, cov)
                    if cfg.test_mode:
                        opt = exact_cvp(inst.lattice, inst.target, norm).distance
                        ratio = 1.0 if opt == 0 and dist == 0 else (math.inf if opt == 0 else dist / opt)
                        eta = config.tol()
                        if ratio < 1 - eta or ratio > method_bound(cfg.method, cfg.epsilon) + eta:
                            status = "ratio"
                except BudgetExceeded as exc:
                    status = "budget"
                    failures.append({"instance": idx, "status": status, "message": str(exc)})
                except (LatcoverError, AssertionError, ValueError) as exc:
                    status = f"error:{type(exc).__name__}"
                    failures.append({"instance": idx, "status": status, "message": str(exc)})
            if status in ("ratio", "budget:wall", "skipped"):
                failures.append({"instance": idx, "status": status, "ratio": ratio})
            rows.append(ResultRow(idx, cfg.method, cfg.epsilon, dist, opt, ratio, calls, pieces,
                                  round(wall, 3) if cfg.timing else 0.0, status))
    ok = not failures and all(r.status == "ok" for r in rows)
    ratios = [r.ratio for r in rows if r.ratio is not None]
    return {"config": asdict(cfg), "generator": GENERATOR, "ok": ok,
            "max_ratio": max(ratios) if ratios else None,
            "bound": method_bound(cfg.method, cfg.epsilon),
            "rows": [asdict(r) for r in rows], "failures": failures}


def rows_to_csv(rows, fields) -> str:
    buf = _io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\r\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fields})
    return buf.getvalue()


def write_results(doc: dict, out) -> tuple[Path, Path]:
    """Write ``out``.csv and ``out``.json; returns both paths."""
    out = Path(out)
    csv_path, json_path = out.with_suffix(".csv"), out.with_suffix(".json")
    csv_path.write_text(rows_to_csv(doc["rows"], RESULT_FIELDS), newline="")
    json_path.write_text(dumps(doc))
    return csv_path, json_path


# ---------------------------------------------------------------- covering tables

REPORT_FIELDS = ["eps", "eps_effective", "count", "distinct", "margin", "wall_ms", "status"]


def loglog_slope(eps, counts) -> float:
    """Least-squares slope of log(count) against log(1/eps)."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.log(np.asarray(counts, dtype=float))
    if len(x) < 2:
        return math.nan
    return float(np.polyfit(x, y, 1)[0])


def cover_report(norm: NormBody, construction: str, eps_grid, *, validate: int = 2000,
                 seed: int = 0, timing: bool = True, max_pieces: int | None = None) -> dict:
    """Piece counts and validation margins of one construction over an eps grid.

    ``count`` is the pre-deduplication count, ``distinct`` the number of
    distinct pieces when the covering is explicit.  The margin is the
    smallest slack of the validation checks (nonnegative means valid).
    """
    rows = []
    for i, eps in enumerate(eps_grid):
        row = {"eps": float(eps)}
        t0 = time.perf_counter()
        try:
            with budgets(max_pieces=max_pieces):
                cov = build_covering(norm, float(eps), construction)
            if max_pieces is not None and cov.is_explicit and len(cov) > max_pieces:
                raise BudgetExceeded("piece budget")
            wall = (time.perf_counter() - t0) * 1e3
            row.update(eps_effective=cov.epsilon, count=cov.raw_count,
                       distinct=len(cov) if cov.is_explicit else "", status="ok")
            if validate:
                rep = validate_cover(cov, count=validate, rng=make_rng(seed, i))
                row["margin"] = -max(rep.worst_coverage, rep.worst_containment)
                if not rep.ok:
                    row["status"] = "invalid"
            else:
                row["margin"] = ""
            row["wall_ms"] = round(wall, 3) if timing else 0.0
        except BudgetExceeded:
            row.update(eps_effective="", count="", distinct="", margin="", wall_ms="",
                       status="BudgetExceeded")
        rows.append(row)
    good = [r for r in rows if r["status"] != "BudgetExceeded"]
    slope = loglog_slope([r["eps"] for r in good], [r["count"] for r in good])
    return {"construction": construction, "norm": norm.to_json(), "rows": rows,
            "slope": slope, "generator": GENERATOR}


def report_to_csv(doc: dict) -> str:
    text = rows_to_csv(doc["rows"], REPORT_FIELDS)
    return text + f"# loglog_slope,{doc['slope']:.6f}\r\n"
