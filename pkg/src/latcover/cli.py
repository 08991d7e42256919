"""Command line entry point: ``latcover gen|solve|cover|validate|certify|bench``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import io
from .boost import boost_randomized, solve_cvp
from .coverings import validate_cover
from .errors import LatcoverError
from .lattice import Lattice, exact_cvp
from .sparsify import certify_sparsifier, sparsifier_cvp, sparsify_candidates


def _floats(text: str) -> list[float]:
    return [float(eval_fraction(v)) for v in text.split(",") if v]


def eval_fraction(v: str) -> float:
    """Parse ``0.25`` or ``1/7``."""
    if "/" in v:
        a, b = v.split("/")
        return float(a) / float(b)
    return float(v)


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _add_budgets(p):
    p.add_argument("--budget-pieces", type=int, default=io.config.MAX_PIECES)
    p.add_argument("--budget-enum", type=int, default=io.config.MAX_ENUM_POINTS)
    p.add_argument("--budget-ms", type=float, default=600_000.0)


def cmd_gen(a) -> int:
    norm = io.parse_norm(a.norm, a.n, a.seed)
    if a.count == 1:
        inst = io.gen_instance(a.n, norm, a.seed, a.entry_bound, a.eps)
        _emit(io.dumps(io.instance_to_json(inst)), a.out)
        return 0
    if not a.out:
        print("--out DIR is required with --count > 1", file=sys.stderr)
        return 2
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(a.count):
        inst = io.gen_instance(a.n, norm, a.seed * 1_000_003 + i, a.entry_bound, a.eps)
        io.write_instance(inst, out / f"instance_{i:04d}.json")
    return 0


def cmd_solve(a) -> int:
    inst = io.read_instance(a.instance)
    if a.eps is not None:
        inst.epsilon = a.eps
    rng = io.make_rng(a.seed)
    with io.budgets(a.budget_pieces, a.budget_enum):
        if a.method == "exact":
            res = exact_cvp(inst.lattice, inst.target, inst.norm)
            doc = {"vector": [int(v) for v in res.vector], "coeffs": [int(v) for v in res.coeffs],
                   "distance": res.distance, "method": "exact"}
        else:
            if a.method == "boost-det":
                rep = solve_cvp(inst, test_mode=a.test)
            elif a.method == "boost-rand":
                rep = boost_randomized(inst, rng, test_mode=a.test)
            else:
                rep = sparsifier_cvp(inst, rng, test_mode=a.test)
            if a.test and rep.opt_distance is None:
                rep.opt_distance = exact_cvp(inst.lattice, inst.target, inst.norm).distance
            doc = rep.to_json()
    doc["generator"] = io.GENERATOR
    _emit(io.dumps(doc), a.out)
    return 0


def cmd_cover(a) -> int:
    norm = io.parse_norm(a.norm, a.n, a.seed)
    doc = io.cover_report(norm, a.method, _floats(a.eps), validate=a.validate, seed=a.seed,
                          timing=not a.no_timing, max_pieces=a.budget_pieces)
    _emit(io.report_to_csv(doc), a.out)
    print(f"loglog slope {doc['slope']:.4f}", file=sys.stderr)
    return 0 if all(r["status"] == "ok" for r in doc["rows"]) else 1


def cmd_validate(a) -> int:
    norm = io.parse_norm(a.norm, a.n, a.seed)
    docs, ok = [], True
    with io.budgets(a.budget_pieces, a.budget_enum):
        for eps in _floats(a.eps):
            cov = io.build_covering(norm, eps, a.method)
            rep = validate_cover(cov, mode=a.mode, count=a.count, rng=io.make_rng(a.seed))
            ok &= rep.ok
            docs.append({"eps": eps, "pieces": cov.raw_count, **rep.to_json()})
    _emit(io.dumps({"norm": norm.to_json(), "construction": a.method, "reports": docs}), a.out)
    return 0 if ok else 1


def cmd_certify(a) -> int:
    data = json.loads(Path(a.lattice).read_text())
    basis = data["basis"] if isinstance(data, dict) else data
    lat = Lattice(basis)
    norm = io.parse_norm(a.norm, lat.n, a.seed)
    primes = [int(v) for v in a.primes.split(",")] if a.primes else None
    cands = sparsify_candidates(lat, norm, a.delta, trials=a.count, rng=io.make_rng(a.seed),
                                primes=primes, method=a.method)
    if a.resolution is not None:
        for c in cands:
            certify_sparsifier(c, norm, method="grid", resolution=a.resolution)
    doc = {"delta": a.delta, "generator": io.GENERATOR,
           "sparsifiers": [c.to_json() for c in cands]}
    _emit(io.dumps(doc), a.out)
    return 0 if any(c.certified and not c.fallback for c in cands) else 1


def cmd_bench(a) -> int:
    cfg = io.ExperimentConfig(method=a.method, norm=a.norm, epsilon=a.eps, n=a.n, seed=a.seed,
                              count=a.count, entry_bound=a.entry_bound,
                              max_pieces=a.budget_pieces, max_enum_points=a.budget_enum,
                              max_wall_ms=a.budget_ms, timing=not a.no_timing)
    doc = io.run_experiment(cfg)
    if a.out:
        io.write_results(doc, a.out)
    else:
        sys.stdout.write(io.rows_to_csv(doc["rows"], io.RESULT_FIELDS))
    if not doc["ok"]:
        sys.stderr.write(json.dumps({"failures": doc["failures"]}, sort_keys=True) + "\n")
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="latcover",
                                 description="Lattice CVP under general norms via coverings.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate random CVP instances")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--norm", default="lp:2")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=1)
    p.add_argument("--entry-bound", type=int, default=5)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("solve", help="solve one instance file")
    p.add_argument("instance")
    p.add_argument("--method", choices=io.METHODS, default="boost-det")
    p.add_argument("--eps", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test", action="store_true", help="also run the exact oracle")
    p.add_argument("--out")
    _add_budgets(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cover", help="covering size table over an eps grid")
    p.add_argument("--norm", default="lp:2")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps", default="0.2,0.1,0.05")
    p.add_argument("--method", choices=io.CONSTRUCTIONS, default="smooth")
    p.add_argument("--validate", type=int, default=2000, help="validation samples (0 to skip)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-timing", action="store_true")
    p.add_argument("--out")
    _add_budgets(p)
    p.set_defaults(func=cmd_cover)

    p = sub.add_parser("validate", help="validate coverings")
    p.add_argument("--norm", default="lp:2")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--eps", default="0.25")
    p.add_argument("--method", choices=io.CONSTRUCTIONS, default="grid")
    p.add_argument("--mode", choices=("sampled", "vertex-exact"), default="sampled")
    p.add_argument("--count", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_budgets(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("certify", help="search and certify mod-p sparsifiers")
    p.add_argument("lattice", help="JSON file with a basis (an instance file works)")
    p.add_argument("--norm", default="lp:2")
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--primes", help="comma separated primes")
    p.add_argument("--method", choices=("coset", "grid"), default="coset")
    p.add_argument("--resolution", type=float, help="also report a grid check at this spacing")
    p.add_argument("--count", type=int, default=4, help="random congruences per prime")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("bench", help="run an experiment over generated instances")
    p.add_argument("--method", choices=io.METHODS, default="boost-det")
    p.add_argument("--norm", default="lp:2")
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=10)
    p.add_argument("--entry-bound", type=int, default=5)
    p.add_argument("--no-timing", action="store_true", help="zero the wall-clock columns")
    p.add_argument("--out", help="output prefix for .csv and .json")
    _add_budgets(p)
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (LatcoverError, ValueError, OSError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
