"""Command-line entry point.

Exit status is 0 on success, 1 on bad usage or invalid input and 2 when
a numerical routine fails.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np
from scipy.stats import qmc

from .bench import bench_metamodels, bench_optimizers, write_opt_csv, write_r2_csv
from .bo import RunConfig, run_optimization
from .eigenbasis import TruncationPolicy, load_basis, manifold_stats, pca_fit, save_basis, save_spectrum
from .gp import NumericalError, fit_gp, model_to_dict
from .objectives import get_problem
from .reduction import select_active
from .shapes import FAMILIES, Mapping, build_database, get_family, load_database, save_database


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _family_name(name: str) -> str:
    if name in FAMILIES:
        return name
    try:
        fam = get_problem(name).family
    except ValueError:
        fam = None
    if fam is not None:
        return fam.name
    raise UsageError(f"--problem must be a shape family ({', '.join(FAMILIES)}) or a shape problem")


def _database(args):
    if getattr(args, "db", None):
        return load_database(args.db)
    fam = get_family(_family_name(args.problem))
    return build_database(fam, args.n or 5000, fam.default_mapping(args.mapping), seed=args.seed)


def _training_data(args):
    prob = get_problem(args.problem)
    n = args.n or 50
    rng = np.random.default_rng(args.seed)
    X = prob.lower + (prob.upper - prob.lower) * qmc.LatinHypercube(d=prob.d, seed=rng).random(n)
    y = prob(X)
    if prob.family is None or args.space == "x":
        return X, y
    if args.basis:
        basis = load_basis(args.basis)
    else:
        basis = pca_fit(build_database(prob.family, 5000, seed=args.seed))
    return basis.project(prob.family.phi(X, basis.mapping)), y


def cmd_build_db(args):
    db = _database(args)
    save_database(db, args.out or "database.csv")
    print(f"{db.size} designs, representation length {db.phi.shape[1]}")


def cmd_pca_report(args):
    db = _database(args)
    basis = pca_fit(db, policy=TruncationPolicy(args.cumulative, args.ratio))
    save_spectrum(basis, args.out or "spectrum.csv")
    if args.basis_out:
        save_basis(basis, args.basis_out)
    stats = manifold_stats(basis, db)
    cum = basis.explained()
    print(f"kept {basis.d_prime} axes ({cum[basis.d_prime - 1]:.4f}% of variance); "
          f"d95={stats.d95:.6g} d0={stats.d0:.6g}")


def cmd_fit_model(args):
    Z, y = _training_data(args)
    model = fit_gp(Z, y, seed=args.seed)
    with open(args.out or "model.json", "w") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
    print(f"log-likelihood {model.loglik:.6g}, lengthscales {np.round(model.components[0].lengthscales, 4)}")


def cmd_select_active(args):
    Z, y = _training_data(args)
    sel = select_active(Z, y, seed=args.seed)
    sel.to_csv(args.out or "selection.csv")
    print("active:", " ".join(str(j + 1) for j in sel.active))


def _load_configs(path):
    with open(path) as fh:
        data = json.load(fh)
    return [RunConfig(**c) for c in (data if isinstance(data, list) else [data])]


def cmd_optimize(args):
    if args.config:
        cfg = _load_configs(args.config)[0]
        if args.problem:
            cfg.problem = args.problem
    elif args.problem:
        cfg = RunConfig(args.problem, space="x" if get_problem(args.problem).family is None else "alpha")
    else:
        raise UsageError("optimize needs --config or --problem")
    cfg.seed = args.seed
    res = run_optimization(cfg)
    res.write_log(args.out or "run.csv")
    print(f"best {res.best:.6g} after {len(res.y)} evaluations")


def cmd_bench_r2(args):
    if not args.problem:
        raise UsageError("bench-r2 needs --problem")
    methods = args.methods.split(",")
    rows = bench_metamodels(args.problem, methods, args.n or 50, args.runs, args.seed)
    write_r2_csv(rows, args.out or "bench_r2.csv")
    for r in rows:
        print(f"{r.method}: {r.mean:.5f} ({r.sd:.5f})")


def cmd_bench_opt(args):
    if not args.config:
        raise UsageError("bench-opt needs --config")
    configs = _load_configs(args.config)
    if args.problem:
        for cfg in configs:
            cfg.problem = args.problem
    rows = bench_optimizers(configs, args.runs, args.seed)
    targets = [float(t) for t in args.targets.split(",")] if args.targets else []
    write_opt_csv(rows, targets, args.out or "bench_opt.csv")
    for r in rows:
        print(f"{r.method}: best {r.bests.mean():.5g}")


COMMANDS = {
    "build-db": cmd_build_db,
    "pca-report": cmd_pca_report,
    "fit-model": cmd_fit_model,
    "select-active": cmd_select_active,
    "optimize": cmd_optimize,
    "bench-r2": cmd_bench_r2,
    "bench-opt": cmd_bench_opt,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eigenshape", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--problem")
        p.add_argument("--mapping", default="contour", choices=[m.value for m in Mapping])
        p.add_argument("--n", type=int)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--config")
        p.add_argument("--out")
        if name in ("build-db", "pca-report"):
            p.add_argument("--db", help="read an existing database instead of sampling one")
        if name == "pca-report":
            p.add_argument("--cumulative", type=float, default=0.9999)
            p.add_argument("--ratio", type=float, default=1e-6)
            p.add_argument("--basis-out")
        if name in ("fit-model", "select-active"):
            p.add_argument("--space", choices=["x", "alpha"], default="alpha")
            p.add_argument("--basis", help="basis file to project with")
        if name == "bench-r2":
            p.add_argument("--methods", default="gp_x,gp_alpha")
        if name in ("bench-r2", "bench-opt"):
            p.add_argument("--runs", type=int, default=5)
        if name == "bench-opt":
            p.add_argument("--targets")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    if not argv:
        parser.print_usage(sys.stderr)
        return 1
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
        if args.command not in ("build-db", "pca-report", "optimize", "bench-opt") and not args.problem:
            raise UsageError(f"{args.command} needs --problem")
        if args.command in ("build-db", "pca-report") and not (args.problem or args.db):
            raise UsageError(f"{args.command} needs --problem or --db")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
        COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
