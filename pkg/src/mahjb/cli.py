"""Command line interface: ``mahjb solve | rates | eps-sweep``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import harness
from .harness import ConvergenceRecord
from .mesh import initial_mesh, mesh_size, refine_uniform
from .problems import EXAMPLES, get_problem
from .solver import LinearSolveError, NewtonConfig, NewtonConvergenceError, continuation_solve
from .spaces import build_scalar_space, build_vector_space

EXIT_OK = 0
EXIT_NONCONVERGENCE = 2
EXIT_INVALID = 3


class ConfigError(ValueError):
    pass


def _eps_list(text: str) -> list[float]:
    try:
        vals = [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse eps list {text!r}") from None
    if not vals or any(not (0.0 < v <= 0.5) for v in vals):
        raise ConfigError(f"every eps must lie in (0, 1/2], got {text!r}")
    return vals


def _config(args) -> NewtonConfig:
    if args.newton_tol is not None and args.newton_tol <= 0:
        raise ConfigError("--newton-tol must be positive")
    if args.max_iter is not None and args.max_iter < 1:
        raise ConfigError("--max-iter must be at least 1")
    cfg = NewtonConfig()
    if args.newton_tol is not None:
        cfg.tol_abs = args.newton_tol
        cfg.tol_rel = 0.0
    if args.max_iter is not None:
        cfg.max_iter = args.max_iter
    return cfg


def _continuation_records(example_id, eps_list, max_level, cfg) -> dict[float, list]:
    """Per level, one continuation pass over the descending eps list."""
    p = get_problem(example_id)
    order = sorted(eps_list, reverse=True)
    out = {e: [] for e in order}
    m = initial_mesh()
    for level in range(max_level + 1):
        if level:
            m = refine_uniform(m)
        ndof = build_vector_space(m).ndof + build_scalar_space(m).ndof
        try:
            sols = continuation_solve(p, m, order, cfg)
        except (NewtonConvergenceError, LinearSolveError) as exc:
            logging.getLogger(__name__).warning("level %d: %s", level, exc)
            sols = [None] * len(order)
        for e, s in zip(order, sols):
            if s is None:
                nan = float("nan")
                rec = ConvergenceRecord(ndof, 1 / mesh_size(m), nan, nan, nan, -1, e,
                                        example_id, level, False)
            else:
                linf, l2, h1 = harness.error_norms(s.u_h, s.w_h, p, m)
                rec = ConvergenceRecord(ndof, 1 / mesh_size(m), linf, l2, h1,
                                        s.report.iterations, e, example_id, level, True)
            out[e].append(rec)
    return out


def _print_records(records, stream=sys.stdout):
    print(f"{'level':>5} {'ndof':>8} {'hinv':>6} {'Linf':>11} {'L2':>11} {'H1':>11} {'niter':>5}",
          file=stream)
    for r in records:
        print(f"{r.level:5d} {r.ndof:8d} {r.hinv:6.0f} {r.err_linf:11.4e} "
              f"{r.err_l2:11.4e} {r.err_h1:11.4e} {r.niter:5d}", file=stream)


def cmd_solve(args) -> int:
    if args.example not in EXAMPLES:
        raise ConfigError(f"unknown example {args.example}")
    if args.max_level < 0:
        raise ConfigError("--max-level must be non-negative")
    eps_list = _eps_list(args.eps)
    cfg = _config(args)
    if args.continuation:
        by_eps = _continuation_records(args.example, eps_list, args.max_level, cfg)
    else:
        by_eps = {e: harness.run_convergence(args.example, e, args.max_level, cfg)
                  for e in eps_list}
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    failed = False
    for eps, records in by_eps.items():
        failed |= not all(r.converged for r in records)
        if not args.quiet:
            print(f"example {args.example}, eps = {eps:g}")
            _print_records(records)
        if out_dir is not None:
            stem = f"convhist_ex{args.example}_eps{eps:g}"
            if args.format == "csv":
                harness.emit_csv(records, out_dir / f"{stem}.csv")
            else:
                harness.emit_dat(records, out_dir / f"{stem}.dat")
    return EXIT_NONCONVERGENCE if failed else EXIT_OK


def cmd_rates(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        raise ConfigError(f"no such file: {path}")
    cols = harness.read_dat(path)
    names = [("Linferr", "Linf"), ("L2err", "L2"), ("H1err", "H1")]
    missing = [c for c, _ in names if c not in cols]
    if missing:
        raise ConfigError(f"{path} lacks columns {missing}")
    hinv = cols.get("hinv", np.arange(len(cols["L2err"])))
    if len(hinv) < 2:
        raise ConfigError("at least two rows are needed for rates")
    rates = {label: harness.estimate_rates(cols[c]) for c, label in names}
    print(f"{'hinv':>6} " + " ".join(f"{label:>7}" for _, label in names))
    for i in range(len(hinv) - 1):
        print(f"{hinv[i + 1]:6.0f} " + " ".join(f"{rates[label][i]:7.3f}" for _, label in names))
    return EXIT_OK


def cmd_eps_sweep(args) -> int:
    if args.example not in (3, 4):
        raise ConfigError("eps-sweep is defined for examples 3 and 4")
    if not (0 <= args.level <= args.finer_level):
        raise ConfigError("need 0 <= --level <= --finer-level")
    eps_list = _eps_list(args.eps) if args.eps else None
    try:
        table = harness.eps_sweep(args.example, eps_list, args.level, args.finer_level)
    except (NewtonConvergenceError, LinearSolveError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    print(table.format())
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mahjb", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="h-convergence history for one example")
    s.add_argument("--example", type=int, required=True, choices=sorted(EXAMPLES))
    s.add_argument("--eps", required=True, help="comma separated list, e.g. 0.1,0.01")
    s.add_argument("--max-level", type=int, default=6)
    s.add_argument("--continuation", action="store_true",
                   help="warm-start across the eps list on each mesh")
    s.add_argument("--out", help="directory for the data files")
    s.add_argument("--format", choices=("dat", "csv"), default="dat")
    s.add_argument("--newton-tol", type=float, help="absolute residual tolerance")
    s.add_argument("--max-iter", type=int)
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("rates", help="per-norm rates of a data file")
    r.add_argument("--in", dest="input", required=True)
    r.set_defaults(func=cmd_rates)

    e = sub.add_parser("eps-sweep", help="L^inf errors and rates in eps on two meshes")
    e.add_argument("--example", type=int, required=True, choices=(3, 4))
    e.add_argument("--level", type=int, default=6)
    e.add_argument("--finer-level", type=int, default=7)
    e.add_argument("--eps", help="comma separated list (default 2^-1 ... 2^-11)")
    e.set_defaults(func=cmd_eps_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
