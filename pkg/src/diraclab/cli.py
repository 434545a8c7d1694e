"""Command line front end.

One executable with single-solve subcommands (radial, multicenter) that
emit JSON, and experiment subcommands that emit deterministic CSV plus a
JSON manifest.  Exit codes: 0 success, 1 usage or config error, 2 solver
failure, 3 a converged margin beyond its budget.
"""
from __future__ import annotations

import argparse
import json
import sys

from . import charges
from .configio import ConfigDoc, doc_from_charge, emit_config, load_config
from .errors import (BelowGapError, ChargeModelError, ConfigError,
                     IllConditionedBasisError, NoGapEigenvalueError)
from .experiments import (EXIT_SOLVER, EXIT_USAGE, config_from_doc,
                          run_experiment)
from .gaussian import default_spinor_basis, grid_for_basis
from .multicenter import GapSolveConfig, solve_gap
from .radial import (RadialGrid, RadialSolveConfig,
                     lowest_gap_eigenvalue_radial)

EXPERIMENT_COMMANDS = ("conjecture-sweep", "pes-scan", "contraction-check",
                       "schrodinger", "hardy-sweep")


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="run configuration file")
    common.add_argument("--out", metavar="PATH",
                        help="output file (JSON for solves, CSV for scans)")
    common.add_argument("--workers", type=int, metavar="N",
                        help="parallel scan workers")
    common.add_argument("--verbose", action="store_true",
                        help="progress and summary lines on stderr")
    common.add_argument("--print-config", action="store_true",
                        help="echo the canonical config and exit")

    parser = argparse.ArgumentParser(
        prog="dirac-lab",
        description="Gap eigenvalues of Coulomb-Dirac operators and "
                    "related scans.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_rad = sub.add_parser("radial", parents=[common],
                           help="single radially symmetric gap solve")
    p_rad.add_argument("--nu", type=float, metavar="NU",
                       help="point charge shortcut instead of --config")
    p_rad.add_argument("--kappa", type=int, default=-1,
                       help="angular channel (default -1)")

    sub.add_parser("multicenter", parents=[common],
                   help="single 3D gap solve for an atomic charge")

    for name, blurb in (
            ("conjecture-sweep", "gap margins vs the merged-charge bound"),
            ("pes-scan", "lambda1 plus nuclear repulsion vs separation"),
            ("contraction-check", "lambda1 along uniform contractions"),
            ("schrodinger", "nonrelativistic energies vs -nu^2/2"),
            ("hardy-sweep", "quotient constants c(mu) over a family")):
        sub.add_parser(name, parents=[common], help=blurb)
    return parser


def _load_doc(args) -> ConfigDoc:
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    return load_config(args.config)


def _write_text(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_radial(args) -> int:
    if args.nu is not None:
        doc = doc_from_charge(charges.atom((0.0, 0.0, 0.0), args.nu))
    else:
        doc = _load_doc(args)
    if args.print_config:
        _write_text(emit_config(doc), args.out)
        return 0
    mu = doc.charge()
    if not mu.radially_symmetric:
        raise ConfigError("charge is not radially symmetric; "
                          "use the multicenter subcommand")
    grid = RadialGrid(float(doc.get("grid", "r_min", 1e-6)),
                      float(doc.get("grid", "r_max", 100.0)),
                      int(doc.get("grid", "n", 4000)))
    rcfg = RadialSolveConfig(
        lam_tol=float(doc.get("solver", "lam_tol", 1e-10)),
        residual_tol=float(doc.get("solver", "residual_tol", 1e-12)),
        max_iterations=int(doc.get("solver", "max_iterations", 80)))
    res = lowest_gap_eigenvalue_radial(mu, args.kappa, grid, rcfg)
    if args.verbose:
        print(f"kappa={args.kappa} lambda1={res.lambda1:.12g} "
              f"iterations={res.iterations}", file=sys.stderr)
    _write_text(json.dumps(res.to_json(), indent=2, sort_keys=True), args.out)
    return 0


def _cmd_multicenter(args) -> int:
    doc = _load_doc(args)
    if args.print_config:
        _write_text(emit_config(doc), args.out)
        return 0
    mu = doc.charge()
    basis = default_spinor_basis(
        mu, n_s=int(doc.get("basis", "n_s", 16)),
        alpha0=float(doc.get("basis", "alpha0", 0.02)),
        beta=float(doc.get("basis", "beta", 2.8)))
    gcfg = GapSolveConfig(
        lam_tol=float(doc.get("solver", "lam_tol", 1e-8)),
        residual_tol=float(doc.get("solver", "residual_tol", 1e-8)),
        max_iterations=int(doc.get("solver", "max_iterations", 60)),
        n_radial=int(doc.get("grid", "n_radial", 96)),
        angular_order=int(doc.get("grid", "angular_order", 29)),
        crosscheck=bool(doc.get("solver", "crosscheck", 0)),
        crosscheck_tol=float(doc.get("solver", "crosscheck_tol", 1e-3)))
    grid = grid_for_basis(basis, gcfg.n_radial, gcfg.angular_order)
    res = solve_gap(basis, mu, grid, gcfg)
    if args.verbose:
        print(f"lambda1={res.lambda1:.12g} iterations={res.iterations} "
              f"flags={','.join(res.flags) or '-'}", file=sys.stderr)
    _write_text(json.dumps(res.to_json(), indent=2, sort_keys=True), args.out)
    return 0


def _cmd_experiment(args) -> int:
    doc = _load_doc(args)
    if args.print_config:
        _write_text(emit_config(doc), args.out)
        return 0
    cfg = config_from_doc(doc, kind=args.command, workers=args.workers,
                          out_csv=args.out)
    report = run_experiment(cfg)
    if cfg.out_csv:
        report.write(cfg.out_csv, cfg.out_manifest)
        if args.verbose:
            print(f"wrote {len(report.rows)} rows to {cfg.out_csv}",
                  file=sys.stderr)
    else:
        sys.stdout.write(report.csv_body())
    if args.verbose:
        print(json.dumps(report.summary, sort_keys=True, default=str),
              file=sys.stderr)
    return report.exit_code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "radial":
            return _cmd_radial(args)
        if args.command == "multicenter":
            return _cmd_multicenter(args)
        return _cmd_experiment(args)
    except (ConfigError, ChargeModelError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NoGapEigenvalueError, BelowGapError,
            IllConditionedBasisError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
