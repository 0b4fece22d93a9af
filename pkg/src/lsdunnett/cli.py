"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/scenario error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import linmod
from .datamodel import DataError, Dataset, builtin_dataset, builtin_names, load_csv
from .mlt import ConvergenceError
from .mvdist import IntegrationError
from .report import (UnknownProcedure, parse_procedures, render_csv, render_sim_csv, render_sim_text,
                     render_text, run_analysis)
from .sim import (ALL_TESTS, ScenarioError, SimulationError, load_scenario, run_scenario, table1_row,
                  table1_rows, table1_suite)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}")


def _add_dataset_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", help=f"built-in dataset ({', '.join(builtin_names())})")
    p.add_argument("--csv", help="CSV file with one row per observation")
    p.add_argument("--group-col", default="group")
    p.add_argument("--response-col", default="response")
    p.add_argument("--control", help="control level (required with --csv)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lsdunnett", description="Many-to-one location and scale comparisons.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    a = sub.add_parser("analyze", help="adjusted p-values for one dataset")
    _add_dataset_args(a)
    a.add_argument("--procedures", default="location,scale,mmm,mlt",
                   help="comma list from location,scale,mmm,mlt,sandwich,lepage,levene")
    a.add_argument("--alpha", type=float, default=0.05)
    a.add_argument("--seed", type=int, default=0, help="seeds QMC shifts and permutations")
    a.add_argument("--nresample", type=int, default=10000, help="permutations for lepage")
    a.add_argument("--scale-df", choices=("asymptotic", "classical"), default="asymptotic")
    a.add_argument("--output", choices=("text", "csv"), default="text")

    s = sub.add_parser("simulate", help="Monte Carlo FWER / power for one scenario")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--row", help="built-in grid row (see `lsdunnett simulate --list`)")
    src.add_argument("--scenario", help="INI scenario file")
    src.add_argument("--suite", action="store_true", help="every built-in row with reference rates")
    src.add_argument("--list", action="store_true", help="list built-in rows")
    s.add_argument("--nsim", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--tests", help=f"comma list from {','.join(ALL_TESTS)}")
    s.add_argument("--threads", type=int, help="worker processes (default: $LSDUNNETT_THREADS or 1)")
    s.add_argument("--output", choices=("text", "csv"), default="text")

    sub.add_parser("datasets", help="list built-in datasets")

    lv = sub.add_parser("levene", help="global Levene test of equal variances")
    _add_dataset_args(lv)
    return parser


def _load(args) -> Dataset:
    if bool(args.dataset) == bool(args.csv):
        raise UsageError("give exactly one of --dataset or --csv")
    if args.dataset:
        return builtin_dataset(args.dataset)
    if not args.control:
        raise UsageError("--control is required with --csv")
    return load_csv(args.csv, args.group_col, args.response_col, args.control)


def _analyze(args, out) -> None:
    if not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    try:
        procs = parse_procedures(args.procedures)
    except UnknownProcedure as exc:
        raise UsageError(str(exc)) from None
    ds = _load(args)
    rep = run_analysis(ds, procs, args.alpha, args.seed, args.scale_df, args.nresample)
    out.write(render_csv(rep) if args.output == "csv" else render_text(rep, ds.levels))


def _simulate(args, out) -> None:
    if args.list:
        for name, sc in table1_rows().items():
            out.write(f"{name:<24} n={','.join(map(str, sc.n))} mu={','.join(map(str, sc.mu))}"
                      f" sd={','.join(map(str, sc.sd))}\n")
        return
    tests = tuple(t.strip() for t in args.tests.split(",") if t.strip()) if args.tests else None
    if args.suite:
        results = table1_suite(args.nsim or 5000, 1 if args.seed is None else args.seed, tests=tests,
                               n_jobs=args.threads)
        out.write(render_sim_csv(results) if args.output == "csv" else render_sim_text(results))
        return
    sc = load_scenario(args.scenario) if args.scenario else table1_row(args.row)
    over = {}
    if args.nsim is not None:
        over["nsim"] = args.nsim
    if args.seed is not None:
        over["seed"] = args.seed
    if tests:
        over["tests"] = tests
    if over:
        sc = replace(sc, **over)
    res = run_scenario(sc, args.threads)
    out.write(render_sim_csv([res]) if args.output == "csv" else render_sim_text([res]))


def _levene(args, out) -> None:
    f, p = linmod.levene_global_stat(_load(args))
    out.write(f"Levene (mean-centred) F = {f:.4f}, p = {p:.4f}\n")


def main(argv: Sequence[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        if args.command == "analyze":
            _analyze(args, out)
        elif args.command == "simulate":
            _simulate(args, out)
        elif args.command == "datasets":
            for name in builtin_names():
                ds = builtin_dataset(name)
                out.write(f"{name}: {ds.n_obs} observations, {ds.n_groups} groups, "
                          f"control {ds.control}\n")
        elif args.command == "levene":
            _levene(args, out)
        else:
            parser.print_help(out)
            return EXIT_USAGE
    except UsageError as exc:
        err.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (DataError, ScenarioError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_DATA
    except (ConvergenceError, IntegrationError, SimulationError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        err.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
