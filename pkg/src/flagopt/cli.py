"""Command-line benchmark driver.

Subcommands::

    flagopt run      one algorithm on one instance, trace written to --out
    flagopt compare  every algorithm on one instance
    flagopt audit    the lemma-check suite on the three generators
    flagopt sweep    final gap over a grid of horizons, with a log-log fit

Exit codes: 0 success, 1 audit violations, 2 invalid arguments,
3 divergence, 4 reference-quality failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import (ALGORITHMS, SUITE_DESCRIPTORS, RunConfig, compare, format_summary,
                    run_and_trace, sweep)
from .errors import InvalidArgumentError, ReferenceQualityError
from .generators import GENERATORS, ProblemDescriptor, generate_problem
from .flag import FlagConfig, flag_run
from .oracles import audit, check_mirror_descent_inequality

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_DIVERGED, EXIT_REFERENCE = 0, 1, 2, 3, 4


def _parse_box(text: str):
    if text.lower() == "none":
        return None, None
    try:
        lo, hi = (float(part) for part in text.split(","))
    except ValueError:
        raise InvalidArgumentError(f"--box expects 'lo,hi' or 'none', got {text!r}") from None
    return lo, hi


def descriptor_from_args(args) -> ProblemDescriptor:
    """Build the descriptor from --problem (generator name or descriptor file) plus overrides."""
    if args.problem in GENERATORS:
        desc = ProblemDescriptor(args.problem)
    else:
        path = Path(args.problem)
        if not path.is_file():
            raise InvalidArgumentError(f"--problem {args.problem!r} is neither a generator "
                                       f"({', '.join(GENERATORS)}) nor a descriptor file")
        desc = ProblemDescriptor.from_text(path.read_text())
    overrides = {}
    for name in ("seed", "n", "d"):
        if getattr(args, name) is not None:
            overrides[name] = getattr(args, name)
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.box is not None:
        overrides["box_lower"], overrides["box_upper"] = _parse_box(args.box)
    return replace(desc, **overrides) if overrides else desc


def _common(p):
    p.add_argument("--problem", default="lasso",
                   help="generator name (%s) or path to a descriptor file" % ", ".join(GENERATORS))
    p.add_argument("--seed", type=int)
    p.add_argument("--n", type=int, help="number of samples")
    p.add_argument("--d", type=int, help="dimension")
    p.add_argument("--lambda", dest="lam", type=float, help="l1 weight")
    p.add_argument("--box", help="'lo,hi' for a box [lo, hi]^d, or 'none' for the full space "
                        "(write --box=-1,1 when lo is negative)")
    p.add_argument("--delta", type=float, default=1e-8, help="metric regularizer")
    p.add_argument("--ref-iters", type=int, default=50_000,
                   help="FISTA iterations for the reference optimum (>= 10 * iters)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json-lines"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flagopt", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one algorithm and write its trace")
    _common(p)
    p.add_argument("--algo", choices=ALGORITHMS, default="flag")
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--out", help="trace file (default: <algo>.csv / .jsonl)")

    p = sub.add_parser("compare", help="run every algorithm on one instance")
    _common(p)
    p.add_argument("--algo", nargs="+", choices=ALGORITHMS, default=list(ALGORITHMS))
    p.add_argument("--iters", type=int, default=500)
    p.add_argument("--out", help="directory for per-algorithm traces")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("sweep", help="final gap over a grid of horizons")
    _common(p)
    p.add_argument("--algo", choices=ALGORITHMS, default="flag")
    p.add_argument("--iters", default="50,100,200,500",
                   help="comma-separated horizons")
    p.add_argument("--out", help="directory for per-horizon traces")
    p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("audit", help="run the lemma checks and print one row per check")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    return parser


def _report_rows(rows) -> int:
    print(format_summary(rows))
    return EXIT_DIVERGED if any(r.status == "diverged" for r in rows) else EXIT_OK


def cmd_run(args) -> int:
    desc = descriptor_from_args(args)
    out = args.out or f"{args.algo}.{'csv' if args.fmt == 'csv' else 'jsonl'}"
    config = RunConfig(desc, args.algo, args.iters, args.delta, args.ref_iters, out, args.fmt)
    generate_problem(desc)  # surface invalid descriptors before the reference run
    path, row, _ = run_and_trace(config)
    print(f"# {desc.one_line()}")
    print(f"# trace: {path}")
    return _report_rows([row])


def cmd_compare(args) -> int:
    desc = descriptor_from_args(args)
    RunConfig(desc, "flag", args.iters, args.delta, args.ref_iters, fmt=args.fmt)  # validate
    rows = compare(desc, args.iters, args.algo, args.delta, args.ref_iters, args.out, args.fmt,
                   args.jobs)
    print(f"# {desc.one_line()}")
    return _report_rows(rows)


def cmd_sweep(args) -> int:
    desc = descriptor_from_args(args)
    try:
        grid = [int(v) for v in args.iters.split(",") if v.strip()]
    except ValueError:
        raise InvalidArgumentError("--iters must be a comma-separated list of integers") from None
    if len(grid) < 2:
        raise InvalidArgumentError("sweep needs at least two horizons")
    ref_iters = max(args.ref_iters, 10 * max(grid))
    rows, fit = sweep(desc, args.algo, grid, args.delta, ref_iters, args.out, args.fmt, args.jobs)
    print(f"# {desc.one_line()}")
    code = _report_rows(rows)
    slope = "-inf" if math.isinf(fit.slope) else f"{fit.slope:.3f}"
    print(f"# final-gap slope over T: {slope} ({fit.points} points, {fit.status})")
    return code


def cmd_audit(args) -> int:
    problems = {name: generate_problem(desc) for name, desc in SUITE_DESCRIPTORS.items()}
    reports = audit(problems, trials=args.trials, seed=args.seed)
    lasso = problems["lasso"]
    _, trace = flag_run(lasso, FlagConfig(T=100, record_history=True))
    u = lasso.set.sample(np.random.default_rng(args.seed), size=50)
    md = check_mirror_descent_inequality(trace, u)
    md.name = f"{md.name}[lasso]"
    reports.append(md)
    print("name\ttrials\tviolations\tworst_margin\tstatus")
    for rep in reports:
        print(rep.row())
    return EXIT_VIOLATIONS if any(not rep.passed for rep in reports) else EXIT_OK


COMMANDS = {"run": cmd_run, "compare": cmd_compare, "sweep": cmd_sweep, "audit": cmd_audit}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except InvalidArgumentError as exc:
        print(f"flagopt: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ReferenceQualityError as exc:
        print(f"flagopt: reference optimum too weak: {exc}", file=sys.stderr)
        return EXIT_REFERENCE


if __name__ == "__main__":
    sys.exit(main())
