"""Command-line front end.

Exit codes: 0 equivalent (or all checks passed), 10 singular, 20
inconclusive, 12 verify-suite failure, 1 any error.  Errors go to stderr;
data only ever goes to the requested output files or stdout.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import MeasurePairError
from .report import (
    RunConfig,
    run_analyze,
    run_sample,
    run_sweep,
    run_verify,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="measurepair",
        description="Analyze mutual absolute continuity of a kernel-pair model.",
    )
    sub = parser.add_subparsers(dest="mode", required=True)

    analyze = sub.add_parser("analyze", help="run all criteria and emit a verdict report")
    analyze.add_argument("--model", required=True, help="model JSON file")
    analyze.add_argument("--depth", type=int, default=4)
    analyze.add_argument("--kmax", type=int, default=200)
    analyze.add_argument("--tol", type=float, default=1e-10)
    analyze.add_argument("--out", help="write the JSON report here")
    analyze.add_argument("--csv", help="write the affinity table CSV here")
    analyze.add_argument("--cylinders", help="write the atom table CSV here")

    verify = sub.add_parser("verify", help="run the invariant suite on the model")
    verify.add_argument("--model", required=True)
    verify.add_argument("--depth", type=int, default=4)
    verify.add_argument("--tol", type=float, default=1e-10)
    verify.add_argument("--out", help="write the JSON report here")

    sweep = sub.add_parser("sweep", help="sweep a tail-generator parameter")
    sweep.add_argument("--model", required=True)
    sweep.add_argument("--param", required=True, help="alpha, c or base")
    sweep.add_argument("--values", required=True, help="comma-separated values")
    sweep.add_argument("--kmax", type=int, default=200)
    sweep.add_argument("--depth", type=int, default=4)
    sweep.add_argument("--tol", type=float, default=1e-10)
    sweep.add_argument("--out", required=True, help="CSV output path")

    sample = sub.add_parser("sample", help="sample paths and export traces")
    sample.add_argument("--model", required=True)
    sample.add_argument("--measure", choices=("p", "q"), default="p")
    sample.add_argument("--length", type=int, default=32)
    sample.add_argument("--count", type=int, default=1000)
    sample.add_argument("--seed", type=int, required=True)
    sample.add_argument("--csv", help="trace CSV output path")
    sample.add_argument("--out", help="summary JSON output path")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.mode == "analyze":
            cfg = RunConfig(
                model_path=args.model,
                mode="analyze",
                depth=args.depth,
                k_max=args.kmax,
                tol=args.tol,
                out=args.out,
                csv_path=args.csv,
                cylinders_path=args.cylinders,
            )
            report, code = run_analyze(cfg)
            if not args.out:
                json.dump(report, sys.stdout, sort_keys=True, indent=2)
                sys.stdout.write("\n")
            return code
        if args.mode == "verify":
            cfg = RunConfig(
                model_path=args.model,
                mode="verify",
                depth=args.depth,
                tol=args.tol,
                out=args.out,
            )
            report, code = run_verify(cfg)
            if not args.out:
                json.dump(report, sys.stdout, sort_keys=True, indent=2)
                sys.stdout.write("\n")
            return code
        if args.mode == "sweep":
            values = [float(v) for v in args.values.split(",") if v.strip()]
            cfg = RunConfig(
                model_path=args.model,
                mode="sweep",
                depth=args.depth,
                k_max=args.kmax,
                tol=args.tol,
                param=args.param,
                values=values,
                csv_path=args.out,
            )
            _, code = run_sweep(cfg)
            return code
        if args.mode == "sample":
            cfg = RunConfig(
                model_path=args.model,
                mode="sample",
                seed=args.seed,
                count=args.count,
                length=args.length,
                measure=args.measure,
                csv_path=args.csv,
                out=args.out,
            )
            _, code = run_sample(cfg)
            return code
        parser.error(f"unknown mode {args.mode!r}")
    except FileNotFoundError as exc:
        print(f"error: SchemaError: cannot read model file: {exc}", file=sys.stderr)
        return 1
    except MeasurePairError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 1


def entry():  # console_scripts target
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
