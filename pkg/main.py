#!/usr/bin/env python3
"""
Hyperscaler / micro-datacenter market equilibrium studies.

Usage:
    python main.py solve rts24 --scheme expost --delta 0.9
    python main.py sweep rts24 --deltas 0:1:0.1 --forward 0.6,0.7,0.8,0.9 --workers 4
    python main.py feascheck micro-overload
    python main.py dump-mlcp micro1 --stdout
"""

import argparse
import json
import sys
from typing import Optional, Sequence

from dotenv import load_dotenv

from market import ScenarioRunner, load_case_file
from market.errors import (
    CalibrationError,
    CaseFileError,
    CaseValidationError,
    MarketError,
    NetworkNumericalError,
    TopologyError,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT_ERROR = 2
EXIT_INTERRUPTED = 130

INPUT_ERRORS = (CaseFileError, CaseValidationError, CalibrationError, TopologyError, NetworkNumericalError)


def parse_range(text: str) -> list[float]:
    """`a:b:step` inclusive of both ends, or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise argparse.ArgumentTypeError(f"empty range {text!r}")
    count = int(round((stop - start) / step))
    return [round(start + k * step, 10) for k in range(count + 1)]


def parse_list(text: str) -> list[float]:
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Market equilibrium with hyperscaler workload outsourcing to micro datacenters",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("case", help="bundled case name (rts24, micro1, micro-overload, micro-mdc) or YAML path")
    common.add_argument("--output-dir", type=str, default=None,
                        help="Directory for CSV/JSON results (default: $MARKET_OUTPUT_DIR or results/)")
    common.add_argument("--trace", type=str, default=None, metavar="FILE", help="Write the pivot trace to FILE")
    common.add_argument("--quiet", action="store_true", help="Suppress progress output")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--error-json", action="store_true", help="Print failures as a JSON object")

    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", parents=[common], help="Solve one scenario")
    solve.add_argument("--scheme", choices=["expost", "exante"], default=None,
                       help="Disclosure scheme (default: the case file's)")
    solve.add_argument("--delta", type=float, default=None, help="Cost weight of the hyperscaler, in [0, 1]")

    sweep = sub.add_parser("sweep", parents=[common], help="Sweep delta, optionally over forward fractions")
    sweep.add_argument("--scheme", choices=["expost", "exante"], default=None)
    sweep.add_argument("--deltas", type=parse_range, required=True, help="a:b:step")
    sweep.add_argument("--forward", type=parse_list, default=None, help="f1,f2,... forward contract fractions")
    sweep.add_argument("--workers", type=int, default=1, help="Concurrent sweep points (default: 1)")

    sub.add_parser("feascheck", parents=[common], help="Check batch loads against the throughput limit")

    dump = sub.add_parser("dump-mlcp", parents=[common], help="Write the assembled MLCP as sparse triplets")
    dump.add_argument("--scheme", choices=["expost", "exante"], default=None)
    dump.add_argument("--stdout", action="store_true", help="Write to standard output instead of a file")
    return parser


def report_error(exc: BaseException, exit_code: int, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": exit_code}))
    else:
        print(f"Error: {exc}", file=sys.stderr)
    return exit_code


def run(args: argparse.Namespace) -> int:
    case_file = load_case_file(args.case)
    if args.trace:
        case_file.solver = case_file.solver.with_overrides(trace=True, trace_path=args.trace)

    runner = ScenarioRunner(
        case_file,
        output_dir=args.output_dir,
        verbose=args.verbose,
        quiet=args.quiet,
        workers=getattr(args, "workers", 1),
    )

    if args.command == "solve":
        runner.solve(args.scheme, args.delta)
        return EXIT_OK
    if args.command == "sweep":
        points = runner.sweep(args.deltas, args.forward, args.scheme)
        return EXIT_OK if all(p.ok for p in points) else EXIT_FAILURE
    if args.command == "feascheck":
        verdicts = runner.feascheck()
        return EXIT_OK if all(v.feasible for v in verdicts) else EXIT_FAILURE
    if args.command == "dump-mlcp":
        runner.dump_mlcp(args.scheme, sys.stdout if args.stdout else None)
        return EXIT_OK
    raise AssertionError(f"unhandled command {args.command}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)

    try:
        return run(args)
    except KeyboardInterrupt:
        print("\nAborted by user")
        return EXIT_INTERRUPTED
    except INPUT_ERRORS as e:
        return report_error(e, EXIT_INPUT_ERROR, args.error_json)
    except ValueError as e:
        return report_error(e, EXIT_INPUT_ERROR, args.error_json)
    except MarketError as e:
        return report_error(e, EXIT_FAILURE, args.error_json)


if __name__ == "__main__":
    sys.exit(main())
