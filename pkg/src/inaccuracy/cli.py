"""Command-line entry point.

Exit codes::

    0  report produced
    2  usage error (bad flags)
    3  input schema violation
    4  formula error (syntax, unknown symbol, unsupported function)
    5  measurement error (zero mean in relative mode, f = 0, singular point)
    6  numerical failure (eigensolver, malformed quadric)
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import expr as ex
from . import quadric, report
from .measure import MeasurementError

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_EXPRESSION = 4
EXIT_MEASUREMENT = 5
EXIT_NUMERICAL = 6


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_request_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mode", choices=["absolute", "relative"])
    p.add_argument("--rank-tol", type=float, help="relative eigenvalue zero threshold")
    p.add_argument("--estimator", choices=["mean-abs-deviation", "max-deviation", "user"])
    p.add_argument("--evaluation-point", choices=["others-at-mean", "joint"])


def _output_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("-o", "--output", help="write to this file instead of stdout")
    p.add_argument("--format", choices=["text", "json"], default="text")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inaccuracy",
        description="Maximum inaccuracies of an indirectly measured quantity, "
        "their quadric surfaces, and accuracy coefficients.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full pipeline from a request file")
    p.add_argument("input", help="request JSON, or builtin:viscometer")
    _output_flags(p)
    _add_request_overrides(p)

    p = sub.add_parser("classify", help="classify the surface for given coefficients")
    p.add_argument("input", help="coefficients JSON")
    _output_flags(p)
    p.add_argument("--rank-tol", type=float)

    p = sub.add_parser("derive", help="print symbolic first and second partials")
    p.add_argument("input", nargs="?", help="request JSON (formula and symbols)")
    p.add_argument("--formula")
    p.add_argument("--var", action="append", default=[], help="variable name (repeatable)")
    p.add_argument("--const", action="append", default=[], help="constant name (repeatable)")
    p.add_argument("-o", "--output")

    p = sub.add_parser("surface-grid", help="delimited samples of the total inaccuracy")
    p.add_argument("input", help="request JSON, or builtin:viscometer")
    p.add_argument("--lower", type=_floats, default=[0.0])
    p.add_argument("--upper", type=_floats, default=[0.02])
    p.add_argument("--points", type=_ints, default=[11])
    p.add_argument("--delimiter", default=",")
    p.add_argument("-o", "--output")
    _add_request_overrides(p)
    return parser


def _apply_overrides(req: report.AnalysisRequest, args) -> report.AnalysisRequest:
    if getattr(args, "mode", None):
        req.mode = args.mode
    if getattr(args, "rank_tol", None) is not None:
        req.options["rank_tolerance"] = args.rank_tol
    if getattr(args, "estimator", None):
        if args.estimator == "user" and req.inaccuracies is None:
            raise report.InputError("estimator 'user' needs 'inaccuracy' in every variable block")
        req.options["estimator"] = args.estimator
    if getattr(args, "evaluation_point", None):
        req.options["evaluation_point"] = args.evaluation_point
    return req


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _derive_text(formula: str, variables: list[str], constants: list[str]) -> str:
    e = ex.parse(formula, variables, constants)
    lines = [f"f = {ex.to_text(e)}"]
    for v in variables:
        lines.append(f"df/d{v} = {ex.to_text(ex.differentiate(e, v))}")
    for i, vi in enumerate(variables):
        for vj in variables[i:]:
            lines.append(f"d2f/d{vi}d{vj} = {ex.to_text(ex.second_partial(e, vi, vj))}")
    return "\n".join(lines) + "\n"


def run(args) -> int:
    if args.command == "analyze":
        req = _apply_overrides(report.load_request(args.input), args)
        rep = report.analyze_request(req)
        _emit(rep.to_json() + "\n" if args.format == "json" else rep.to_text(), args.output)
    elif args.command == "classify":
        inf, names = report.load_influences(args.input)
        tol = args.rank_tol if args.rank_tol is not None else quadric.DEFAULT_RANK_TOL
        rep = report.classify_influences(inf, names, tol)
        _emit(rep.to_json() + "\n" if args.format == "json" else rep.to_text(), args.output)
    elif args.command == "derive":
        if args.input:
            req = report.load_request(args.input)
            text = _derive_text(req.formula, list(req.variables), list(req.constants))
        elif args.formula and args.var:
            text = _derive_text(args.formula, args.var, args.const)
        else:
            raise report.InputError("derive needs a request file or --formula with --var")
        _emit(text, args.output)
    elif args.command == "surface-grid":
        req = _apply_overrides(report.load_request(args.input), args)
        from . import measure

        inf = measure.influences(req.experiment())
        rows = report.surface_grid(inf, args.lower, args.upper, args.points)
        if args.output:
            with open(args.output, "w", newline="") as fh:
                report.write_grid(rows, list(req.variables), fh, args.delimiter)
        else:
            report.write_grid(rows, list(req.variables), sys.stdout, args.delimiter)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except report.InputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_INPUT
    except ex.ExprError as err:
        print(f"error: formula: {err}", file=sys.stderr)
        return EXIT_EXPRESSION
    except MeasurementError as err:
        print(f"error: measurement: {err}", file=sys.stderr)
        return EXIT_MEASUREMENT
    except quadric.QuadricError as err:
        print(f"error: numerical: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
