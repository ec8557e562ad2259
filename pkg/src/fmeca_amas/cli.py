"""
Command-line front end.

Exit codes: 0 success, 1 validation or diagnostic failure, 2 usage error
(bad flags, unreadable input). Output goes to ``--out``; without it, to
``$FMECA_AMAS_OUTPUT_DIR/<input stem>.<subcommand>.<ext>`` when that
variable is set, else to stdout.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from .core import Level, validate
from .generate import generate
from .ingest import FORMATS, STRUCTURED, ModelDocument, ParseError, guess_format, parse_model, parse_rational, write_model
from .ingest.report import (
    MACHINE, REPORT_FORMATS, TABLE, ReportError, compare_documents, read_report, write_gap, write_oracle, write_report,
)
from .oracle import DEFAULT_LIMIT, OracleError, OracleViolation, exact_best
from .solver import SolverConfig, SolverInputError, dumps_trace, run
from .solver.engine import ALL_RECOMMENDED, EMPTY, LITERAL, SAFE_GREEDY

OUTPUT_DIR_ENV = "FMECA_AMAS_OUTPUT_DIR"

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

logger = logging.getLogger("fmeca_amas")


class UsageError(Exception):
    pass


def _read(path: str) -> bytes:
    if path == "-":
        return sys.stdin.buffer.read()
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None


def _emit(data: bytes, out: Optional[str], source: str, command: str, ext: str) -> None:
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        stem = "stdin" if source == "-" else Path(source).name.split(".")[0]
        out = str(Path(os.environ[OUTPUT_DIR_ENV]) / f"{stem}.{command}.{ext}")
    if out is None or out == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(data)


def _ext(fmt: str) -> str:
    return "json" if fmt == MACHINE else "txt"


def _print_diagnostics(diagnostics, stream=None) -> None:
    stream = stream or sys.stderr
    for d in diagnostics:
        print(str(d), file=stream)


def _load(args) -> ModelDocument:
    data = _read(args.model)
    fmt = args.input_format or (STRUCTURED if args.model == "-" else guess_format(args.model))
    return parse_model(data, format=fmt, strict=not args.lenient)


def _with_budget(doc: ModelDocument, override: Optional[str]) -> ModelDocument:
    if override is None:
        return doc
    try:
        budget = parse_rational(override)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"invalid --budget-override {override!r}") from None
    if budget < 0:
        raise UsageError("--budget-override must be non-negative")
    return replace(doc, model=replace(doc.model, budget=budget))


# -- subcommands -----------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        doc = _load(args)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return EXIT_FAIL
    diagnostics = validate(doc.model)
    _print_diagnostics(diagnostics, sys.stdout)
    errors = sum(1 for d in diagnostics if d.level is Level.ERROR)
    warnings = len(diagnostics) - errors
    m = doc.model
    print(f"{len(m.failure_modes)} failure mode(s), {len(m.actions)} action(s): "
          f"{errors} error(s), {warnings} warning(s)")
    return EXIT_FAIL if errors else EXIT_OK


def cmd_solve(args) -> int:
    try:
        doc = _with_budget(_load(args), args.budget_override)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return EXIT_FAIL
    config = SolverConfig(
        seed=args.seed,
        max_rounds=args.max_rounds,
        quiescence_window=args.quiescence_window,
        psi_reorganization=args.psi_reorganization,
        initial_selection=args.initial_selection,
        select_less_mode=args.select_less_mode,
    )
    try:
        result = run(doc.model, config)
    except SolverInputError as exc:
        _print_diagnostics(exc.diagnostics or [], sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(write_report(result, doc.model, args.format), args.out, args.model, "solve", _ext(args.format))
    if args.trace_out:
        Path(args.trace_out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.trace_out).write_bytes(dumps_trace(result.trace))
    if not result.converged:
        print(f"warning: not converged after {result.rounds_used} rounds", file=sys.stderr)
    if result.budget_infeasible:
        print("warning: budget-infeasible: thresholds can be met only above the budget", file=sys.stderr)
    elif result.safety_infeasible:
        print("warning: some failure modes remain above their critical threshold", file=sys.stderr)
    return EXIT_OK if result.converged and result.feasible else EXIT_FAIL


def cmd_oracle(args) -> int:
    try:
        doc = _with_budget(_load(args), args.budget_override)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return EXIT_FAIL
    try:
        result = exact_best(doc.model, limit=args.limit, prune=not args.no_prune)
    except OracleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(write_oracle(result, doc.model, args.format), args.out, args.model, "oracle", _ext(args.format))
    return EXIT_OK


def cmd_compare(args) -> int:
    report_bytes, oracle_bytes = _read(args.result), _read(args.oracle_result)
    try:
        gap = compare_documents(report_bytes, oracle_bytes)
    except (ReportError, OracleViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(write_gap(gap, args.format), args.out, args.result, "compare", _ext(args.format))
    return EXIT_OK


def cmd_report(args) -> int:
    result_bytes = _read(args.result)
    try:
        doc = _load(args)
    except ParseError as exc:
        _print_diagnostics(exc.diagnostics)
        return EXIT_FAIL
    try:
        result = read_report(result_bytes, doc.model)
        data = write_report(result, doc.model, args.format)
    except ReportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _emit(data, args.out, args.result, "report", _ext(args.format))
    return EXIT_OK


def cmd_gen(args) -> int:
    n = args.failure_modes if args.failure_modes is not None else args.n
    m = args.actions if args.actions is not None else args.m
    if n is None or m is None:
        raise UsageError("gen needs the number of failure modes and actions")
    if n < 1 or m < 1:
        raise UsageError("gen needs at least one failure mode and one action")
    doc = generate(n, m, seed=args.seed, feasible=args.feasible)
    ext = "json" if args.model_format == STRUCTURED else "csv"
    _emit(write_model(doc, args.model_format), args.out, f"gen-{n}x{m}-s{args.seed}", "gen", ext)
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def _model_args(p: argparse.ArgumentParser, positional: bool = True) -> None:
    if positional:
        p.add_argument("model", help="model file ('-' for stdin)")
    p.add_argument("--input-format", choices=FORMATS, help="model format (default: by file extension)")
    p.add_argument("--lenient", action="store_true", help="warn instead of failing on unknown keys")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fmeca-amas", description=__doc__.strip().splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model and print diagnostics")
    _model_args(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("solve", help="select preventive actions with the multi-agent solver")
    _model_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-rounds", type=int, default=10_000)
    p.add_argument("--quiescence-window", type=int, default=10)
    p.add_argument("--psi-reorganization", type=int, default=0)
    p.add_argument("--initial-selection", choices=(EMPTY, ALL_RECOMMENDED), default=EMPTY)
    p.add_argument("--select-less-mode", choices=(SAFE_GREEDY, LITERAL), default=SAFE_GREEDY)
    p.add_argument("--budget-override")
    p.add_argument("--format", choices=REPORT_FORMATS, default=MACHINE)
    p.add_argument("--out")
    p.add_argument("--trace-out")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("oracle", help="exact optimum by enumeration")
    _model_args(p)
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    p.add_argument("--no-prune", action="store_true")
    p.add_argument("--budget-override")
    p.add_argument("--format", choices=REPORT_FORMATS, default=MACHINE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="gap between a solver report and an oracle result")
    p.add_argument("result")
    p.add_argument("oracle_result")
    p.add_argument("--format", choices=REPORT_FORMATS, default=TABLE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("report", help="re-render a machine-readable solver report")
    p.add_argument("result")
    p.add_argument("model")
    _model_args(p, positional=False)
    p.add_argument("--format", choices=REPORT_FORMATS, default=TABLE)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("gen", help="generate a random model")
    p.add_argument("n", nargs="?", type=int, help="failure modes")
    p.add_argument("m", nargs="?", type=int, help="actions")
    p.add_argument("--failure-modes", type=int)
    p.add_argument("--actions", type=int)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--feasible", action="store_true", help="plant a cover that fits the budget")
    p.add_argument("--model-format", choices=FORMATS, default=STRUCTURED)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)
    return parser



def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"fmeca-amas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"fmeca-amas: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
