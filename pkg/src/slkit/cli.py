"""Command line entry point.

Exit codes:
  0   success (check passed, countermodel found, file written)
  1   check found violations
  2   bad input: unreadable file, parse error, invalid instance or precondition
  3   search or model-checking budget exhausted
  10  solve found no countermodel within the bounds (not a validity verdict)
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .conditions import check_alloc_compatibility, check_sid
from .parser import ParseError, ProblemFile, parse_problem, print_sequent
from .pcp import InstanceInvariantViolation, PcpInstance, encode
from .search import SearchBounds, countermodel_search
from .semantics import BudgetExceeded, NonPcSID, TheoryError, theory
from .transform import TransformError, eliminate_equalities, make_alloc_compatible

SCHEMA = 1
EXIT_OK, EXIT_VIOLATION, EXIT_INPUT, EXIT_BUDGET, EXIT_NONE = 0, 1, 2, 3, 10
DEFAULT_HEAP, DEFAULT_LOCS = 4, 8


class InputError(Exception):
    pass


def _load(path: str, theory_override: str | None) -> ProblemFile:
    try:
        text = sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    problem = parse_problem(text)
    if theory_override:
        theory(theory_override)
        problem.theory = theory_override
    return problem


def _sequent(problem: ProblemFile, index: int):
    sequents = problem.sequents()
    if not 0 <= index < len(sequents):
        raise InputError(f"file has {len(sequents)} entailment(s), no index {index}")
    return sequents[index]


def _write(text: str, output: str | None) -> None:
    if output is None or output == "-":
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _emit_json(payload: dict) -> None:
    print(json.dumps({"schema": SCHEMA, **payload}, indent=2, sort_keys=False))


def cmd_check(args) -> int:
    problem = _load(args.file, args.theory)
    reports = check_sid(problem.sid)
    alloc = check_alloc_compatibility(problem.sid)
    ok = all(r.ok for r in reports)
    if args.json:
        _emit_json({"ok": ok, "reports": [r.to_json() for r in reports], "alloc_compatible": alloc.ok})
    else:
        for report in reports:
            print(f"{report.name}: {'ok' if report.ok else 'FAILED'}")
            for v in report.violations:
                where = f"rule {v.rule}" if v.rule is not None else "sequent"
                print(f"  {where}: {v.reason}\n    {v.fragment}")
        print(f"alloc-compatibility: {'yes' if alloc.ok else 'no'} (informational)")
    return EXIT_OK if ok else EXIT_VIOLATION


def cmd_transform(args) -> int:
    problem = _load(args.file, args.theory)
    sq = _sequent(problem, args.index)
    if args.alloc_compat:
        out, alloc = make_alloc_compatible(sq, prune=args.prune)
        trace = None
    else:
        out, trace = eliminate_equalities(sq)
    _write(print_sequent(out), args.output)
    if args.trace:
        if trace is None:
            raise InputError("--trace is only available with --eliminate-eq")
        trace.write(args.trace)
    if args.json:
        payload = {"output": args.output or "-"}
        if trace is not None:
            payload["steps"] = trace.metrics()
            payload["alloc"] = trace.alloc.to_json()
        else:
            payload["alloc"] = alloc.to_json()
        print(json.dumps({"schema": SCHEMA, **payload}, indent=2), file=sys.stderr)
    return EXIT_OK


def cmd_encode(args) -> int:
    inst = PcpInstance.parse(args.tiles)
    encoded = encode(inst, args.theory)
    _write(print_sequent(encoded.sequent), args.output)
    return EXIT_OK


def cmd_solve(args) -> int:
    problem = _load(args.file, args.theory)
    sq = _sequent(problem, args.index)
    if args.max_heap is None and args.max_locs is None:
        print(
            f"warning: using default bounds (heap {DEFAULT_HEAP}, locations {DEFAULT_LOCS}); "
            "search is exponential and a miss proves nothing",
            file=sys.stderr,
        )
    bounds = SearchBounds(
        max_heap=DEFAULT_HEAP if args.max_heap is None else args.max_heap,
        max_location=DEFAULT_LOCS if args.max_locs is None else args.max_locs,
        budget=args.budget,
    )
    found = countermodel_search(sq, bounds, jobs=args.jobs)
    bounds_json = {"max_heap": bounds.max_heap, "max_location": bounds.max_location}
    if found is None:
        if args.json:
            _emit_json({"result": "none_within_bounds", "bounds": bounds_json})
        else:
            print("no countermodel within bounds (this is not a proof of validity)")
        return EXIT_NONE
    if args.json:
        _emit_json({"result": "countermodel", "bounds": bounds_json, "countermodel": found.to_json()})
    else:
        print(json.dumps(found.to_json()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"slkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, with_index=True):
        p.add_argument("file", help="problem file in .sid syntax, or - for stdin")
        p.add_argument("--theory", choices=["equality", "nat_succ", "nat_leq"], help="override the file's theory")
        p.add_argument("--json", action="store_true", help="machine-readable output")
        if with_index:
            p.add_argument("--index", type=int, default=0, help="which entailment of the file to use")

    p = sub.add_parser("check", help="check progress, connectivity and establishment")
    common(p, with_index=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("transform", help="rewrite a sequent")
    common(p)
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--eliminate-eq", action="store_true", help="remove equations and disequations")
    mode.add_argument("--alloc-compat", action="store_true", help="split predicates by allocated positions")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--trace", metavar="DIR", help="write per-step snapshots and metrics")
    p.add_argument("--prune", action="store_true", help="drop unreachable predicates (alloc-compat only)")
    p.set_defaults(func=cmd_transform)

    p = sub.add_parser("encode-pcp", help="emit the entailment for a PCP instance")
    p.add_argument("--tiles", required=True, help="comma-separated u:v tiles, e.g. ab:ab,ba:ab")
    p.add_argument("--theory", choices=["nat_succ", "nat_leq"], default="nat_succ")
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("solve", help="bounded countermodel search")
    common(p)
    p.add_argument("--max-heap", type=int, help=f"largest heap (default {DEFAULT_HEAP})")
    p.add_argument("--max-locs", type=int, help=f"locations are below this (default {DEFAULT_LOCS})")
    p.add_argument("--budget", type=int, help="node limit (default from SLKIT_BUDGET)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except (InputError, InstanceInvariantViolation, TheoryError, NonPcSID, TransformError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except BudgetExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
