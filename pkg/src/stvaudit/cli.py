"""Command line interface.

Exit codes: 0 clean, 1 bad input, 2 engine error, 3 anomalies found.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import analysis
from .engine import run_count
from .fileformat import (ElectionParseError, dump_report, dump_transcript, finding_to_dict,
                         load_transcript, parse_election)
from .model import EngineError, RoundingMode
from .rules import PRESETS, preset

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ENGINE = 2
EXIT_FINDINGS = 3


class InputError(Exception):
    pass


class UsageError(InputError):
    """Bad argument value; reported with the subcommand usage line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    try:
        return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None


def _election(path: str):
    try:
        return parse_election(_read(path))
    except ElectionParseError as exc:
        raise InputError(f"{path}:\n{exc}") from None


def _ruleset(name: str, args):
    try:
        r = preset(name)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    if getattr(args, "rounding", None):
        r = r.replace(rounding=RoundingMode(args.rounding))
    if getattr(args, "seed", None) is not None:
        r = r.replace(sample_seed=args.seed)
    return r


def _candidate(e, name: str) -> int:
    try:
        return e.candidate_index(name)
    except KeyError:
        raise UsageError(f"unknown candidate {name!r}") from None


def _write(path: str, text: str):
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def cmd_count(args) -> int:
    e = _election(args.election)
    t = run_count(e, _ruleset(args.rules, args))
    _write(args.out, dump_transcript(t))
    if args.out != "-":
        print(f"quota {t.quota}; {len(t.steps)} counts; elected: {', '.join(t.winner_names())}")
    return EXIT_OK


def cmd_detect(args) -> int:
    try:
        t = load_transcript(_read(args.transcript))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    report = analysis.detect_all(t, args.only)
    if args.json:
        sys.stdout.write(dump_report(report.findings))
    elif report:
        for f in report:
            print(f"{f.kind}: {f.message}")
    else:
        print("no findings")
    return EXIT_FINDINGS if report else EXIT_OK


def cmd_shift_search(args) -> int:
    e = _election(args.election)
    r = _ruleset(args.rules, args)
    donor = _candidate(e, args.donor)
    beneficiary = _candidate(e, args.beneficiary)
    if args.max < 1:
        raise UsageError("--max must be positive")
    limit = min(args.max, analysis.eligible_papers(e, donor, beneficiary))
    try:
        found = analysis.search_monotonicity(e, r, donor, beneficiary, limit)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if found is None:
        print("none")
        return EXIT_OK
    if args.json:
        sys.stdout.write(dump_report([analysis.monotonicity_finding(e, found)]))
    else:
        names = lambda cs: ", ".join(e.candidates[c].name for c in cs)
        print(f"papers_moved: {found.papers_moved}")
        print(f"rewrite: {found.description}")
        print(f"winners before: {names(found.winners_before)}")
        print(f"winners after: {names(found.winners_after)}")
    return EXIT_FINDINGS


def cmd_compare(args) -> int:
    e = _election(args.election)
    rulesets = [_ruleset(n.strip(), args) for n in args.rules.split(",") if n.strip()]
    if len(rulesets) < 2:
        raise UsageError("--rules needs at least two comma-separated presets")
    cmp = analysis.compare_rulesets(e, rulesets)
    width = max(len(n) for n in cmp.names)
    for name, winners in zip(cmp.names, cmp.winners):
        print(f"{name:<{width}}  {', '.join(e.candidates[c].name for c in winners)}")
    print()
    print(" " * width + "  " + " ".join(f"{i:>2}" for i in range(len(cmp.names))))
    for i, name in enumerate(cmp.names):
        row = " ".join(" =" if ok else " x" for ok in cmp.agreement[i])
        print(f"{name:<{width}}  {row}")
    for f in cmp.findings:
        print(f"{f.kind}: {f.message}")
    return EXIT_OK if cmp.agree else EXIT_FINDINGS


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stvaudit", description="Count STV elections and audit the result.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    presets = ", ".join(PRESETS)

    p = sub.add_parser("count", help="count an election and write its transcript")
    p.add_argument("--election", required=True)
    p.add_argument("--rules", required=True, help=f"preset: {presets}")
    p.add_argument("--out", default="-", help="transcript path (default stdout)")
    p.add_argument("--rounding", choices=[m.value for m in RoundingMode])
    p.add_argument("--seed", type=int, help="random sample seed")
    p.set_defaults(func=cmd_count, usage=p.format_usage())

    p = sub.add_parser("detect", help="run anomaly detectors over a transcript")
    p.add_argument("--transcript", required=True)
    p.add_argument("--only", action="append", choices=sorted(analysis.DETECTORS))
    p.add_argument("--json", action="store_true", help="print a JSON report")
    p.set_defaults(func=cmd_detect, usage=p.format_usage())

    p = sub.add_parser("shift-search", help="search for a donor-to-beneficiary swap that helps the donor")
    p.add_argument("--election", required=True)
    p.add_argument("--rules", required=True, help=f"preset: {presets}")
    p.add_argument("--donor", required=True)
    p.add_argument("--beneficiary", required=True)
    p.add_argument("--max", type=int, required=True)
    p.add_argument("--rounding", choices=[m.value for m in RoundingMode])
    p.add_argument("--seed", type=int)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_shift_search, usage=p.format_usage())

    p = sub.add_parser("compare", help="compare winners across presets")
    p.add_argument("--election", required=True)
    p.add_argument("--rules", required=True, help="comma-separated presets")
    p.set_defaults(func=cmd_compare, usage=p.format_usage())
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(args.usage, end="", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except EngineError as exc:
        print(f"engine error: {exc}", file=sys.stderr)
        return EXIT_ENGINE


if __name__ == "__main__":
    sys.exit(main())
