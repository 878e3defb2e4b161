"""Command-line front end: ``wmmcheck check|optimize|litmus|stress|export``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .checker import check, explain, verdict_line
from .engine import EngineConfig, outcomes
from .ir.core import Program
from .ir.text import ParseError, parse_program

EXIT_USAGE = 64
EXIT_INCONCLUSIVE = 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def _engine_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("program", help="builtin name (see 'wmmcheck litmus --list') or path to an .ir file")
    p.add_argument("--threads", type=_positive_int, help="client threads for lock builtins")
    p.add_argument("--model", choices=("weak", "sc"), default="weak", help="memory model (default: weak)")
    p.add_argument("--no-speculation", action="store_true", help="do not fetch past unresolved branches")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wmmcheck", description="Weak-memory model checker and barrier optimizer.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="check mutual exclusion and await termination")
    _engine_args(c)
    c.add_argument("--timeout", type=_positive_float, default=60.0, help="wall-clock budget in seconds (default: 60)")
    c.add_argument("--json", metavar="PATH", help="also write the verdict as JSON")

    o = sub.add_parser("optimize", help="find a maximally relaxed barrier assignment")
    _engine_args(o)
    o.add_argument("--timeout", type=_positive_float,
                   help="budget for the baseline and final checks (default: --max-timeout)")
    o.add_argument("--tau", type=_positive_float, default=2.0, help="initial per-check timeout (default: 2)")
    o.add_argument("--growth", type=float, default=2.0, help="timeout growth factor, > 1 (default: 2)")
    o.add_argument("--max-timeout", type=_positive_float, default=120.0,
                   help="largest per-check timeout (default: 120)")
    o.add_argument("--json", metavar="PATH", help="also write the report as JSON")
    o.add_argument("--no-screens", action="store_true",
                   help="do not pre-screen candidates on smaller thread counts")
    o.add_argument("--no-certify", action="store_true", help="skip the maximality certificate")

    lt = sub.add_parser("litmus", help="compare litmus outcomes with their expected sets")
    lt.add_argument("name", nargs="?", default="all", help="litmus test name or 'all' (default)")
    lt.add_argument("--model", choices=("weak", "sc"), help="only this model (default: both)")
    lt.add_argument("--list", action="store_true", help="list builtin program names and exit")

    s = sub.add_parser("stress", help="run the native CNA lock stress harness")
    s.add_argument("--threads", type=_positive_int, default=8, help="OS threads (default: 8)")
    s.add_argument("--iterations", type=int, default=100000, help="increments per thread (default: 100000)")
    s.add_argument("--runs", type=_positive_int, default=1, help="repetitions (default: 1)")
    s.add_argument("--buggy", action="store_true", help="relaxed succ->spin hand-off")

    e = sub.add_parser("export", help="write every shipped program in the text format")
    e.add_argument("directory", help="output directory")
    return parser


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _load(args) -> tuple[Program, list[Program]]:
    """Program plus optimizer screens (smaller instances of a lock builtin)."""
    from .programs import LOCK_BUILTINS, builtin, builtin_names

    name = args.program
    if name in builtin_names():
        if name in LOCK_BUILTINS:
            n = args.threads if args.threads is not None else 2
            if name == "linux-cna" and n < 2:
                raise UsageError("linux-cna needs --threads >= 2")
            screens = [builtin(name, k).program for k in range(2, n)]
            return builtin(name, n).program, screens
        if args.threads is not None:
            raise UsageError(f"--threads does not apply to litmus test {name!r}")
        return builtin(name).program, []
    path = Path(name)
    if not path.exists():
        raise UsageError(f"unknown builtin or missing file: {name!r}")
    if args.threads is not None:
        raise UsageError("--threads only applies to builtin lock programs")
    try:
        return parse_program(path.read_text()), []
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _engine(args, timeout: float | None) -> EngineConfig:
    return EngineConfig(model=args.model, speculation=not args.no_speculation, timeout=timeout)


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_check(args) -> int:
    import json

    program, _ = _load(args)
    verdict = check(program, _engine(args, args.timeout))
    print(verdict_line(verdict))
    if verdict.is_violation:
        sys.stderr.write(explain(verdict))
    elif verdict.name == "InvalidProgram":
        for d in verdict.diagnostics:  # type: ignore[attr-defined]
            print(f"  {d}", file=sys.stderr)
    if args.json:
        s = verdict.summary
        data = {"verdict": verdict.name, "exit_code": verdict.exit_code,
                "executions": s.executions_visited if s else None, "states": s.states if s else None}
        _write(args.json, json.dumps(data, indent=2) + "\n")
    return verdict.exit_code


def cmd_optimize(args) -> int:
    from .optimizer import OptimizerConfig, OptimizerError, optimize, render_certificate, render_report, report_json

    if args.growth <= 1:
        raise UsageError("--growth must be > 1")
    if args.max_timeout < args.tau:
        raise UsageError("--max-timeout must be >= --tau")
    program, screens = _load(args)
    cfg = OptimizerConfig(tau=args.tau, growth=args.growth, max_timeout=args.max_timeout,
                          threads=args.threads, engine=_engine(args, None))
    if args.timeout is not None:
        cfg = replace(cfg, max_timeout=max(cfg.max_timeout, args.timeout))
    try:
        _, report = optimize(program, cfg, screens=[] if args.no_screens else screens,
                             log=lambda m: print(m, file=sys.stderr), certify=not args.no_certify)
    except OptimizerError as exc:
        print(f"optimize failed: {exc}", file=sys.stderr)
        if exc.verdict is not None and exc.verdict.is_violation:
            sys.stderr.write(explain(exc.verdict))
        return 1
    sys.stdout.write(render_report(report))
    sys.stderr.write(render_certificate(report))
    if args.json:
        _write(args.json, report_json(report))
    if report.inconclusive:
        return EXIT_INCONCLUSIVE
    return 0


def cmd_litmus(args) -> int:
    from .programs import LITMUS_NAMES, builtin_names, litmus, litmus_corpus, project

    if args.list:
        for n in builtin_names():
            print(n)
        return 0
    if args.name == "all":
        tests = litmus_corpus()
    elif args.name in LITMUS_NAMES:
        tests = [litmus(args.name)]
    else:
        raise UsageError(f"unknown litmus test {args.name!r}")
    models = [args.model] if args.model else ["weak", "sc"]
    bad = 0
    for t in tests:
        for m in models:
            got = {project(o, t.observed) for o in outcomes(t.program, EngineConfig(model=m, state_caching=True))}
            ok = got == t.expected[m]
            bad += not ok
            shown = " ".join(sorted(",".join(f"{k}={v}" for k, v in o) for o in got))
            print(f"{t.name:<12} {m:<4} {'ok' if ok else 'MISMATCH'}  {shown}")
    return 1 if bad else 0


def cmd_stress(args) -> int:
    from .nativelock import NativeBuildError, stress

    if args.iterations < 0:
        raise UsageError("--iterations must be >= 0")
    mode = "buggy" if args.buggy else "verified"
    try:
        runs = stress(args.threads, args.iterations, mode, args.runs)
    except NativeBuildError as exc:
        print(f"stress: cannot build the harness: {exc}", file=sys.stderr)
        return 1
    for r in runs:
        print(r.line)
    if mode == "verified" and any(r.anomalies for r in runs):
        return 1
    return 0


def cmd_export(args) -> int:
    from .programs import export_programs

    for path in export_programs(args.directory):
        print(path)
    return 0


COMMANDS = {
    "check": cmd_check,
    "optimize": cmd_optimize,
    "litmus": cmd_litmus,
    "stress": cmd_stress,
    "export": cmd_export,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"wmmcheck {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
