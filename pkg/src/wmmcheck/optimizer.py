"""Maximally relaxed barrier assignments by linear relaxation.

Starting from all-SC, points are visited in list order. For each point the
valid modes are probed weakest first and the first one that passes the
checker is kept. A probe that times out at the current budget ``tau`` grows
``tau`` geometrically and is retried until ``max_timeout``; after that the
candidate is rejected as not shown safe. The final assignment is re-checked
and then certified: every one-step relaxation of every point must fail.

Optional screens are smaller instances of the same client (fewer threads,
same NUMA prefix). An assertion violation in a screen carries over to the
full program: the extra threads can start after the small execution ends,
and then either the counter stays short or some thread never finishes.
Screens therefore only reject candidates early, and only on assertion
violations; a pass always comes from the full program.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .checker import AssertionViolation, Pass, Timeout, Verdict, check
from .engine import Compiled, EngineConfig
from .ir.core import (
    MODE_ORDER,
    Assignment,
    BarrierPoint,
    Cas,
    Mode,
    NullRef,
    ObjRef,
    OpKind,
    Program,
    Swap,
    apply_assignment,
    list_barrier_points,
    one_step_down,
    uniform_assignment,
    valid_modes,
)


class OptimizerError(RuntimeError):
    def __init__(self, message: str, verdict: Verdict | None = None):
        super().__init__(message)
        self.verdict = verdict


@dataclass(frozen=True)
class OptimizerConfig:
    tau: float = 2.0
    growth: float = 2.0
    max_timeout: float = 120.0
    threads: int | None = None
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("initial timeout must be positive")
        if self.growth <= 1:
            raise ValueError("timeout growth must be > 1")
        if self.max_timeout < self.tau:
            raise ValueError("max timeout must be >= initial timeout")


@dataclass(frozen=True)
class DiffEntry:
    index: int  # 1-based position in the point list
    point_id: int
    source_tag: str
    snippet: str
    op_kind: OpKind
    mode: Mode
    primitive: str


@dataclass(frozen=True)
class Probe:
    index: int
    source_tag: str
    mode: Mode
    verdict: str  # checker verdict name, or "Screen:<verdict>" when a screen rejected it


@dataclass
class OptReport:
    total_points: int
    counts: dict[Mode, int]
    diff: list[DiffEntry]
    points: list[tuple[BarrierPoint, Mode]] = field(default_factory=list)
    stats: dict[str, int] = field(default_factory=dict)
    probes: list[Probe] = field(default_factory=list)
    maximal: bool | None = None
    inconclusive: int = 0
    log: list[str] = field(default_factory=list)
    elapsed: float = 0.0


# ---------------------------------------------------------------------------
# probing
# ---------------------------------------------------------------------------


class _Prober:
    def __init__(self, program: Program, cfg: OptimizerConfig, screens: Sequence[Program],
                 log: Callable[[str], None] | None):
        self.program = program
        self.cfg = cfg
        self.screens = list(screens)
        self.tau = cfg.tau
        self.stats: dict[str, int] = {}
        self._log = log
        self.lines: list[str] = []

    def log(self, msg: str) -> None:
        self.lines.append(msg)
        if self._log is not None:
            self._log(msg)

    def bump(self, key: str) -> None:
        self.stats[key] = self.stats.get(key, 0) + 1

    def _check(self, prog: Program, timeout: float) -> Verdict:
        self.bump("checks")
        v = check(prog, replace(self.cfg.engine, timeout=timeout), stop_on_first=True)
        self.bump(f"verdict:{v.name}")
        return v

    def screen(self, a: Assignment) -> Verdict | None:
        for s in self.screens:
            v = self._check(apply_assignment(s, a), self.cfg.max_timeout)
            if isinstance(v, AssertionViolation):
                self.bump("screen-rejections")
                return v
        return None

    def probe(self, a: Assignment, *, adaptive: bool) -> Verdict:
        """Check ``a``; screens first, then the full program with the tau schedule."""
        rejected = self.screen(a)
        if rejected is not None:
            return rejected
        prog = apply_assignment(self.program, a)
        budget = self.tau if adaptive else self.cfg.max_timeout
        while True:
            start = time.monotonic()
            v = self._check(prog, budget)
            if not isinstance(v, Timeout):
                return v
            if budget >= self.cfg.max_timeout:
                return v
            budget = min(budget * self.cfg.growth, self.cfg.max_timeout)
            if adaptive:
                self.tau = budget
                self.log(f"NEW TAU {budget:.3f}s (timeout after {time.monotonic() - start:.3f}s)")


def _bits(a: Assignment) -> str:
    return "".join({Mode.RLX: "r", Mode.ACQ: "a", Mode.REL: "l", Mode.SC: "s"}[m] for m in a)


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def optimize(program: Program, cfg: OptimizerConfig | None = None, *, screens: Sequence[Program] = (),
             log: Callable[[str], None] | None = None, certify: bool = True) -> tuple[Assignment, OptReport]:
    cfg = cfg or OptimizerConfig()
    started = time.monotonic()
    points = list_barrier_points(program)
    prober = _Prober(program, cfg, screens, log)
    current = uniform_assignment(program, Mode.SC)
    base = check(apply_assignment(program, current), replace(cfg.engine, timeout=cfg.max_timeout))
    prober.bump("checks")
    if not isinstance(base, Pass):
        raise OptimizerError(f"all-SC baseline does not pass: {base.name}", base)
    prober.log(f"START {_bits(current)} #{len(points)}")
    for i, p in enumerate(points):
        for m in valid_modes(p.op_kind):
            if m is current[i]:
                break
            cand = current.with_mode(i, m)
            v = prober.probe(cand, adaptive=True)
            prober.log(f"CHECK {_bits(cand)} [{i + 1}] {p.source_tag} {m.value}: {v.name}")
            if isinstance(v, Pass):
                current = cand
                break
    final = check(apply_assignment(program, current), replace(cfg.engine, timeout=cfg.max_timeout))
    prober.bump("checks")
    prober.log(f"RECHECK {_bits(current)} {final.name}")
    if not isinstance(final, Pass):
        raise OptimizerError(f"final assignment does not re-pass the checker: {final.name}", final)
    report = build_report(program, current)
    report.stats = prober.stats
    if certify:
        ok, probes = _certify(prober, current)
        report.maximal = ok
        report.probes = probes
        report.inconclusive = sum(1 for pr in probes if pr.verdict.endswith("Timeout"))
        if not ok:
            raise OptimizerError("certification found a passing one-step relaxation")
    report.log = prober.lines
    report.elapsed = time.monotonic() - started
    return current, report


def _certify(prober: _Prober, a: Assignment) -> tuple[bool, list[Probe]]:
    probes = []
    ok = True
    for i, p in enumerate(list_barrier_points(prober.program)):
        for m in one_step_down(p.op_kind, a[i]):
            cand = a.with_mode(i, m)
            rejected = prober.screen(cand)
            if rejected is not None:
                probes.append(Probe(i + 1, p.source_tag, m, f"Screen:{rejected.name}"))
                continue
            v = prober._check(apply_assignment(prober.program, cand), prober.cfg.max_timeout)
            probes.append(Probe(i + 1, p.source_tag, m, v.name))
            if isinstance(v, Pass):
                ok = False
    return ok, probes


def certify_maximal(program: Program, a: Assignment, cfg: OptimizerConfig | None = None, *,
                    screens: Sequence[Program] = ()) -> tuple[bool, list[Probe]]:
    """True iff every one-step relaxation fails; timeouts are recorded as such."""
    cfg = cfg or OptimizerConfig()
    return _certify(_Prober(program, cfg, screens, None), a)


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

_SUFFIX = {Mode.RLX: "rlx", Mode.ACQ: "acq", Mode.REL: "rel", Mode.SC: "sc"}
_VERB = {OpKind.LOAD: "read", OpKind.STORE: "write", OpKind.AWAIT: "await", OpKind.FENCE: "fence"}


def _pointer_fields(program: Program) -> set[str]:
    out = set()
    for name, v in program.globals:
        if isinstance(v, (NullRef, ObjRef)):
            out.add(name)
    for o in program.objects:
        for f, v in o.fields:
            if isinstance(v, (NullRef, ObjRef)):
                out.add(f)
    return out


def primitive_name(program: Program, point: BarrierPoint, mode: Mode) -> str:
    ins = next((i for t in program.threads for i in t.code if getattr(i, "point", None) == point.id), None)
    if point.op_kind is OpKind.RMW:
        verb = "xchg" if isinstance(ins, Swap) else "cmpxchg" if isinstance(ins, Cas) else "await_cmpxchg"
    else:
        verb = _VERB[point.op_kind]
    loc = getattr(ins, "loc", None)
    kind = "atomicptr" if loc is not None and loc.field in _pointer_fields(program) else "atomic"
    return f"{kind}_{verb}_{_SUFFIX[mode]}"


def build_report(program: Program, a: Assignment) -> OptReport:
    points = list_barrier_points(program)
    counts = {m: 0 for m in (Mode.SC, Mode.ACQ, Mode.REL, Mode.RLX)}
    diff = []
    for i, (p, m) in enumerate(zip(points, a)):
        counts[m] += 1
        if m is not p.mode:
            diff.append(DiffEntry(i + 1, p.id, p.source_tag, p.snippet, p.op_kind, m, primitive_name(program, p, m)))
    return OptReport(len(points), counts, diff, list(zip(points, a)))


_NAMES = ((Mode.SC, "Seq Cst"), (Mode.ACQ, "Acquire"), (Mode.REL, "Release"), (Mode.RLX, "Relaxed"))


def render_report(report: OptReport) -> str:
    lines = ["== SUMMARY " + "=" * 35, f"Barriers: {report.total_points}"]
    for m, label in _NAMES:
        lines.append(f" {label}: {report.counts.get(m, 0)}")
    lines.append("== DIFF " + "=" * 38)
    for d in report.diff:
        lines.append(f"[{d.index}] {d.source_tag}:")
        lines.append(f"    {d.snippet}" if d.snippet else "    (no snippet)")
        lines.append(f"    ^~~~~~~~~~ {d.primitive}")
    return "\n".join(lines) + "\n"


def render_certificate(report: OptReport) -> str:
    if report.maximal is None:
        return ""
    lines = ["== CERTIFICATE " + "=" * 31,
             f"maximal: {'yes' if report.maximal else 'no'}; probes: {len(report.probes)}; "
             f"inconclusive: {report.inconclusive}"]
    for pr in report.probes:
        lines.append(f"[{pr.index}] {pr.source_tag} -> {pr.mode.value}: {pr.verdict}")
    return "\n".join(lines) + "\n"


def report_json(report: OptReport) -> str:
    data = {
        "summary": {"total": report.total_points, **{m.value: report.counts.get(m, 0) for m in MODE_ORDER}},
        "points": [
            {"id": p.id, "source_tag": p.source_tag, "op_kind": p.op_kind.value, "mode": m.value}
            for p, m in report.points
        ],
        "maximal": report.maximal,
        "inconclusive": report.inconclusive,
    }
    return json.dumps(data, indent=2) + "\n"


__all__ = [
    "DiffEntry",
    "OptReport",
    "OptimizerConfig",
    "OptimizerError",
    "Probe",
    "build_report",
    "certify_maximal",
    "optimize",
    "primitive_name",
    "render_certificate",
    "render_report",
    "report_json",
]
