"""Verdicts for mutual exclusion (the final assertion) and await termination."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import ClassVar, Sequence

from .engine import (
    K_AWAIT,
    K_AWAITCAS,
    K_CASOK,
    K_FFULL,
    REF_BASE,
    Compiled,
    EngineConfig,
    ExecutionTrace,
    ExplorationSummary,
    dump_trace,
    explore,
)
from .ir.core import Diagnostic, Program, validate


@dataclass
class Verdict:
    name: ClassVar[str] = "Verdict"
    exit_code: ClassVar[int] = -1
    summary: ExplorationSummary | None = field(default=None, kw_only=True)

    @property
    def passed(self) -> bool:
        return isinstance(self, Pass)

    @property
    def is_violation(self) -> bool:
        return isinstance(self, (AssertionViolation, LivenessViolation))


@dataclass
class Pass(Verdict):
    name: ClassVar[str] = "Pass"
    exit_code: ClassVar[int] = 0


@dataclass
class AssertionViolation(Verdict):
    name: ClassVar[str] = "AssertionViolation"
    exit_code: ClassVar[int] = 1
    trace: ExecutionTrace
    program: Program
    failed: tuple[str, ...] = ()


@dataclass
class LivenessViolation(Verdict):
    name: ClassVar[str] = "LivenessViolation"
    exit_code: ClassVar[int] = 2
    trace: ExecutionTrace
    program: Program


@dataclass
class Timeout(Verdict):
    name: ClassVar[str] = "Timeout"
    exit_code: ClassVar[int] = 3


@dataclass
class InvalidProgram(Verdict):
    name: ClassVar[str] = "InvalidProgram"
    exit_code: ClassVar[int] = 4
    diagnostics: tuple[Diagnostic, ...] = ()


def failed_assertions(program: Program, trace: ExecutionTrace) -> tuple[str, ...]:
    out = []
    for a in program.assertions:
        got = trace.final_globals.get(a.name)
        if got != str(a.value):
            out.append(f"{a.name} == {a.value} (got {got})")
    return tuple(out)


def check(program: Program, config: EngineConfig | None = None, *, stop_on_first: bool = False,
          compiled: Compiled | None = None) -> Verdict:
    """Explore every execution; report the first safety or liveness violation.

    Assertion violations (including invalid memory accesses) win over
    liveness violations: after a liveness witness the search goes on looking
    for a safety one unless ``stop_on_first`` is set. The search always uses
    state caching; both properties depend only on terminal states.
    """
    diags = validate(program)
    if diags:
        return InvalidProgram(diagnostics=tuple(diags))
    config = replace(config or EngineConfig(), state_caching=True)
    found: dict[str, object] = {}

    def visit(trace: ExecutionTrace) -> bool:
        if trace.error is not None:
            found["safety"] = (trace, (trace.error,))
            return True
        if trace.blocked:
            found.setdefault("liveness", trace)
            return stop_on_first
        failed = failed_assertions(program, trace)
        if failed:
            found["safety"] = (trace, failed)
            return True
        return False

    summary = explore(program, config, visit, compiled=compiled)
    if "safety" in found:
        trace, failed = found["safety"]  # type: ignore[misc]
        return AssertionViolation(trace, program, failed, summary=summary)
    if "liveness" in found:
        return LivenessViolation(found["liveness"], program, summary=summary)  # type: ignore[arg-type]
    if summary.hit_timeout or summary.step_bound_hits:
        return Timeout(summary=summary)
    return Pass(summary=summary)


# ---------------------------------------------------------------------------
# explanation
# ---------------------------------------------------------------------------


def _parse_shown(c: Compiled, s: str) -> int:
    if s.startswith("&"):
        return REF_BASE + c.obj_names.index(s[1:])
    return int(s)


def program_order(program: Program, trace: ExecutionTrace, tid: int) -> list[int] | None:
    """Indices of ``tid``'s events in ``trace`` sorted by program order.

    The thread is re-run sequentially, feeding each access the value it read
    in the trace; nondeterministic choices are resolved by backtracking.
    """
    c = Compiled(program)
    t = c.tids.index(tid)
    code = c.threads[t]
    events = {ev.instance: i for i, ev in enumerate(trace.commit_order) if ev.thread == tid}
    nregs = len(c.reg_names[t])

    def run(pc: int, regs: list, occ: dict, order: list[int], budget: int) -> list[int] | None:
        while budget > 0:
            budget -= 1
            if pc < 0 or pc >= len(code):
                return order if len(order) == len(events) else None
            ins = code[pc]
            op = ins.op
            if op == "label":
                pc += 1
            elif op == "jump":
                pc = ins.target
            elif op == "ret":
                pc = -1
            elif op == "numa":
                regs[ins.dst] = c.numa[t]
                pc += 1
            elif op == "nondet":
                for choice in (1, 0):
                    r2 = list(regs)
                    r2[ins.dst] = choice
                    got = run(pc + 1, r2, dict(occ), list(order), budget)
                    if got is not None:
                        return got
                return None
            elif op == "compute":
                args = [x if k == 0 else regs[x] for k, x in ins.args]
                regs[ins.dst] = ins.fn(*args)
                pc += 1
            elif op == "branch":
                k, x = ins.a
                cond = x if k == 0 else regs[x]
                pc = ins.target if cond else ins.target2
            else:
                if ins.kind >= K_FFULL:  # fences leave no event
                    pc += 1
                    continue
                n = occ.get(pc, 0)
                idx = events.get((pc, n))
                if idx is None:
                    # the thread stopped here (blocked, or the trace ends)
                    return order if len(order) == len(events) else None
                occ[pc] = n + 1
                order.append(idx)
                ev = trace.commit_order[idx]
                if ins.dst >= 0:
                    if ins.kind == K_CASOK:
                        regs[ins.dst] = 1 if ev.kind == "rmw" else 0
                    elif ev.value_read is not None:
                        regs[ins.dst] = _parse_shown(c, ev.value_read)
                pc += 1
        return None

    return run(0, [0] * nregs, {}, [], 1_000_000)


def reordered_pairs(program: Program, trace: ExecutionTrace) -> list[tuple[int, int]]:
    """(earlier-in-program-order, later) event pairs committed the other way round."""
    out = []
    for tid in sorted({ev.thread for ev in trace.commit_order}):
        order = program_order(program, trace, tid)
        if order is None:
            continue
        for i, a in enumerate(order):
            for b in order[i + 1:]:
                if b < a:
                    out.append((a, b))
    return out


class ExplainError(ValueError):
    pass


def _describe(trace: ExecutionTrace, i: int) -> str:
    ev = trace.commit_order[i]
    tag = f" [{ev.tag}]" if ev.tag else ""
    return f"#{i} {ev.kind}@{ev.mode.value} {ev.location}{tag}"


def explain(verdict: Verdict) -> str:
    """Witness trace in dump format plus the per-thread reorderings."""
    if not isinstance(verdict, (AssertionViolation, LivenessViolation)):
        raise ExplainError(f"nothing to explain for {verdict.name}")
    trace, program = verdict.trace, verdict.program
    lines = [f"verdict: {verdict.name}"]
    if isinstance(verdict, AssertionViolation):
        lines += [f"failed: {f}" for f in verdict.failed]
    lines.append(dump_trace(trace).rstrip("\n"))
    if isinstance(verdict, LivenessViolation):
        c = Compiled(program)
        for tid, (ins, _occ) in sorted(trace.blocked_awaits):
            t = c.tids.index(tid)
            src = c.threads[t][ins].src if ins < len(c.threads[t]) else None
            loc = getattr(src, "loc", None)
            what = "await" if c.threads[t][ins].kind in (K_AWAIT, K_AWAITCAS) else "instruction"
            lines.append(f"blocked: T{tid} {what} on {loc if loc is not None else '?'}")
    pairs = reordered_pairs(program, trace)
    lines.append("reordered (program order vs commit order):")
    if not pairs:
        lines.append("  none")
    for a, b in pairs:
        tid = trace.commit_order[a].thread
        lines.append(f"  T{tid}: {_describe(trace, a)} committed after {_describe(trace, b)}")
    return "\n".join(lines) + "\n"


def verdict_line(verdict: Verdict) -> str:
    s = verdict.summary
    extra = f" ({s.executions_visited} executions, {s.states} states)" if s is not None else ""
    return f"{verdict.name}{extra}"


__all__: Sequence[str] = [
    "AssertionViolation",
    "ExplainError",
    "InvalidProgram",
    "LivenessViolation",
    "Pass",
    "Timeout",
    "Verdict",
    "check",
    "explain",
    "failed_assertions",
    "program_order",
    "reordered_pairs",
    "verdict_line",
]
