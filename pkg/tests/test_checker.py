from __future__ import annotations

import pytest

from wmmcheck.checker import (
    AssertionViolation,
    ExplainError,
    InvalidProgram,
    LivenessViolation,
    Pass,
    Timeout,
    check,
    explain,
    reordered_pairs,
    verdict_line,
)
from wmmcheck.engine import EngineConfig, explore, replay
from wmmcheck.ir import Assertion, CodeBuilder, Mode, Program, Thread, apply_assignment, straight_line
from wmmcheck.ir.core import Const, Loc, Reg, Return, Store
from wmmcheck.programs import build_cna, cna_buggy, fig2_assignment, litmus

R, A, L, S = Mode.RLX, Mode.ACQ, Mode.REL, Mode.SC


def _never_signaled():
    def waiter(b: CodeBuilder) -> None:
        b.await_("flag", mode=A, tag="wait")

    return straight_line([waiter], globals_=[("flag", 0)])


def test_exit_codes():
    assert [c.exit_code for c in (Pass, AssertionViolation, LivenessViolation, Timeout, InvalidProgram)] == [
        0, 1, 2, 3, 4]


def test_single_thread_client_passes():
    assert isinstance(check(build_cna(1)), Pass)


def test_fig2_assignment_passes_at_two_threads(cna2):
    v = check(apply_assignment(cna2, fig2_assignment(cna2)))
    assert isinstance(v, Pass), verdict_line(v)


def test_relaxed_handoff_breaks_mutual_exclusion():
    v = check(cna_buggy(2).program)
    assert isinstance(v, AssertionViolation)
    assert v.trace.final_globals["v"] == "1"
    assert v.failed == ("v == 2 (got 1)",)
    # the witness replays to the same final globals
    assert replay(v.program, v.trace) == v.trace.final_globals


def test_explain_shows_the_reordered_handoff():
    v = check(cna_buggy(2).program)
    text = explain(v)
    assert text.startswith("verdict: AssertionViolation\n")
    line = next(ln for ln in text.splitlines() if "committed after" in ln and "cnalock.h:107" in ln)
    assert "write@rlx v [client.c:v++]" in line


def test_liveness_witness_names_the_location():
    v = check(_never_signaled())
    assert isinstance(v, LivenessViolation)
    assert "blocked: T0 await on flag" in explain(v)


def test_safety_wins_over_liveness():
    def waiter(b: CodeBuilder) -> None:
        b.await_("flag", mode=A, tag="wait")

    def writer(b: CodeBuilder) -> None:
        b.store("v", 2, R, "w")
        with b.if_(b.nondet()):
            b.store("flag", 1, R, "signal")

    p = straight_line([waiter, writer], globals_=[("flag", 0), ("v", 0)], assertions=[Assertion("v", 1)])
    assert isinstance(check(p), AssertionViolation)
    assert isinstance(check(p, stop_on_first=True), (AssertionViolation, LivenessViolation))


def test_sb_explain_shows_loads_before_stores():
    p = litmus("SB").program
    found = []

    def loads_first(tr):
        kinds = [e.kind for e in tr.commit_order if e.location in ("x0", "x1")]
        if kinds == ["read", "read", "write", "write"]:
            found.append(tr)
            return True

    explore(p, EngineConfig(), loads_first)
    v = AssertionViolation(found[0], p, ("r0 == 1 (got 0)",))
    text = explain(v)
    for i in (0, 1):
        assert f"T{i}: #" in text
        line = next(ln for ln in text.splitlines() if f"[T{i}:x{i}] committed after" in ln)
        assert f"read@rlx x{1 - i} [T{i}:x{1 - i}]" in line


def test_timeout_is_not_pass():
    v = check(build_cna(3), EngineConfig(timeout=0.05))
    assert isinstance(v, Timeout)
    assert not v.passed and v.summary.hit_timeout


def test_invalid_program():
    p = Program(globals=(("x", Const(0)),), threads=(Thread(0, (Store(Loc(None, "x"), Reg("r")), Return())),))
    v = check(p)
    assert isinstance(v, InvalidProgram)
    assert v.diagnostics[0].rule == "use-before-def"


@pytest.mark.parametrize("verdict", [Pass(), Timeout(), InvalidProgram()])
def test_explain_rejects_non_violations(verdict):
    with pytest.raises(ExplainError):
        explain(verdict)


def test_weak_pass_implies_sc_pass(cna2):
    p = apply_assignment(cna2, fig2_assignment(cna2))
    assert check(p).passed and check(p, EngineConfig(model="sc")).passed


def test_check_is_deterministic():
    a, b = check(cna_buggy(2).program), check(cna_buggy(2).program)
    assert a.trace.commit_order == b.trace.commit_order


def test_verdict_line():
    v = check(build_cna(1))
    assert verdict_line(v).startswith("Pass (")
