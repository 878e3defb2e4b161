from __future__ import annotations

import oracle
import pytest

from wmmcheck.engine import (
    EngineConfig,
    EngineError,
    ExecutionTrace,
    check_trace_coherence,
    dump_trace,
    explore,
    outcomes,
    ppo_ordered,
    replay,
    sc_executions,
)
from wmmcheck.ir import CodeBuilder, Mode, straight_line
from wmmcheck.ir.core import FenceKind, Load, Store
from wmmcheck.programs import litmus, litmus_corpus, project

R, A, L, S = Mode.RLX, Mode.ACQ, Mode.REL, Mode.SC


def _traces(program, config):
    seen: list[ExecutionTrace] = []
    summary = explore(program, config, seen.append)
    return seen, summary


def _outs(named, model, **kw):
    cfg = EngineConfig(model=model, state_caching=True, **kw)
    return {project(o, named.observed) for o in outcomes(named.program, cfg)}


# -- execution counts --------------------------------------------------------


def test_two_stores_two_interleavings():
    p = straight_line([lambda b: b.store("x", 1, R, "a"), lambda b: b.store("y", 1, R, "b")],
                      globals_=[("x", 0), ("y", 0)])
    traces, summary = _traces(p, EngineConfig(model="sc"))
    assert summary.executions_visited == 2
    orders = {tuple(e.location for e in t.commit_order) for t in traces}
    assert orders == {("x", "y"), ("y", "x")}


@pytest.mark.parametrize("model", ["weak", "sc"])
def test_single_thread_single_execution(model):
    def body(b: CodeBuilder) -> None:
        b.store("x", 1, R, "a")
        r = b.load("y", R, "b")
        b.store("y", r, R, "c")

    p = straight_line([body], globals_=[("x", 0), ("y", 0)])
    # distinct commit orders of independent accesses collapse to one final state
    traces, summary = _traces(p, EngineConfig(model=model, state_caching=True))
    assert summary.executions_visited == 1
    assert traces[0].final_globals == {"x": "1", "y": "0"}


def test_sc_executions_is_explore_with_sc_model():
    p = litmus("SB").program
    a, _ = _traces(p, EngineConfig(model="sc"))
    b: list = []
    sc_executions(p, EngineConfig(model="weak"), b.append)
    assert [t.commit_order for t in a] == [t.commit_order for t in b]


# -- litmus behaviour --------------------------------------------------------


def test_mp_relaxed_allows_stale_read():
    assert (("r1", 1), ("r2", 0)) in _outs(litmus("MP"), "weak")


def test_mp_release_acquire_forbids_stale_read():
    assert (("r1", 1), ("r2", 0)) not in _outs(litmus("MP+rel/acq"), "weak")


def test_sb_all_sc_forbids_both_zero():
    assert (("r0", 0), ("r1", 0)) not in _outs(litmus("SB+sc"), "weak")
    assert (("r0", 0), ("r1", 0)) in _outs(litmus("SB"), "weak")


@pytest.mark.parametrize("named", litmus_corpus(), ids=lambda n: n.name)
def test_corpus_matches_oracle(named):
    for model in ("weak", "sc"):
        assert _outs(named, model) == named.expected[model]
        assert oracle.outcomes(named.program, named.observed, model) == named.expected[model]
        assert not (named.forbidden[model] & named.expected[model])


def test_all_sc_weak_equals_sc():
    named = litmus("SB+sc")
    assert _outs(named, "weak") == _outs(named, "sc")


def _ctrl_mp():
    def t0(b: CodeBuilder) -> None:
        b.store("x", 1, R, "T0:x")
        b.store("flag", 1, L, "T0:flag")

    def t1(b: CodeBuilder) -> None:
        r1 = b.load("flag", R, "T1:flag")
        with b.if_(r1):
            r2 = b.load("x", R, "T1:x")
            b.store("o2", r2, R, point=False)
        b.store("o1", r1, R, point=False)

    return straight_line([t0, t1], globals_=[("x", 0), ("flag", 0), ("o1", 0), ("o2", 9)])


def test_loads_speculate_past_branches():
    p = _ctrl_mp()
    stale = (("o1", 1), ("o2", 0))
    spec = {project(o, ("o1", "o2")) for o in outcomes(p, EngineConfig(state_caching=True))}
    nospec = {project(o, ("o1", "o2"))
              for o in outcomes(p, EngineConfig(state_caching=True, speculation=False))}
    assert stale in spec
    assert stale not in nospec
    assert nospec <= spec


def test_control_dependency_orders_writes():
    # LB with both stores under a branch on the loaded value
    def thread(i: int):
        def body(b: CodeBuilder) -> None:
            r = b.load(f"x{i}", R, f"T{i}:ld")
            with b.if_(r):
                b.store(f"x{1 - i}", 1, R, f"T{i}:st")
            b.store(f"o{i}", r, R, point=False)
        return body

    p = straight_line([thread(0), thread(1)], globals_=[("x0", 0), ("x1", 0), ("o0", 0), ("o1", 0)])
    outs = {project(o, ("o0", "o1")) for o in outcomes(p)}
    assert outs == {(("o0", 0), ("o1", 0))}


@pytest.mark.parametrize("named", litmus_corpus(), ids=lambda n: n.name)
def test_no_speculation_is_subset(named):
    assert _outs(named, "weak", speculation=False) <= _outs(named, "weak")


# -- ppo rules ---------------------------------------------------------------


def _code(body):
    return straight_line([body], globals_=[("x", 0), ("y", 0), ("z", 0)]).threads[0].code


def _mem_idx(code):
    return [i for i, ins in enumerate(code) if isinstance(ins, (Load, Store)) or type(ins).__name__ in
            ("Fence", "Swap", "Cas", "Await", "AwaitCas")]


def test_ppo_swap_sc_orders_everything_after():
    def body(b: CodeBuilder) -> None:
        b.swap("x", 1, S, "swap")
        b.store("y", 1, R, "st")
        b.load("y", R, "ld")

    code = _code(body)
    i = _mem_idx(code)
    assert ppo_ordered(code, i[0], i[1]) and ppo_ordered(code, i[0], i[2])


def test_ppo_relaxed_stores_reorder():
    def body(b: CodeBuilder) -> None:
        b.store("x", 1, R, "v")
        b.store("y", 1, R, "spin")

    code = _code(body)
    i = _mem_idx(code)
    assert not ppo_ordered(code, i[0], i[1])
    assert ppo_ordered(code, i[0], i[1], "sc")


def test_ppo_control_dependency():
    def body(b: CodeBuilder) -> None:
        r = b.load("x", R, "ld")
        with b.if_(r):
            b.store("y", 1, R, "st")
            b.load("y", R, "ld2")

    code = _code(body)
    i = _mem_idx(code)
    assert ppo_ordered(code, i[0], i[1])
    assert not ppo_ordered(code, i[0], i[2])


def test_ppo_ww_fence_and_compiler_barrier():
    def body(b: CodeBuilder) -> None:
        b.store("x", 1, R, "a")
        b.fence(FenceKind.COMPILER, S, "barrier")
        b.store("y", 1, R, "b")
        b.fence(FenceKind.WW, S, "wmb")
        b.store("x", 2, R, "c")
        b.load("z", R, "d")

    code = _code(body)
    i = _mem_idx(code)
    st_a, st_b, st_c, ld_d = i[0], i[2], i[4], i[5]
    assert not ppo_ordered(code, st_a, st_b)
    assert ppo_ordered(code, st_b, st_c)
    assert not ppo_ordered(code, st_b, ld_d)


def test_ppo_same_location_and_data_dependency():
    def body(b: CodeBuilder) -> None:
        r = b.load("x", R, "a")
        b.store("y", r, R, "b")
        b.store("x", 1, R, "c")

    code = _code(body)
    i = _mem_idx(code)
    assert ppo_ordered(code, i[0], i[1])
    assert ppo_ordered(code, i[0], i[2])
    assert not ppo_ordered(code, i[1], i[2])


# -- invariants and diagnostics ---------------------------------------------


def test_every_trace_is_coherent_and_replays():
    traces, _ = _traces(litmus("MP").program, EngineConfig())
    for t in traces:
        assert check_trace_coherence(t, litmus("MP").program)
        assert replay(litmus("MP").program, t) == t.final_globals


def test_incoherent_trace_is_detected():
    p = litmus("CoRR").program
    traces, _ = _traces(p, EngineConfig())
    t = traces[0]
    ev = next(e for e in t.commit_order if e.value_read is not None)
    from dataclasses import replace

    bad = ExecutionTrace(tuple(replace(e, value_read="7") if e is ev else e for e in t.commit_order),
                         t.final_globals)
    assert not check_trace_coherence(bad, p)
    with pytest.raises(EngineError):
        replay(p, bad)


def test_determinism():
    p = litmus("SB").program
    a, _ = _traces(p, EngineConfig())
    b, _ = _traces(p, EngineConfig())
    assert [t.commit_order for t in a] == [t.commit_order for t in b]


def test_max_steps_is_reported():
    _, summary = _traces(litmus("MP").program, EngineConfig(max_steps=2))
    assert summary.step_bound_hits > 0
    assert summary.diagnostics[0].startswith("max-steps")


def test_timeout_sets_flag():
    from wmmcheck.programs import build_cna

    summary = explore(build_cna(3), EngineConfig(timeout=0.05, state_caching=True))
    assert summary.hit_timeout


def test_bad_config_rejected():
    with pytest.raises(ValueError):
        EngineConfig(model="tso")
    with pytest.raises(ValueError):
        EngineConfig(max_steps=0)


def test_dump_format():
    traces, _ = _traces(litmus("MP").program, EngineConfig(model="sc"))
    text = dump_trace(traces[0])
    assert text.splitlines()[0] == "#0 T0 write@rlx x r=- w=1 [T0:x]"
