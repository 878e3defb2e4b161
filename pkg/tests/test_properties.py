"""Randomized cross-checks of the engine against the brute-force oracle."""

from __future__ import annotations

import oracle
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from wmmcheck.engine import EngineConfig, outcomes, ppo_ordered
from wmmcheck.ir import Mode, format_program, parse_program, straight_line
from wmmcheck.ir.core import Fence, FenceKind, Label, Load, Return, Store
from wmmcheck.programs import project

R, A, L, S = Mode.RLX, Mode.ACQ, Mode.REL, Mode.SC
LOCS = ("x", "y")

_load = st.tuples(st.just("ld"), st.sampled_from(LOCS), st.sampled_from((R, A, S)))
_store = st.tuples(st.just("st"), st.sampled_from(LOCS), st.sampled_from((1, 2, "dep")),
                   st.sampled_from((R, L, S)))
_fence = st.one_of(
    st.tuples(st.just("fence"), st.just(FenceKind.FULL), st.sampled_from((R, A, L, S))),
    st.tuples(st.just("fence"), st.sampled_from((FenceKind.WW, FenceKind.COMPILER)), st.just(S)),
)
_thread = st.lists(st.one_of(_load, _store, _fence), min_size=1, max_size=3)
programs = st.lists(_thread, min_size=2, max_size=2)


def build(spec):
    observed: list[str] = []
    globals_ = [(loc, 0) for loc in LOCS]

    def body(tid, ops):
        def emit(b):
            regs = []
            for n, op in enumerate(ops):
                tag = f"T{tid}:{n}"
                if op[0] == "ld":
                    regs.append(b.load(op[1], op[2], tag))
                elif op[0] == "st":
                    val = op[2]
                    if val == "dep":
                        val = regs[-1] if regs else 3
                    b.store(op[1], val, op[3], tag)
                else:
                    b.fence(op[1], op[2], tag)
            for k, r in enumerate(regs):
                b.store(f"o{tid}_{k}", r, R, point=False)
        return emit

    for tid, ops in enumerate(spec):
        n_loads = sum(op[0] == "ld" for op in ops)
        for k in range(n_loads):
            observed.append(f"o{tid}_{k}")
            globals_.append((f"o{tid}_{k}", 0))
    observed += list(LOCS)
    prog = straight_line([body(t, ops) for t, ops in enumerate(spec)], globals_=globals_)
    return prog, tuple(observed)


def engine_outcomes(prog, observed, model, **kw):
    cfg = EngineConfig(model=model, state_caching=True, **kw)
    return {project(o, observed) for o in outcomes(prog, cfg)}


_settings = settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@_settings
@given(programs)
def test_engine_matches_oracle(spec):
    prog, observed = build(spec)
    for model in ("weak", "sc"):
        assert engine_outcomes(prog, observed, model) == oracle.outcomes(prog, observed, model)


@_settings
@given(programs)
def test_sc_outcomes_are_weak_outcomes(spec):
    prog, observed = build(spec)
    assert engine_outcomes(prog, observed, "sc") <= engine_outcomes(prog, observed, "weak")


@_settings
@given(programs)
def test_speculation_flag_is_irrelevant_without_branches(spec):
    prog, observed = build(spec)
    assert engine_outcomes(prog, observed, "weak") == engine_outcomes(prog, observed, "weak", speculation=False)


@_settings
@given(_thread.filter(lambda ops: len(ops) >= 2), st.sampled_from(("weak", "sc")))
def test_ppo_matches_oracle(ops, model):
    prog, _ = build([ops, [("ld", "x", R)]])
    code = prog.threads[0].code
    idx = [i for i, ins in enumerate(code) if isinstance(ins, (Load, Store, Fence))]
    mem = [code[i] for i in idx]
    for j in range(len(idx)):
        for i in range(j):
            assert ppo_ordered(code, idx[i], idx[j], model) == oracle.ordered(mem, i, j, model), (i, j)


_UP = {R: (A, L, S), A: (S,), L: (S,), S: ()}


@settings(max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(programs, st.data())
def test_strengthening_never_adds_outcomes(spec, data):
    prog, observed = build(spec)
    t = data.draw(st.integers(0, 1))
    n = data.draw(st.integers(0, len(spec[t]) - 1))
    op = spec[t][n]
    mode = op[-1]
    ups = [m for m in _UP[mode] if (op[0] != "ld" or m is not L) and (op[0] != "st" or m is not A)]
    if op[0] == "fence" and op[1] is not FenceKind.FULL:
        ups = []
    if not ups:
        return
    new = data.draw(st.sampled_from(ups))
    spec2 = [list(x) for x in spec]
    spec2[t][n] = op[:-1] + (new,)
    strong, _ = build(spec2)
    assert engine_outcomes(strong, observed, "weak") <= engine_outcomes(prog, observed, "weak")


@_settings
@given(programs)
def test_text_round_trip(spec):
    prog, _ = build(spec)
    text = format_program(prog)
    again = parse_program(text)
    assert again == prog
    assert format_program(again) == text


def test_oracle_ignores_labels_and_returns():
    prog, _ = build([[("st", "x", 1, R)], [("ld", "x", R)]])
    kinds = {type(i) for t in prog.threads for i in t.code}
    assert Label in kinds and Return in kinds
