"""Litmus corpus used to calibrate the engine against a brute-force oracle.

Each test observes its loaded registers by storing them into result globals
(``r0``, ``r1``, ...) with unannotated stores. Outcomes are the final values
of those result globals only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from ..ir.builder import CodeBuilder, straight_line
from ..ir.core import Mode, Program

R, A, L, S = Mode.RLX, Mode.ACQ, Mode.REL, Mode.SC

Outcome = tuple[tuple[str, int], ...]


@dataclass(frozen=True)
class NamedProgram:
    name: str
    program: Program
    # model name ("weak" / "sc") -> reachable outcomes over ``observed``
    expected: dict[str, frozenset[Outcome]] = field(default_factory=dict)
    observed: tuple[str, ...] = ()
    # outcomes of interest that must not appear, per model
    forbidden: dict[str, frozenset[Outcome]] = field(default_factory=dict)


def project(final_globals: dict[str, object] | tuple, names: tuple[str, ...]) -> Outcome:
    """Restrict an engine final-global map to ``names`` with int values."""
    d = dict(final_globals)
    return tuple((n, int(d[n])) for n in names)


def _observe(b: CodeBuilder, reg: str, out: str) -> None:
    b.store(out, reg, R, point=False)


def _mp(store_mode: Mode, load_mode: Mode, name: str) -> Program:
    def t0(b: CodeBuilder) -> None:
        b.store("x", 1, R, "T0:x")
        b.store("flag", 1, store_mode, "T0:flag")

    def t1(b: CodeBuilder) -> None:
        r1 = b.load("flag", load_mode, "T1:flag")
        r2 = b.load("x", R, "T1:x")
        _observe(b, r1, "r1")
        _observe(b, r2, "r2")

    return straight_line([t0, t1], globals_=[("x", 0), ("flag", 0), ("r1", 0), ("r2", 0)], name=name)


def _sb(mode: Mode, name: str) -> Program:
    def thread(i: int) -> Callable[[CodeBuilder], None]:
        def body(b: CodeBuilder) -> None:
            b.store(f"x{i}", 1, mode, f"T{i}:x{i}")
            r = b.load(f"x{1 - i}", mode, f"T{i}:x{1 - i}")
            _observe(b, r, f"r{i}")
        return body

    return straight_line([thread(0), thread(1)], globals_=[("x0", 0), ("x1", 0), ("r0", 0), ("r1", 0)],
                         name=name)


def _lb(data_dep: bool, name: str) -> Program:
    def thread(i: int) -> Callable[[CodeBuilder], None]:
        def body(b: CodeBuilder) -> None:
            r = b.load(f"x{i}", R, f"T{i}:x{i}")
            b.store(f"x{1 - i}", r if data_dep else 1, R, f"T{i}:x{1 - i}")
            _observe(b, r, f"r{i}")
        return body

    return straight_line([thread(0), thread(1)], globals_=[("x0", 0), ("x1", 0), ("r0", 0), ("r1", 0)],
                         name=name)


def _corr(name: str) -> Program:
    def t0(b: CodeBuilder) -> None:
        b.store("x", 1, R, "T0:x")

    def t1(b: CodeBuilder) -> None:
        r1 = b.load("x", R, "T1:x#1")
        r2 = b.load("x", R, "T1:x#2")
        _observe(b, r1, "r1")
        _observe(b, r2, "r2")

    return straight_line([t0, t1], globals_=[("x", 0), ("r1", 0), ("r2", 0)], name=name)


def _o(**kw: int) -> Outcome:
    return tuple(sorted(kw.items()))


def _set(*outs: Outcome) -> frozenset[Outcome]:
    return frozenset(outs)


# Reachable outcome sets below were produced by the brute-force oracle in
# tests/oracle.py (all commit orders allowed by the ordering rules) and frozen.
_ALL2 = _set(_o(r1=0, r2=0), _o(r1=0, r2=1), _o(r1=1, r2=0), _o(r1=1, r2=1))
_MP_SC = _set(_o(r1=0, r2=0), _o(r1=0, r2=1), _o(r1=1, r2=1))
_SB_ALL = _set(_o(r0=0, r1=0), _o(r0=0, r1=1), _o(r0=1, r1=0), _o(r0=1, r1=1))
_SB_SC = _set(_o(r0=0, r1=1), _o(r0=1, r1=0), _o(r0=1, r1=1))
_LB_SC = _set(_o(r0=0, r1=0), _o(r0=0, r1=1), _o(r0=1, r1=0))
_LB_DEP = _set(_o(r0=0, r1=0))
_CORR = _set(_o(r1=0, r2=0), _o(r1=0, r2=1), _o(r1=1, r2=1))


def _corpus() -> dict[str, NamedProgram]:
    return {
        "MP": NamedProgram("MP", _mp(R, R, "MP"), {"weak": _ALL2, "sc": _MP_SC}, ("r1", "r2"),
                           {"weak": frozenset(), "sc": _set(_o(r1=1, r2=0))}),
        "MP+rel/acq": NamedProgram("MP+rel/acq", _mp(L, A, "MP+rel/acq"), {"weak": _MP_SC, "sc": _MP_SC},
                                   ("r1", "r2"), {"weak": _set(_o(r1=1, r2=0)), "sc": _set(_o(r1=1, r2=0))}),
        "SB": NamedProgram("SB", _sb(R, "SB"), {"weak": _SB_ALL, "sc": _SB_SC}, ("r0", "r1"),
                           {"weak": frozenset(), "sc": _set(_o(r0=0, r1=0))}),
        "SB+sc": NamedProgram("SB+sc", _sb(S, "SB+sc"), {"weak": _SB_SC, "sc": _SB_SC}, ("r0", "r1"),
                              {"weak": _set(_o(r0=0, r1=0)), "sc": _set(_o(r0=0, r1=0))}),
        "LB": NamedProgram("LB", _lb(False, "LB"), {"weak": _SB_ALL, "sc": _LB_SC}, ("r0", "r1"),
                           {"weak": frozenset(), "sc": _set(_o(r0=1, r1=1))}),
        "LB+data-dep": NamedProgram("LB+data-dep", _lb(True, "LB+data-dep"), {"weak": _LB_DEP, "sc": _LB_DEP},
                                    ("r0", "r1"), {"weak": _set(_o(r0=1, r1=1)), "sc": _set(_o(r0=1, r1=1))}),
        "CoRR": NamedProgram("CoRR", _corr("CoRR"), {"weak": _CORR, "sc": _CORR}, ("r1", "r2"),
                             {"weak": _set(_o(r1=1, r2=0)), "sc": _set(_o(r1=1, r2=0))}),
    }


LITMUS_NAMES: tuple[str, ...] = ("MP", "MP+rel/acq", "SB", "SB+sc", "LB", "LB+data-dep", "CoRR")


def litmus(name: str) -> NamedProgram:
    corpus = _corpus()
    if name not in corpus:
        raise KeyError(f"unknown litmus test {name!r}; known: {', '.join(LITMUS_NAMES)}")
    return corpus[name]


def litmus_corpus() -> list[NamedProgram]:
    corpus = _corpus()
    return [corpus[n] for n in LITMUS_NAMES]
