"""Helpers for writing programs in Python, and the lock client harness.

Lock code is written once as a template function ``f(b, node)`` that emits
instructions into a :class:`CodeBuilder`. Every thread instantiates the same
templates, so barrier points are shared across threads: a point is keyed by
(function, source tag, ordinal within that tag) and gets the same id each
time the template runs.
"""

from __future__ import annotations

import contextlib
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterator, Mapping, Sequence

from .core import (
    NULL,
    Assertion,
    Await,
    AwaitCas,
    Branch,
    Cas,
    Compute,
    Const,
    Fence,
    FenceKind,
    Instruction,
    Jump,
    Label,
    Load,
    Loc,
    Mode,
    Nondet,
    NumaNode,
    ObjectDecl,
    ObjName,
    ObjRef,
    OpKind,
    Operand,
    PointDecl,
    Pred,
    Program,
    Reg,
    Return,
    Store,
    Swap,
    Thread,
    Value,
)


class PointTable:
    def __init__(self) -> None:
        self.decls: list[PointDecl] = []
        self._ids: dict[tuple[str, str, int], int] = {}

    def get(self, function: str, tag: str, ordinal: int, kind: OpKind, snippet: str) -> int:
        key = (function, tag, ordinal)
        pid = self._ids.get(key)
        if pid is None:
            pid = len(self.decls) + 1
            self._ids[key] = pid
            self.decls.append(PointDecl(pid, kind, function, tag, snippet))
        return pid


def _opnd(x: Operand | int | str | None) -> Operand:
    """Ints become constants, ``None`` is null, ``"%r"`` a register, ``"&o"`` a reference."""
    if x is None:
        return NULL
    if isinstance(x, bool):
        return Const(int(x))
    if isinstance(x, int):
        return Const(x)
    if isinstance(x, str):
        if x.startswith("%"):
            return Reg(x[1:])
        if x.startswith("&"):
            return ObjRef(x[1:])
        raise ValueError(f"bad operand {x!r}")
    return x


def _loc(x: Loc | str) -> Loc:
    """``"%r.f"``, ``"obj.f"`` or ``"glob"``."""
    if isinstance(x, Loc):
        return x
    base, dot, fld = x.partition(".")
    if not dot:
        return Loc(None, base)
    return Loc(Reg(base[1:]) if base.startswith("%") else ObjName(base), fld)


@dataclass
class _Frame:
    name: str
    end: str


class CodeBuilder:
    """Accumulates one thread's instructions."""

    def __init__(self, points: PointTable | None = None, *, tid: int = 0):
        self.points = points if points is not None else PointTable()
        self.tid = tid
        self.code: list[Instruction] = []
        self._counter = 0
        self._ordinals: Counter[tuple[str, str]] = Counter()
        self._frames: list[_Frame] = []

    # -- naming ---------------------------------------------------------
    def fresh(self, stem: str = "t") -> str:
        self._counter += 1
        return f"{stem}{self._counter}"

    def reg(self, stem: str = "r") -> str:
        return "%" + self.fresh(stem)

    @property
    def function(self) -> str:
        return self._frames[-1].name if self._frames else "main"

    @contextlib.contextmanager
    def func(self, name: str) -> Iterator[None]:
        """Inline a function body; ``ret()`` inside jumps to its end."""
        frame = _Frame(name, self.fresh(f"{name}_end"))
        self._frames.append(frame)
        try:
            yield
        finally:
            self._frames.pop()
            self.label(frame.end)

    def _point(self, tag: str | None, kind: OpKind, snippet: str, point: bool) -> int | None:
        if not point or tag is None:
            return None
        key = (self.function, tag)
        ordinal = self._ordinals[key]
        self._ordinals[key] += 1
        return self.points.get(self.function, tag, ordinal, kind, snippet)

    # -- memory ---------------------------------------------------------
    def load(self, loc, mode=Mode.SC, tag=None, snippet="", *, point=True, dst=None) -> str:
        dst = dst or self.reg("ld")
        p = self._point(tag, OpKind.LOAD, snippet, point)
        self.code.append(Load(dst[1:], _loc(loc), mode, p, None if p else tag))
        return dst

    def store(self, loc, value, mode=Mode.SC, tag=None, snippet="", *, point=True) -> None:
        p = self._point(tag, OpKind.STORE, snippet, point)
        self.code.append(Store(_loc(loc), _opnd(value), mode, p, None if p else tag))

    def swap(self, loc, value, mode=Mode.SC, tag=None, snippet="", *, point=True, dst=None) -> str:
        dst = dst or self.reg("old")
        p = self._point(tag, OpKind.RMW, snippet, point)
        self.code.append(Swap(dst[1:], _loc(loc), _opnd(value), mode, p, None if p else tag))
        return dst

    def cas(self, loc, expected, desired, mode=Mode.SC, tag=None, snippet="", *,
            point=True, flag=False, dst=None) -> str:
        dst = dst or self.reg("cas")
        p = self._point(tag, OpKind.RMW, snippet, point)
        self.code.append(Cas(dst[1:], _loc(loc), _opnd(expected), _opnd(desired), mode, p,
                             None if p else tag, returns_flag=flag))
        return dst

    def await_cas(self, loc, expected, desired, mode=Mode.SC, tag=None, snippet="", *,
                  point=True, dst=None) -> str:
        dst = dst or self.reg("acas")
        p = self._point(tag, OpKind.RMW, snippet, point)
        self.code.append(AwaitCas(dst[1:], _loc(loc), _opnd(expected), _opnd(desired), mode, p,
                                  None if p else tag))
        return dst

    def await_(self, loc, pred: Pred = Pred.NONZERO, arg=None, mode=Mode.SC, tag=None,
               snippet="", *, point=True, dst=None) -> str:
        dst = dst or self.reg("aw")
        p = self._point(tag, OpKind.AWAIT, snippet, point)
        self.code.append(Await(dst[1:], _loc(loc), pred, None if arg is None else _opnd(arg),
                               mode, p, None if p else tag))
        return dst

    def fence(self, kind: FenceKind = FenceKind.FULL, mode=Mode.SC, tag=None, snippet="", *, point=True) -> None:
        p = self._point(tag, OpKind.FENCE, snippet, point and kind is FenceKind.FULL)
        self.code.append(Fence(kind, mode, p, None if p else tag))

    # -- local ----------------------------------------------------------
    def compute(self, op: str, *args, dst: str | None = None) -> str:
        dst = dst or self.reg("v")
        self.code.append(Compute(dst[1:], op, tuple(_opnd(a) for a in args)))
        return dst

    def mov(self, value, dst: str | None = None) -> str:
        return self.compute("mov", value, dst=dst)

    def nondet(self) -> str:
        dst = self.reg("nd")
        self.code.append(Nondet(dst[1:]))
        return dst

    def numa(self) -> str:
        dst = self.reg("node")
        self.code.append(NumaNode(dst[1:]))
        return dst

    # -- control --------------------------------------------------------
    def label(self, name: str) -> None:
        self.code.append(Label(name))

    def br(self, cond, then: str, orelse: str) -> None:
        self.code.append(Branch(_opnd(cond), then, orelse))

    def jmp(self, target: str) -> None:
        self.code.append(Jump(target))

    def ret(self) -> None:
        if not self._frames:
            raise RuntimeError("ret() outside a function")
        self.jmp(self._frames[-1].end)

    @contextlib.contextmanager
    def if_(self, cond) -> Iterator[None]:
        """``if (cond) { body }``."""
        then, end = self.fresh("then"), self.fresh("endif")
        self.br(cond, then, end)
        self.label(then)
        yield
        self.label(end)

    def if_else(self, cond) -> "_IfElse":
        return _IfElse(self, cond)

    def finish(self) -> tuple[Instruction, ...]:
        if not self.code or not isinstance(self.code[-1], Return):
            self.code.append(Return())
        return tuple(self.code)


class _IfElse:
    """``with b.if_else(c) as br: ...; br.otherwise(); ...``."""

    def __init__(self, b: CodeBuilder, cond):
        self.b = b
        self.then = b.fresh("then")
        self.orelse = b.fresh("else")
        self.end = b.fresh("endif")
        self._switched = False
        b.br(cond, self.then, self.orelse)

    def __enter__(self) -> "_IfElse":
        self.b.label(self.then)
        return self

    def otherwise(self) -> None:
        self.b.jmp(self.end)
        self.b.label(self.orelse)
        self._switched = True

    def __exit__(self, *exc) -> None:
        if not self._switched:
            self.otherwise()
        self.b.label(self.end)


LockTemplate = Callable[[CodeBuilder, str], None]


def default_numa(n_threads: int) -> tuple[int, ...]:
    return tuple(i % 2 for i in range(n_threads))


def build_client(
    lock_entry: LockTemplate,
    unlock_entry: LockTemplate,
    n_threads: int,
    numa_map: Mapping[int, int] | Sequence[int] | None = None,
    *,
    lock_objects: Sequence[ObjectDecl] = (),
    node_fields: Callable[[int, int], Sequence[tuple[str, Value]]] = lambda tid, node: (),
    node_name: str = "node",
    extra_globals: Sequence[tuple[str, Value]] = (),
    extra_threads: Sequence[Callable[[CodeBuilder], None]] = (),
    name: str = "",
    notes: Sequence[str] = (),
) -> Program:
    """N threads each run ``lock; v++; unlock``; the final assertion is ``v == N``.

    The increment of ``v`` is a relaxed load/add/store with no barrier point.
    ``extra_threads`` run alongside the workers (e.g. a main thread writing a
    configuration global) and are not counted in the assertion.
    """
    if n_threads < 1:
        raise ValueError("n_threads must be >= 1")
    if numa_map is None:
        numa = default_numa(n_threads)
    elif isinstance(numa_map, Mapping):
        numa = tuple(numa_map.get(i, i % 2) for i in range(n_threads))
    else:
        numa = tuple(numa_map)
        if len(numa) != n_threads:
            raise ValueError("numa map length must equal n_threads")
    points = PointTable()
    threads = []
    for tid in range(n_threads):
        b = CodeBuilder(points, tid=tid)
        me = b.mov(f"&{node_name}{tid}", dst="%me")
        lock_entry(b, me)
        with b.func("client"):
            old = b.load("v", Mode.RLX, "client.c:v++", point=False, dst="%v")
            new = b.compute("add", old, 1, dst="%v1")
            b.store("v", new, Mode.RLX, "client.c:v++", point=False)
        unlock_entry(b, me)
        threads.append(Thread(tid, b.finish()))
    for k, extra in enumerate(extra_threads):
        b = CodeBuilder(points, tid=n_threads + k)
        extra(b)
        threads.append(Thread(n_threads + k, b.finish()))
    objects = list(lock_objects) + [
        ObjectDecl(f"{node_name}{tid}", tuple(node_fields(tid, numa[tid]))) for tid in range(n_threads)
    ]
    return Program(
        globals=(("v", Const(0)),) + tuple(extra_globals),
        objects=tuple(objects),
        points=tuple(points.decls),
        threads=tuple(threads),
        assertions=(Assertion("v", n_threads),),
        numa=numa + tuple(0 for _ in extra_threads),
        name=name,
        notes=tuple(notes),
    )


def straight_line(threads: Sequence[Callable[[CodeBuilder], None]], *,
                  globals_: Sequence[tuple[str, int]] = (), name: str = "",
                  assertions: Sequence[Assertion] = ()) -> Program:
    """Small multi-threaded program over integer globals (litmus style)."""
    points = PointTable()
    code = []
    for tid, body in enumerate(threads):
        b = CodeBuilder(points, tid=tid)
        with b.func(f"T{tid}"):
            body(b)
        code.append(Thread(tid, b.finish()))
    return Program(
        globals=tuple((g, Const(v)) for g, v in globals_),
        points=tuple(points.decls),
        threads=tuple(code),
        assertions=tuple(assertions),
        name=name,
    )


__all__ = [
    "CodeBuilder",
    "LockTemplate",
    "PointTable",
    "build_client",
    "default_numa",
    "straight_line",
]
