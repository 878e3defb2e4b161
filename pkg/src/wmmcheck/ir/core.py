"""Program representation: modes, locations, instructions, programs.

Everything here is immutable. Programs are built once (by hand, by the
client builder, or by the text parser) and then shared freely between the
engine, the checker and the optimizer.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence, Union


class Mode(enum.Enum):
    RLX = "rlx"
    ACQ = "acq"
    REL = "rel"
    SC = "sc"

    def __le__(self, other: "Mode") -> bool:  # type: ignore[override]
        return other in _UP[self]

    def __lt__(self, other: "Mode") -> bool:  # type: ignore[override]
        return self is not other and self <= other

    def __ge__(self, other: "Mode") -> bool:  # type: ignore[override]
        return other <= self

    def __gt__(self, other: "Mode") -> bool:  # type: ignore[override]
        return other < self

    @property
    def acquires(self) -> bool:
        return self is Mode.ACQ or self is Mode.SC

    @property
    def releases(self) -> bool:
        return self is Mode.REL or self is Mode.SC


# modes at or above each mode
_UP = {
    Mode.RLX: frozenset(Mode),
    Mode.ACQ: frozenset({Mode.ACQ, Mode.SC}),
    Mode.REL: frozenset({Mode.REL, Mode.SC}),
    Mode.SC: frozenset({Mode.SC}),
}

# weakest first; ACQ before REL for read-modify-writes and fences
MODE_ORDER = (Mode.RLX, Mode.ACQ, Mode.REL, Mode.SC)


class OpKind(enum.Enum):
    LOAD = "load"
    STORE = "store"
    RMW = "rmw"
    FENCE = "fence"
    AWAIT = "await"


VALID_MODES: dict[OpKind, tuple[Mode, ...]] = {
    OpKind.LOAD: (Mode.RLX, Mode.ACQ, Mode.SC),
    OpKind.STORE: (Mode.RLX, Mode.REL, Mode.SC),
    OpKind.RMW: MODE_ORDER,
    OpKind.FENCE: MODE_ORDER,
    OpKind.AWAIT: (Mode.RLX, Mode.ACQ, Mode.SC),
}


def valid_modes(kind: OpKind) -> tuple[Mode, ...]:
    return VALID_MODES[kind]


def one_step_down(kind: OpKind, mode: Mode) -> tuple[Mode, ...]:
    """Modes directly below ``mode`` in the lattice restricted to ``kind``."""
    valid = VALID_MODES[kind]
    below = [m for m in valid if m < mode]
    return tuple(
        m for m in below if not any(m < other for other in below)
    )


# ---------------------------------------------------------------------------
# Operands and locations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Reg:
    name: str

    def __str__(self) -> str:
        return f"%{self.name}"


@dataclass(frozen=True)
class Const:
    value: int

    def __str__(self) -> str:
        return str(self.value)


@dataclass(frozen=True)
class NullRef:
    def __str__(self) -> str:
        return "null"


NULL = NullRef()


@dataclass(frozen=True)
class ObjRef:
    """Reference to a declared object, written ``&name``."""

    name: str

    def __str__(self) -> str:
        return f"&{self.name}"


Operand = Union[Reg, Const, NullRef, ObjRef]
# Initial values of cells: integers, null, or object references.
Value = Union[Const, NullRef, ObjRef]


@dataclass(frozen=True)
class Loc:
    """A shared location: ``base.field`` or, with ``base=None``, a global."""

    base: Union[Reg, "ObjName", None]
    field: str

    def __str__(self) -> str:
        if self.base is None:
            return self.field
        return f"{self.base}.{self.field}"


@dataclass(frozen=True)
class ObjName:
    """A statically named object used as a location base (``lock.tail``)."""

    name: str

    def __str__(self) -> str:
        return self.name


# ---------------------------------------------------------------------------
# Instructions
# ---------------------------------------------------------------------------


class FenceKind(enum.Enum):
    FULL = "full"
    WW = "ww"
    COMPILER = "compiler"


@dataclass(frozen=True)
class Load:
    dst: str
    loc: Loc
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None


@dataclass(frozen=True)
class Store:
    loc: Loc
    value: Operand
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None


@dataclass(frozen=True)
class Swap:
    dst: str
    loc: Loc
    value: Operand
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None


@dataclass(frozen=True)
class Cas:
    dst: str
    loc: Loc
    expected: Operand
    desired: Operand
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None
    returns_flag: bool = False


@dataclass(frozen=True)
class AwaitCas:
    """Spin until the CAS succeeds; commits as a single successful rmw."""

    dst: str
    loc: Loc
    expected: Operand
    desired: Operand
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None


class Pred(enum.Enum):
    NONZERO = "!= 0"
    ZERO = "== 0"
    EQ = "=="


@dataclass(frozen=True)
class Await:
    dst: str
    loc: Loc
    pred: Pred
    arg: Operand | None = None
    mode: Mode = Mode.RLX
    point: int | None = None
    tag: str | None = None


@dataclass(frozen=True)
class Fence:
    kind: FenceKind
    mode: Mode = Mode.SC
    point: int | None = None
    tag: str | None = None


COMPUTE_OPS = {
    "mov": 1,
    "not": 1,
    "add": 2,
    "sub": 2,
    "eq": 2,
    "ne": 2,
    "gt": 2,
    "lt": 2,
    "ge": 2,
    "le": 2,
    "and": 2,
    "or": 2,
}


@dataclass(frozen=True)
class Compute:
    dst: str
    op: str
    args: tuple[Operand, ...]


@dataclass(frozen=True)
class Branch:
    """Jump to ``then`` when ``cond`` is non-zero, else to ``orelse``."""

    cond: Operand
    then: str
    orelse: str


@dataclass(frozen=True)
class Jump:
    target: str


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class Nondet:
    dst: str


@dataclass(frozen=True)
class NumaNode:
    dst: str


@dataclass(frozen=True)
class Return:
    pass


Instruction = Union[
    Load, Store, Swap, Cas, AwaitCas, Await, Fence, Compute, Branch, Jump,
    Label, Nondet, NumaNode, Return,
]

MEMORY_OPS = (Load, Store, Swap, Cas, AwaitCas, Await)
MODED_OPS = MEMORY_OPS + (Fence,)


def op_kind(ins: Instruction) -> OpKind | None:
    if isinstance(ins, Load):
        return OpKind.LOAD
    if isinstance(ins, Store):
        return OpKind.STORE
    if isinstance(ins, (Swap, Cas, AwaitCas)):
        return OpKind.RMW
    if isinstance(ins, Await):
        return OpKind.AWAIT
    if isinstance(ins, Fence):
        return OpKind.FENCE
    return None


def reads_of(ins: Instruction) -> tuple[str, ...]:
    """Register names read by an instruction."""
    ops: list[object] = []
    loc = getattr(ins, "loc", None)
    if loc is not None:
        ops.append(loc.base)
    if isinstance(ins, (Store, Swap)):
        ops.append(ins.value)
    elif isinstance(ins, (Cas, AwaitCas)):
        ops += [ins.expected, ins.desired]
    elif isinstance(ins, Await):
        ops.append(ins.arg)
    elif isinstance(ins, Compute):
        ops += list(ins.args)
    elif isinstance(ins, Branch):
        ops.append(ins.cond)
    return tuple(o.name for o in ops if isinstance(o, Reg))


def writes_of(ins: Instruction) -> str | None:
    return getattr(ins, "dst", None)


# ---------------------------------------------------------------------------
# Program
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectDecl:
    name: str
    fields: tuple[tuple[str, Value], ...]


@dataclass(frozen=True)
class PointDecl:
    id: int
    kind: OpKind
    function: str
    source_tag: str
    snippet: str = ""


@dataclass(frozen=True)
class Thread:
    tid: int
    code: tuple[Instruction, ...]


@dataclass(frozen=True)
class Assertion:
    """``global == value``; a program's final assertion is a conjunction."""

    name: str
    value: int


@dataclass(frozen=True)
class Program:
    globals: tuple[tuple[str, Value], ...] = ()
    objects: tuple[ObjectDecl, ...] = ()
    points: tuple[PointDecl, ...] = ()
    threads: tuple[Thread, ...] = ()
    assertions: tuple[Assertion, ...] = ()
    numa: tuple[int, ...] = ()
    name: str = ""
    notes: tuple[str, ...] = ()

    def numa_of(self, tid: int) -> int:
        for i, t in enumerate(self.threads):
            if t.tid == tid and i < len(self.numa):
                return self.numa[i]
        return tid % 2


@dataclass(frozen=True)
class BarrierPoint:
    id: int
    source_tag: str
    op_kind: OpKind
    mode: Mode
    function: str = ""
    snippet: str = ""


@dataclass(frozen=True)
class Assignment:
    modes: tuple[Mode, ...]

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __getitem__(self, i: int) -> Mode:
        return self.modes[i]

    def with_mode(self, i: int, mode: Mode) -> "Assignment":
        modes = list(self.modes)
        modes[i] = mode
        return Assignment(tuple(modes))


# ---------------------------------------------------------------------------
# Operations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    thread: int | None
    index: int | None
    rule: str
    message: str

    def __str__(self) -> str:
        where = "program"
        if self.thread is not None:
            where = f"thread {self.thread}"
            if self.index is not None:
                where += f" #{self.index}"
        return f"{where}: {self.rule}: {self.message}"


def _successors(code: Sequence[Instruction], labels: dict[str, int], i: int) -> list[int]:
    ins = code[i]
    if isinstance(ins, Return):
        return []
    if isinstance(ins, Jump):
        return [labels[ins.target]] if ins.target in labels else []
    if isinstance(ins, Branch):
        return [labels[t] for t in (ins.then, ins.orelse) if t in labels]
    return [i + 1] if i + 1 < len(code) else []


def _check_defs(tid: int, code: Sequence[Instruction], labels: dict[str, int]) -> list[Diagnostic]:
    """Must-defined analysis: every register read is assigned on all paths."""
    everything = frozenset(r for ins in code for r in (writes_of(ins),) if r)
    defined_in: list[frozenset[str] | None] = [None] * len(code)
    if not code:
        return []
    defined_in[0] = frozenset()
    work = [0]
    while work:
        i = work.pop()
        cur = defined_in[i]
        assert cur is not None
        out = cur | {writes_of(code[i])} - {None}
        for s in _successors(code, labels, i):
            prev = defined_in[s]
            new = out if prev is None else prev & out
            if prev is None or new != prev:
                defined_in[s] = frozenset(new)
                work.append(s)
    diags = []
    for i, ins in enumerate(code):
        known = defined_in[i]
        if known is None:
            continue  # unreachable
        for r in reads_of(ins):
            if r not in known:
                why = "never assigned" if r not in everything else "not assigned on every path"
                diags.append(Diagnostic(tid, i, "use-before-def", f"register %{r} {why}"))
    return diags


def validate(program: Program) -> list[Diagnostic]:
    """Static checks; returns an empty list for a well-formed program."""
    diags: list[Diagnostic] = []
    if not program.threads:
        diags.append(Diagnostic(None, None, "no-threads", "program has no threads"))
    globals_ = {name for name, _ in program.globals}
    objects = {o.name: {f for f, _ in o.fields} for o in program.objects}
    points = {p.id: p for p in program.points}
    if len(points) != len(program.points):
        diags.append(Diagnostic(None, None, "duplicate-point", "barrier point ids are not unique"))
    for a in program.assertions:
        if a.name not in globals_:
            diags.append(Diagnostic(None, None, "unknown-global", f"assertion names undeclared global {a.name}"))
    for _, init in program.globals:
        if isinstance(init, ObjRef) and init.name not in objects:
            diags.append(Diagnostic(None, None, "unknown-object", f"initializer references {init.name}"))
    all_fields = set().union(*objects.values()) if objects else set()
    tids = [t.tid for t in program.threads]
    if len(set(tids)) != len(tids):
        diags.append(Diagnostic(None, None, "duplicate-thread", "thread ids are not unique"))
    point_modes: dict[int, Mode] = {}
    used_points: set[int] = set()

    for t in program.threads:
        labels: dict[str, int] = {}
        for i, ins in enumerate(t.code):
            if isinstance(ins, Label):
                if ins.name in labels:
                    diags.append(Diagnostic(t.tid, i, "duplicate-label", ins.name))
                labels[ins.name] = i
        for i, ins in enumerate(t.code):
            if isinstance(ins, (Jump, Branch)):
                targets = (ins.target,) if isinstance(ins, Jump) else (ins.then, ins.orelse)
                for target in targets:
                    if target not in labels:
                        diags.append(Diagnostic(t.tid, i, "unknown-label", target))
            if isinstance(ins, Compute) and COMPUTE_OPS.get(ins.op) != len(ins.args):
                diags.append(Diagnostic(t.tid, i, "bad-compute", f"{ins.op}/{len(ins.args)}"))
            loc = getattr(ins, "loc", None)
            if loc is not None:
                if loc.base is None and loc.field not in globals_:
                    diags.append(Diagnostic(t.tid, i, "unknown-location", f"undeclared global {loc.field}"))
                elif isinstance(loc.base, ObjName):
                    if loc.base.name not in objects:
                        diags.append(Diagnostic(t.tid, i, "unknown-location", f"undeclared object {loc.base.name}"))
                    elif loc.field not in objects[loc.base.name]:
                        diags.append(Diagnostic(t.tid, i, "unknown-location", f"{loc.base.name} has no field {loc.field}"))
                elif isinstance(loc.base, Reg) and loc.field not in all_fields:
                    diags.append(Diagnostic(t.tid, i, "unknown-location", f"no object declares field {loc.field}"))
            for opnd in _operands(ins):
                if isinstance(opnd, ObjRef) and opnd.name not in objects:
                    diags.append(Diagnostic(t.tid, i, "unknown-object", opnd.name))
            kind = op_kind(ins)
            if kind is not None:
                mode = ins.mode  # type: ignore[union-attr]
                if mode not in VALID_MODES[kind]:
                    diags.append(Diagnostic(t.tid, i, "invalid-mode", f"invalid mode for op-kind: {mode.value} on {kind.value}"))
                p = ins.point  # type: ignore[union-attr]
                if p is not None:
                    used_points.add(p)
                    decl = points.get(p)
                    if decl is None:
                        diags.append(Diagnostic(t.tid, i, "unknown-point", f"#{p}"))
                    else:
                        if decl.kind is not kind:
                            diags.append(Diagnostic(t.tid, i, "point-kind", f"#{p} declared {decl.kind.value}, used as {kind.value}"))
                        if isinstance(ins, Fence) and ins.kind is not FenceKind.FULL:
                            diags.append(Diagnostic(t.tid, i, "fixed-fence-point", f"#{p} on a {ins.kind.value} fence"))
                        seen = point_modes.setdefault(p, mode)
                        if seen is not mode:
                            diags.append(Diagnostic(t.tid, i, "point-mode", f"#{p} used with modes {seen.value} and {mode.value}"))
        diags += _check_defs(t.tid, t.code, labels)
        if t.code and not any(isinstance(ins, Return) for ins in t.code):
            diags.append(Diagnostic(t.tid, None, "no-return", "thread never returns"))
    for p in points:
        if p not in used_points:
            diags.append(Diagnostic(None, None, "unused-point", f"#{p} is declared but never used"))
    return diags


def _operands(ins: Instruction) -> Iterable[object]:
    if isinstance(ins, (Store, Swap)):
        yield ins.value
    elif isinstance(ins, (Cas, AwaitCas)):
        yield ins.expected
        yield ins.desired
    elif isinstance(ins, Await) and ins.arg is not None:
        yield ins.arg
    elif isinstance(ins, Compute):
        yield from ins.args
    elif isinstance(ins, Branch):
        yield ins.cond


def list_barrier_points(program: Program) -> tuple[BarrierPoint, ...]:
    """Optimizer-visible barrier points in declaration order."""
    modes: dict[int, Mode] = {}
    for t in program.threads:
        for ins in t.code:
            p = getattr(ins, "point", None)
            if p is not None and p not in modes:
                modes[p] = ins.mode  # type: ignore[union-attr]
    out = []
    for decl in program.points:
        if decl.id not in modes:
            continue
        out.append(BarrierPoint(decl.id, decl.source_tag, decl.kind, modes[decl.id], decl.function, decl.snippet))
    return tuple(out)


def current_assignment(program: Program) -> Assignment:
    return Assignment(tuple(p.mode for p in list_barrier_points(program)))


def uniform_assignment(program: Program, mode: Mode = Mode.SC) -> Assignment:
    """Every point at ``mode``, clamped to the strongest valid mode below it."""
    modes = []
    for p in list_barrier_points(program):
        valid = [m for m in VALID_MODES[p.op_kind] if m <= mode]
        modes.append(valid[-1] if valid else Mode.RLX)
    return Assignment(tuple(modes))


class AssignmentError(ValueError):
    pass


def apply_assignment(program: Program, assignment: Assignment | Sequence[Mode]) -> Program:
    points = list_barrier_points(program)
    modes = tuple(assignment)
    if len(modes) != len(points):
        raise AssignmentError(f"assignment has {len(modes)} modes, program has {len(points)} barrier points")
    by_id: dict[int, Mode] = {}
    for p, m in zip(points, modes):
        if m not in VALID_MODES[p.op_kind]:
            raise AssignmentError(f"invalid mode {m.value} for {p.op_kind.value} point #{p.id} ({p.source_tag})")
        by_id[p.id] = m
    threads = []
    for t in program.threads:
        code = tuple(
            replace(ins, mode=by_id[ins.point])  # type: ignore[union-attr,call-arg]
            if getattr(ins, "point", None) in by_id else ins
            for ins in t.code
        )
        threads.append(Thread(t.tid, code))
    return replace(program, threads=tuple(threads))


def assignment_by_tag(program: Program, modes: Mapping[str | tuple[str, str], Mode],
                      default: Mode = Mode.RLX) -> Assignment:
    """Build an assignment from a map keyed by source tag or ``(function, tag-or-snippet)``.

    Points not named get ``default``.
    """
    out = []
    for p in list_barrier_points(program):
        m = modes.get((p.function, p.source_tag), modes.get((p.function, p.snippet), modes.get(p.source_tag, default)))
        out.append(m)
    return Assignment(tuple(out))
