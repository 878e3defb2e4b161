"""Exhaustive exploration of a program under an operational weak memory model.

The model commits one memory event at a time into a single global order
(multi-copy atomic). Each thread fetches instructions into a window of
pending instances and may commit them out of program order unless a
preserved-program-order rule forbids it:

* R1 same location (aliasing is resolved once both addresses are known);
* R2 an acquire (ACQ/SC load, rmw or await, or a full fence) orders
  everything after it;
* R3 a release (REL/SC store or rmw, or a full fence) is ordered after
  everything before it;
* R4 two SC accesses stay in order;
* R5 data and address dependencies;
* R6 a write after a branch waits for the loads feeding that branch (an
  await counts as a load feeding its own loop branch);
* R7 a write-write fence orders the writes around it.

Reads after an unresolved branch may be fetched speculatively on a guessed
path; the guess is checked when the condition resolves and wrong guesses are
discarded. Local computation, branches and fences never touch memory and are
retired eagerly as soon as their inputs are available.

``model="sc"`` commits strictly in program order and serves as the
sequentially consistent reference.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .ir.core import (
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
    Mode,
    Nondet,
    NullRef,
    NumaNode,
    ObjName,
    ObjRef,
    Pred,
    Program,
    Reg,
    Return,
    Store,
    Swap,
    op_kind,
    reads_of,
    validate,
    writes_of,
)

REF_BASE = 1 << 40

# window entry kinds
K_LOAD, K_STORE, K_SWAP, K_CAS, K_CASOK, K_AWAIT, K_AWAITCAS, K_FFULL, K_FWW, K_LOCAL, K_BRANCH = range(11)
_MEMORY_KINDS = frozenset({K_LOAD, K_STORE, K_SWAP, K_CAS, K_CASOK, K_AWAIT, K_AWAITCAS})

# entry flags
F_R, F_W, F_ACQ, F_REL, F_SC, F_SPEC = 1, 2, 4, 8, 16, 32

# entry tuple slots
E_KIND, E_INS, E_LOC, E_A, E_B, E_MASK, E_FLAGS, E_FIELD, E_EXTRA = range(9)

MAX_WINDOW = 48


class EngineError(RuntimeError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    model: str = "weak"  # "weak" | "sc"
    speculation: bool = True
    speculation_depth: int = 1
    max_steps: int = 100_000
    timeout: float | None = None
    state_caching: bool = False
    check_coherence: bool = True

    def __post_init__(self) -> None:
        if self.model not in ("weak", "sc"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")
        if self.speculation_depth < 0:
            raise ValueError("speculation_depth must be >= 0")


@dataclass(frozen=True)
class Event:
    thread: int
    instance: tuple[int, int]
    kind: str  # read | write | rmw | fence
    location: str | None
    value_read: object
    value_written: object
    mode: Mode
    tag: str = ""


@dataclass
class ExecutionTrace:
    commit_order: tuple[Event, ...]
    final_globals: dict[str, object]
    blocked_awaits: frozenset[tuple[int, tuple[int, int]]] = frozenset()
    final_memory: dict[str, object] = field(default_factory=dict)
    error: str | None = None
    cycle: bool = False

    @property
    def complete(self) -> bool:
        return not self.blocked_awaits and self.error is None and not self.cycle

    @property
    def blocked(self) -> bool:
        return bool(self.blocked_awaits) or self.cycle


@dataclass
class ExplorationSummary:
    executions_visited: int = 0
    blocked_executions: int = 0
    error_executions: int = 0
    hit_timeout: bool = False
    stopped: bool = False
    states: int = 0
    pruned: int = 0
    diagnostics: list[str] = field(default_factory=list)

    @property
    def step_bound_hits(self) -> int:
        return sum(1 for d in self.diagnostics if d.startswith("max-steps"))


Visitor = Callable[[ExecutionTrace], object]


# ---------------------------------------------------------------------------
# compilation
# ---------------------------------------------------------------------------


class _CIns:
    __slots__ = ("op", "src", "dst", "base_reg", "base_loc", "field", "a", "b", "kind", "flags",
                 "target", "target2", "fn", "args", "pred", "mode")

    def __init__(self, op: str, src: Instruction):
        self.op = op
        self.src = src
        self.dst = -1
        self.base_reg = -1
        self.base_loc = -1
        self.field = -1
        self.a = None
        self.b = None
        self.kind = -1
        self.flags = 0
        self.target = -1
        self.target2 = -1
        self.fn = None
        self.args = ()
        self.pred = None
        self.mode = Mode.RLX


def _fn_table():
    def truth(x):
        return 1 if x else 0

    return {
        "mov": lambda x: x,
        "not": lambda x: truth(not x),
        "add": lambda x, y: x + y,
        "sub": lambda x, y: x - y,
        "eq": lambda x, y: truth(x == y),
        "ne": lambda x, y: truth(x != y),
        "gt": lambda x, y: truth(x > y),
        "lt": lambda x, y: truth(x < y),
        "ge": lambda x, y: truth(x >= y),
        "le": lambda x, y: truth(x <= y),
        "and": lambda x, y: truth(x and y),
        "or": lambda x, y: truth(x or y),
    }


_FNS = _fn_table()


class Compiled:
    """A program lowered to integer-indexed tables for the explorer."""

    def __init__(self, program: Program):
        self.program = program
        self.obj_names = [o.name for o in program.objects]
        obj_index = {n: i for i, n in enumerate(self.obj_names)}
        self.field_ids: dict[str, int] = {}
        self.loc_names: list[str] = []
        self.loc_index: dict[tuple[int, int], int] = {}
        init: list[int] = []

        def fid(name: str) -> int:
            return self.field_ids.setdefault(name, len(self.field_ids))

        def value(v) -> int:
            if isinstance(v, Const):
                return v.value
            if isinstance(v, NullRef):
                return 0
            if isinstance(v, ObjRef):
                return REF_BASE + obj_index[v.name]
            raise EngineError(f"bad value {v!r}")

        self._value = value
        self.global_locs: dict[str, int] = {}
        for name, v in program.globals:
            key = (-1, fid(name))
            self.loc_index[key] = len(self.loc_names)
            self.global_locs[name] = len(self.loc_names)
            self.loc_names.append(name)
            init.append(value(v))
        for i, o in enumerate(program.objects):
            for fname, v in o.fields:
                self.loc_index[(i, fid(fname))] = len(self.loc_names)
                self.loc_names.append(f"{o.name}.{fname}")
                init.append(value(v))
        self.init_mem = tuple(init)
        self.tids = [t.tid for t in program.threads]
        self.numa = [program.numa_of(t.tid) for t in program.threads]
        self.threads: list[list[_CIns]] = []
        self.reg_names: list[list[str]] = []
        self.dead: list[list[tuple[int, ...]]] = []
        for t in program.threads:
            code, names, dead = self._compile_thread(t.code, obj_index, fid, value)
            self.threads.append(code)
            self.reg_names.append(names)
            self.dead.append(dead)

    def loc_of(self, ref: int, field_id: int) -> int:
        """Location id of ``ref.field``; -1 when ``ref`` is not a valid object."""
        return self.loc_index.get((ref - REF_BASE, field_id), -1) if ref >= REF_BASE else -1

    def show(self, v: object) -> str:
        if isinstance(v, int) and v >= REF_BASE:
            i = v - REF_BASE
            if i < len(self.obj_names):
                return "&" + self.obj_names[i]
        if isinstance(v, tuple):
            return "?"
        return str(v)

    def _compile_thread(self, code: Sequence[Instruction], obj_index, fid, value):
        labels = {ins.name: i for i, ins in enumerate(code) if isinstance(ins, Label)}
        color, ncolors, live = _allocate(code, labels)

        def r(name: str) -> int:
            return color[name]

        def opnd(o):
            if o is None:
                return None
            if isinstance(o, Reg):
                return (1, r(o.name))
            return (0, value(o))

        out: list[_CIns] = []
        for ins in code:
            c: _CIns
            if isinstance(ins, Label):
                c = _CIns("label", ins)
            elif isinstance(ins, Jump):
                c = _CIns("jump", ins)
                c.target = labels[ins.target]
            elif isinstance(ins, Branch):
                c = _CIns("branch", ins)
                c.a = opnd(ins.cond)
                c.target = labels[ins.then]
                c.target2 = labels[ins.orelse]
            elif isinstance(ins, Return):
                c = _CIns("ret", ins)
            elif isinstance(ins, Nondet):
                c = _CIns("nondet", ins)
                c.dst = r(ins.dst)
            elif isinstance(ins, NumaNode):
                c = _CIns("numa", ins)
                c.dst = r(ins.dst)
            elif isinstance(ins, Compute):
                c = _CIns("compute", ins)
                c.dst = r(ins.dst)
                c.fn = _FNS[ins.op]
                c.args = tuple(opnd(a) for a in ins.args)
            elif isinstance(ins, Fence):
                if ins.kind is FenceKind.COMPILER or ins.mode is Mode.RLX:
                    c = _CIns("label", ins)  # no-op in the hardware model
                else:
                    c = _CIns("mem", ins)
                    c.mode = ins.mode
                    if ins.kind is FenceKind.WW:
                        c.kind = K_FWW
                    else:
                        c.kind = K_FFULL
                        # acquire fences order later accesses, release fences earlier ones
                        c.flags = (F_ACQ if ins.mode.acquires else 0) | (F_REL if ins.mode.releases else 0) \
                            | (F_SC if ins.mode is Mode.SC else 0)
            else:
                c = _CIns("mem", ins)
                c.mode = ins.mode
                loc = ins.loc
                c.field = fid(loc.field)
                if loc.base is None:
                    c.base_loc = self.loc_index.get((-1, c.field), -1)
                elif isinstance(loc.base, ObjName):
                    c.base_loc = self.loc_index.get((obj_index[loc.base.name], c.field), -1)
                else:
                    c.base_reg = r(loc.base.name)
                if isinstance(ins, Load):
                    c.kind, c.flags = K_LOAD, F_R
                elif isinstance(ins, Store):
                    c.kind, c.flags = K_STORE, F_W
                    c.a = opnd(ins.value)
                elif isinstance(ins, Swap):
                    c.kind, c.flags = K_SWAP, F_R | F_W
                    c.a = opnd(ins.value)
                elif isinstance(ins, Cas):
                    c.kind = K_CASOK if ins.returns_flag else K_CAS
                    c.flags = F_R | F_W
                    c.a, c.b = opnd(ins.expected), opnd(ins.desired)
                elif isinstance(ins, AwaitCas):
                    c.kind, c.flags = K_AWAITCAS, F_R | F_W | F_SPEC
                    c.a, c.b = opnd(ins.expected), opnd(ins.desired)
                elif isinstance(ins, Await):
                    c.kind, c.flags = K_AWAIT, F_R | F_SPEC
                    c.pred = ins.pred
                    c.a = opnd(ins.arg) if ins.pred is Pred.EQ else (0, 0)
                else:  # pragma: no cover
                    raise EngineError(f"unsupported instruction {ins!r}")
                m = ins.mode
                if m.acquires and c.flags & F_R:
                    c.flags |= F_ACQ
                if m.releases and c.flags & F_W:
                    c.flags |= F_REL
                if m is Mode.SC:
                    c.flags |= F_SC
            if hasattr(ins, "dst") and c.dst < 0 and writes_of(ins):
                c.dst = r(ins.dst)
            out.append(c)
        names = [""] * ncolors
        for n, i in sorted(color.items()):
            names[i] = f"{names[i]}/{n}" if names[i] else n
        dead = [tuple(c for c in range(ncolors) if c not in {color[x] for x in live[i]})
                for i in range(len(code))]
        return out, names, dead


def _allocate(code: Sequence[Instruction], labels: dict[str, int]):
    """Liveness plus greedy interference coloring of a thread's registers."""
    n = len(code)
    succ: list[list[int]] = []
    for i, ins in enumerate(code):
        if isinstance(ins, Return):
            succ.append([])
        elif isinstance(ins, Jump):
            succ.append([labels[ins.target]])
        elif isinstance(ins, Branch):
            succ.append([labels[ins.then], labels[ins.orelse]])
        else:
            succ.append([i + 1] if i + 1 < n else [])
    use = [set(reads_of(ins)) for ins in code]
    defs = [writes_of(ins) for ins in code]
    live: list[set[str]] = [set() for _ in range(n)]
    changed = True
    while changed:
        changed = False
        for i in range(n - 1, -1, -1):
            out: set[str] = set()
            for s_ in succ[i]:
                out |= live[s_]
            new = use[i] | (out - {defs[i]})
            if new != live[i]:
                live[i] = new
                changed = True
    names: list[str] = []
    for i, ins in enumerate(code):
        for x in list(reads_of(ins)) + [defs[i]]:
            if x is not None and x not in names:
                names.append(x)
    adj: dict[str, set[str]] = {x: set() for x in names}
    for i in range(n):
        d = defs[i]
        out = set()
        for s_ in succ[i]:
            out |= live[s_]
        if d is not None:
            for x in out:
                if x != d:
                    adj[d].add(x)
                    adj[x].add(d)
        for x in live[i]:
            for y in live[i]:
                if x != y:
                    adj[x].add(y)
    color: dict[str, int] = {}
    for x in names:
        taken = {color[y] for y in adj[x] if y in color}
        c = 0
        while c in taken:
            c += 1
        color[x] = c
    ncolors = max(color.values()) + 1 if color else 0
    return color, ncolors, live


# ---------------------------------------------------------------------------
# thread-state manipulation
# ---------------------------------------------------------------------------

# A thread state is (pc, regs, window); pc == -1 once ``ret`` was fetched.
# Register values and entry operands are ints, or (j,) for "the result of
# pending window entry j".


def _shift_mask(mask: int, i: int) -> int:
    low = mask & ((1 << i) - 1)
    return low | ((mask >> (i + 1)) << i)


def _subst(v, i: int, val):
    if type(v) is tuple:
        j = v[0]
        if j == i:
            return val
        if j > i:
            return (j - 1,)
    return v


class _Explorer:
    def __init__(self, program: Program, config: EngineConfig, compiled: Compiled | None = None):
        self.program = program
        self.config = config
        self.c = compiled or Compiled(program)
        self.sc = config.model == "sc"
        self.max_spec = config.speculation_depth if (config.speculation and not self.sc) else 0
        self.pruned = 0
        self.errors: list[str] = []
        self._cand_cache: dict = {}
        self._ts_ids: dict = {}
        self._ts: list[tuple] = []
        self._next_cache: dict = {}

    # -- removing a committed entry --------------------------------------
    def _retire(self, regs: tuple, win: tuple, i: int, val) -> tuple[tuple, tuple]:
        """Drop entry i from the window, forwarding its value to dependents."""
        c = self.c
        new_regs = regs
        for v in regs:
            if type(v) is tuple and v[0] >= i:
                new_regs = tuple(_subst(x, i, val) for x in regs)
                break
        out = list(win[:i])
        for e in win[i + 1:]:
            kind = e[E_KIND]
            loc = e[E_LOC]
            if type(loc) is tuple:
                j = loc[0]
                if j == i:
                    loc = c.loc_of(val, e[E_FIELD])
                elif j > i:
                    loc = (j - 1,)
            a = _subst(e[E_A], i, val)
            b = _subst(e[E_B], i, val)
            extra = e[E_EXTRA]
            if kind == K_LOCAL:
                extra = (extra[0], tuple(_subst(x, i, val) for x in extra[1]))
            out.append((kind, e[E_INS], loc, a, b, _shift_mask(e[E_MASK], i), e[E_FLAGS], e[E_FIELD], extra))
        return new_regs, tuple(out)

    # -- fetch & eager retirement ----------------------------------------
    def normalize(self, t: int, pc: int, regs: tuple, win: tuple) -> list[tuple]:
        """Retire invisible entries and fetch as far as allowed; may fork."""
        code = self.c.threads[t]
        results: list[tuple] = []
        work = [(pc, regs, win)]
        budget = 100_000
        while work:
            pc, regs, win = work.pop()
            alive = True
            while True:
                budget -= 1
                if budget < 0:
                    raise EngineError("local computation does not terminate")
                # eager retirement of entries that never touch memory
                i = 0
                while i < len(win):
                    e = win[i]
                    kind = e[E_KIND]
                    if kind >= K_FFULL and e[E_MASK] == 0:
                        if kind == K_BRANCH:
                            cond = e[E_A]
                            if (1 if cond else 0) != e[E_EXTRA]:
                                alive = False
                                break
                            regs, win = self._retire(regs, win, i, 0)
                        elif kind == K_LOCAL:
                            fn, args = e[E_EXTRA]
                            val = fn(*args)
                            regs, win = self._retire(regs, win, i, val)
                        else:
                            regs, win = self._retire(regs, win, i, 0)
                        i = 0
                        continue
                    i += 1
                if not alive:
                    self.pruned += 1
                    break
                # can we fetch?
                if pc < 0 or len(win) >= MAX_WINDOW:
                    break
                spec = 0
                stop = False
                for e in win:
                    fl = e[E_FLAGS]
                    if fl & F_ACQ or (self.sc and e[E_KIND] in _MEMORY_KINDS):
                        stop = True
                        break
                    if fl & F_SPEC:
                        spec += 1
                if stop or spec > self.max_spec:
                    break
                ins = code[pc]
                op = ins.op
                if op == "label":
                    pc += 1
                elif op == "jump":
                    pc = ins.target
                elif op == "ret":
                    pc = -1
                elif op == "numa":
                    regs = regs[:ins.dst] + (self.c.numa[t],) + regs[ins.dst + 1:]
                    pc += 1
                elif op == "nondet":
                    work.append((pc + 1, regs[:ins.dst] + (1,) + regs[ins.dst + 1:], win))
                    regs = regs[:ins.dst] + (0,) + regs[ins.dst + 1:]
                    pc += 1
                elif op == "compute":
                    args = tuple(x if k == 0 else regs[x] for k, x in ins.args)
                    deps = 0
                    for v in args:
                        if type(v) is tuple:
                            deps |= 1 << v[0]
                    if deps:
                        k = len(win)
                        win = win + ((K_LOCAL, pc, -1, None, None, deps, 0, -1, (ins.fn, args)),)
                        val = (k,)
                    else:
                        val = ins.fn(*args)
                    regs = regs[:ins.dst] + (val,) + regs[ins.dst + 1:]
                    pc += 1
                elif op == "branch":
                    k, x = ins.a
                    cond = x if k == 0 else regs[x]
                    if type(cond) is not tuple:
                        pc = ins.target if cond else ins.target2
                    elif spec + 1 <= self.max_spec:
                        k = len(win)
                        mask = 1 << cond[0]
                        w_taken = win + ((K_BRANCH, pc, -1, cond, None, mask, F_SPEC, -1, 1),)
                        w_not = win + ((K_BRANCH, pc, -1, cond, None, mask, F_SPEC, -1, 0),)
                        work.append((ins.target2, regs, w_not))
                        pc, win = ins.target, w_taken
                    else:
                        break
                else:  # memory access or fence
                    win = win + (self._fetch_entry(ins, pc, regs, win),)
                    if ins.dst >= 0:
                        regs = regs[:ins.dst] + ((len(win) - 1,),) + regs[ins.dst + 1:]
                    pc += 1
            if alive:
                if pc < 0:
                    if any(regs):
                        regs = (0,) * len(regs)
                else:
                    lst = None
                    for d in self.c.dead[t][pc]:
                        if regs[d] != 0:
                            if lst is None:
                                lst = list(regs)
                            lst[d] = 0
                    if lst is not None:
                        regs = tuple(lst)
                results.append((pc, regs, win))
        return results

    def _fetch_entry(self, ins: _CIns, pc: int, regs: tuple, win: tuple) -> tuple:
        kind = ins.kind
        flags = ins.flags
        deps = 0
        if kind == K_FFULL or kind == K_FWW:
            mask = 0
            for j, e in enumerate(win):
                ek = e[E_KIND]
                ef = e[E_FLAGS]
                if ek == K_FFULL or ek == K_FWW:
                    mask |= 1 << j
                elif kind == K_FWW:
                    if ef & F_W:
                        mask |= 1 << j
                elif flags & F_REL:
                    mask |= 1 << j
                elif flags & F_ACQ and ef & F_R:
                    mask |= 1 << j
                elif flags & F_SC and ef & F_SC:
                    mask |= 1 << j
            return (kind, pc, -1, None, None, mask, flags, -1, None)
        if ins.base_reg >= 0:
            base = regs[ins.base_reg]
            if type(base) is tuple:
                loc = base
                deps |= 1 << base[0]
            else:
                loc = self.c.loc_of(base, ins.field)
        else:
            loc = ins.base_loc
        a = b = None
        if ins.a is not None:
            k, x = ins.a
            a = x if k == 0 else regs[x]
            if type(a) is tuple:
                deps |= 1 << a[0]
        if ins.b is not None:
            k, x = ins.b
            b = x if k == 0 else regs[x]
            if type(b) is tuple:
                deps |= 1 << b[0]
        mask = deps
        if not self.sc:
            for j, e in enumerate(win):
                ek = e[E_KIND]
                ef = e[E_FLAGS]
                if flags & F_REL:  # R3
                    mask |= 1 << j
                elif flags & F_SC and ef & F_SC:  # R4
                    mask |= 1 << j
                elif ek == K_FFULL and (ef & F_SC or (ef & F_REL and flags & F_W)):
                    mask |= 1 << j
                elif ek == K_FWW and flags & F_W:  # R7
                    mask |= 1 << j
                elif flags & F_W and ef & F_SPEC:  # R6
                    mask |= 1 << j
        else:
            mask = (1 << len(win)) - 1
        return (kind, pc, loc, a, b, mask, flags, ins.field, None)

    # -- successor generation --------------------------------------------
    def initial_states(self) -> list[tuple]:
        per_thread = []
        for t, code in enumerate(self.c.threads):
            nregs = len(self.c.reg_names[t])
            start = (0, (0,) * nregs, ()) if code else (-1, (0,) * nregs, ())
            per_thread.append(self.normalize(t, *start))
        states: list[tuple] = [()]
        for t, options in enumerate(per_thread):
            states = [s + (self._intern(t, o),) for s in states for o in options]
        return [(self.c.init_mem, s) for s in states]

    def _intern(self, t: int, ts: tuple) -> int:
        """Global states hold small integer ids instead of thread-state tuples."""
        key = (t, ts)
        sid = self._ts_ids.get(key)
        if sid is None:
            sid = len(self._ts)
            self._ts_ids[key] = sid
            self._ts.append(ts)
        return sid

    def thread_state(self, sid: int) -> tuple:
        return self._ts[sid]

    def _candidates(self, sid: int) -> list[tuple[int, tuple]]:
        """Entries of a thread state that may commit, ignoring memory."""
        got = self._cand_cache.get(sid)
        if got is not None:
            return got
        win = self._ts[sid][2]
        out = []
        for i, e in enumerate(win):
            if e[E_KIND] >= K_FFULL or e[E_MASK]:
                continue
            loc = e[E_LOC]
            if type(loc) is tuple:
                continue
            fieldid = e[E_FIELD]
            blocked = False
            for j in range(i):
                f = win[j]
                if f[E_FIELD] == fieldid and f[E_KIND] < K_FFULL:
                    floc = f[E_LOC]
                    if type(floc) is tuple or floc == loc:
                        blocked = True
                        break
            if not blocked:
                out.append((i, e))
        self._cand_cache[sid] = out
        return out

    def _after(self, t: int, sid: int, i: int, val) -> list[int]:
        """Thread-state ids after entry ``i`` commits with result ``val``."""
        key = (sid, i, val)
        got = self._next_cache.get(key)
        if got is None:
            pc, regs, win = self._ts[sid]
            nregs, nwin = self._retire(regs, win, i, val)
            got = [self._intern(t, ts) for ts in self.normalize(t, pc, nregs, nwin)]
            self._next_cache[key] = got
        return got

    def successors(self, state: tuple) -> tuple[bool, list[tuple]]:
        """(any commit enabled, [(event, next_state or error string)])."""
        mem, threads = state
        out: list[tuple] = []
        enabled = False
        c = self.c
        for t, sid in enumerate(threads):
            for i, e in self._candidates(sid):
                kind = e[E_KIND]
                loc = e[E_LOC]
                if loc < 0:
                    enabled = True
                    ev = (t, e[E_INS], kind, loc, None, None)
                    out.append((ev, f"invalid memory access in thread {c.tids[t]}"))
                    continue
                cur = mem[loc]
                a = e[E_A]
                new = None
                if kind == K_LOAD:
                    val = cur
                elif kind == K_STORE:
                    new = a
                    val = 0
                elif kind == K_SWAP:
                    new = a
                    val = cur
                elif kind == K_CAS or kind == K_CASOK:
                    if cur == a:
                        new = e[E_B]
                    val = cur if kind == K_CAS else (1 if cur == a else 0)
                elif kind == K_AWAIT:
                    pred = c.threads[t][e[E_INS]].pred
                    if pred is Pred.NONZERO:
                        ok = cur != 0
                    elif pred is Pred.ZERO:
                        ok = cur == 0
                    else:
                        ok = cur == a
                    if not ok:
                        continue
                    val = cur
                else:  # K_AWAITCAS
                    if cur != a:
                        continue
                    new = e[E_B]
                    val = cur
                enabled = True
                if new is not None:
                    nmem = mem[:loc] + (new,) + mem[loc + 1:]
                else:
                    nmem = mem
                ev = (t, e[E_INS], kind, loc, cur, new)
                for nts in self._after(t, sid, i, val):
                    out.append((ev, (nmem, threads[:t] + (nts,) + threads[t + 1:])))
        return enabled, out

    # -- traces -----------------------------------------------------------
    def tag_of(self, t: int, ins_idx: int) -> str:
        src = self.c.threads[t][ins_idx].src
        p = getattr(src, "point", None)
        if p is not None:
            for d in self.c.program.points:
                if d.id == p:
                    return d.source_tag
        return getattr(src, "tag", None) or ""

    def make_event(self, raw: tuple, occurrence: int) -> Event:
        t, ins_idx, kind, loc, cur, new = raw
        c = self.c
        src = c.threads[t][ins_idx].src
        tag = self.tag_of(t, ins_idx)
        if kind == K_LOAD or kind == K_AWAIT:
            kname, r, w = "read", cur, None
        elif kind == K_STORE:
            kname, r, w = "write", None, new
        elif new is None:
            kname, r, w = "read", cur, None  # failed CAS
        else:
            kname, r, w = "rmw", cur, new
        locname = c.loc_names[loc] if loc is not None and loc >= 0 else None
        return Event(
            thread=c.tids[t],
            instance=(ins_idx, occurrence),
            kind=kname,
            location=locname,
            value_read=None if r is None else c.show(r),
            value_written=None if w is None else c.show(w),
            mode=src.mode,
            tag=tag,
        )

    def make_trace(self, path: Sequence[tuple], state: tuple | None, *, error: str | None = None,
                   cycle: bool = False) -> ExecutionTrace:
        counts: dict[tuple[int, int], int] = {}
        events = []
        for raw in path:
            key = (raw[0], raw[1])
            n = counts.get(key, 0)
            counts[key] = n + 1
            events.append(self.make_event(raw, n))
        c = self.c
        mem = state[0] if state is not None else c.init_mem
        if state is None:
            mem = list(c.init_mem)
            for raw in path:
                if raw[5] is not None and raw[3] is not None and raw[3] >= 0:
                    mem[raw[3]] = raw[5]
            mem = tuple(mem)
        finals = {name: c.show(mem[i]) for name, i in c.global_locs.items()}
        allmem = {name: c.show(v) for name, v in zip(c.loc_names, mem)}
        blocked = set()
        if state is not None and error is None:
            for t, sid in enumerate(state[1]):
                pc, regs, win = self._ts[sid]
                if pc < 0 and not win:
                    continue
                for e in win:
                    if e[E_KIND] in (K_AWAIT, K_AWAITCAS):
                        blocked.add((c.tids[t], (e[E_INS], counts.get((t, e[E_INS]), 0))))
                        break
                else:
                    blocked.add((c.tids[t], (pc, 0)))
        return ExecutionTrace(
            commit_order=tuple(events),
            final_globals=finals,
            blocked_awaits=frozenset(blocked),
            final_memory=allmem,
            error=error,
            cycle=cycle,
        )


def _check_coherence(trace: ExecutionTrace, program: Program) -> None:
    c = Compiled(program)
    latest = {name: c.show(v) for name, v in zip(c.loc_names, c.init_mem)}
    for ev in trace.commit_order:
        if ev.location is None:
            continue
        if ev.value_read is not None and ev.value_read != latest[ev.location]:
            raise EngineError(f"coherence violated at {ev}: latest is {latest[ev.location]}")
        if ev.value_written is not None:
            latest[ev.location] = ev.value_written


def check_trace_coherence(trace: ExecutionTrace, program: Program) -> bool:
    try:
        _check_coherence(trace, program)
    except EngineError:
        return False
    return True


# ---------------------------------------------------------------------------
# public API
# ---------------------------------------------------------------------------


def explore(program: Program, config: EngineConfig | None = None, visitor: Visitor | None = None,
            *, compiled: Compiled | None = None, coverage: dict | None = None) -> ExplorationSummary:
    """Visit every complete and every blocked execution of ``program``.

    With ``state_caching`` each distinct final state is visited once (with
    one witness path); otherwise every execution path is enumerated. The
    visitor may return a truthy value to stop early. ``coverage``, when
    given, counts explored commits per ``(thread id, source tag)``.
    """
    config = config or EngineConfig()
    diags = [d for d in validate(program)]
    if diags:
        raise EngineError("invalid program: " + "; ".join(map(str, diags)))
    ex = _Explorer(program, config, compiled)
    summary = ExplorationSummary()
    deadline = None if config.timeout is None else time.monotonic() + config.timeout
    caching = config.state_caching
    visited: set = set()
    max_steps = config.max_steps
    coherence = config.check_coherence and len(ex.c.loc_names) > 0

    def emit(trace: ExecutionTrace) -> bool:
        if coherence and trace.error is None:
            _check_coherence(trace, program)
        if trace.error is not None:
            summary.error_executions += 1
        elif trace.blocked:
            summary.blocked_executions += 1
        summary.executions_visited += 1
        if visitor is not None and visitor(trace):
            summary.stopped = True
            return True
        return False

    expansions = 0
    for root in ex.initial_states():
        if caching:
            if root in visited:
                continue
            visited.add(root)
        path: list[tuple] = []
        enabled, succs = ex.successors(root)
        frames: list[list] = [[root, enabled, succs, 0]]
        on_stack = {root}
        summary.states += 1
        while frames:
            frame = frames[-1]
            st, enabled, succs, k = frame
            if k == 0 and not succs:
                frame[3] = 1
                if not enabled:
                    if emit(ex.make_trace(path, st)):
                        break
            if k < len(succs):
                frame[3] = k + 1
                ev, nxt = succs[k]
                if type(nxt) is str:
                    if emit(ex.make_trace(path + [ev], None, error=nxt)):
                        break
                    continue
                if nxt in on_stack:
                    if emit(ex.make_trace(path + [ev], nxt, cycle=True)):
                        break
                    continue
                if caching:
                    if nxt in visited:
                        continue
                    visited.add(nxt)
                if len(path) >= max_steps:
                    summary.diagnostics.append(f"max-steps exceeded after {len(path)} commits")
                    continue
                expansions += 1
                if deadline is not None and expansions & 255 == 0 and time.monotonic() > deadline:
                    summary.hit_timeout = True
                    break
                if coverage is not None:
                    key = (ex.c.tids[ev[0]], ex.tag_of(ev[0], ev[1]))
                    coverage[key] = coverage.get(key, 0) + 1
                path.append(ev)
                on_stack.add(nxt)
                en2, s2 = ex.successors(nxt)
                summary.states += 1
                frames.append([nxt, en2, s2, 0])
            else:
                frames.pop()
                on_stack.discard(st)
                if path and frames:
                    path.pop()
        if summary.stopped or summary.hit_timeout:
            break
    summary.pruned = ex.pruned
    return summary


def sc_executions(program: Program, config: EngineConfig | None = None, visitor: Visitor | None = None,
                  **kw) -> ExplorationSummary:
    """``explore`` with strict program order (sequential consistency)."""
    config = config or EngineConfig()
    from dataclasses import replace

    return explore(program, replace(config, model="sc"), visitor, **kw)


def replay(program: Program, trace: ExecutionTrace) -> dict[str, object]:
    """Re-apply a trace's writes in commit order; returns the final globals."""
    c = Compiled(program)
    mem = dict(zip(c.loc_names, (c.show(v) for v in c.init_mem)))
    for ev in trace.commit_order:
        if ev.value_read is not None and ev.location is not None and mem[ev.location] != ev.value_read:
            raise EngineError(f"replay diverges at {ev}")
        if ev.value_written is not None and ev.location is not None:
            mem[ev.location] = ev.value_written
    return {name: mem[name] for name in c.global_locs}


def outcomes(program: Program, config: EngineConfig | None = None) -> set[tuple[tuple[str, object], ...]]:
    """Set of final-global maps over complete executions."""
    config = config or EngineConfig(state_caching=True)
    result: set = set()

    def visit(tr: ExecutionTrace) -> None:
        if tr.complete:
            result.add(tuple(sorted(tr.final_globals.items())))

    explore(program, config, visit)
    return result


# ---------------------------------------------------------------------------
# trace dump
# ---------------------------------------------------------------------------


def dump_trace(trace: ExecutionTrace) -> str:
    lines = []
    for seq, ev in enumerate(trace.commit_order):
        loc = ev.location or "-"
        r = "-" if ev.value_read is None else ev.value_read
        w = "-" if ev.value_written is None else ev.value_written
        tag = f" [{ev.tag}]" if ev.tag else ""
        lines.append(f"#{seq} T{ev.thread} {ev.kind}@{ev.mode.value} {loc} r={r} w={w}{tag}")
    if trace.error:
        lines.append(f"error: {trace.error}")
    if trace.blocked_awaits or trace.cycle:
        lines.append("blocked:")
        for tid, (ins, occ) in sorted(trace.blocked_awaits):
            lines.append(f"  T{tid} instruction {ins}")
        if trace.cycle:
            lines.append("  (execution revisits an earlier state: non-terminating loop)")
    lines.append("final: " + " ".join(f"{k}={v}" for k, v in sorted(trace.final_globals.items())))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# static preserved program order
# ---------------------------------------------------------------------------


def _is_read(ins) -> bool:
    return isinstance(ins, (Load, Swap, Cas, AwaitCas, Await))


def _is_write(ins) -> bool:
    return isinstance(ins, (Store, Swap, Cas, AwaitCas))


def _acquires(ins) -> bool:
    if isinstance(ins, Fence):
        return ins.kind is FenceKind.FULL and ins.mode.acquires
    return _is_read(ins) and ins.mode.acquires


def _releases(ins) -> bool:
    if isinstance(ins, Fence):
        return ins.kind is FenceKind.FULL and ins.mode.releases
    return _is_write(ins) and ins.mode.releases


def ppo_ordered(code: Sequence[Instruction], a: int, b: int, model: str = "weak") -> bool:
    """Whether instance ``code[a]`` must commit before ``code[b]``.

    ``code[a:b+1]`` is taken as the dynamic path between the two instances
    (branches in between are treated as traversed). Locations are compared
    syntactically: same field on the same object, or on the same register
    not redefined in between.
    """
    if not a < b:
        raise ValueError("a must precede b")
    x, y = code[a], code[b]
    if op_kind(x) is None or op_kind(y) is None:
        raise ValueError("both instances must be shared accesses or fences")
    if model == "sc":
        return True
    between = code[a + 1:b]
    # R1
    lx, ly = getattr(x, "loc", None), getattr(y, "loc", None)
    if lx is not None and ly is not None and lx.field == ly.field:
        if lx.base == ly.base:
            if not (isinstance(lx.base, Reg) and any(writes_of(i) == lx.base.name for i in between)):
                return True
        elif isinstance(lx.base, Reg) or isinstance(ly.base, Reg):
            return True  # may alias
    # fences: compiler and relaxed fences are no-ops; the others are ordered
    # with each other; an ACQ fence waits for earlier reads,
    # a REL fence holds back later writes, WW fences order writes (R7)
    def noop(i) -> bool:
        return isinstance(i, Fence) and (i.kind is FenceKind.COMPILER or (i.kind is FenceKind.FULL and i.mode is Mode.RLX))

    if noop(x) or noop(y):
        return False
    if isinstance(x, Fence) and isinstance(y, Fence):
        return True
    if isinstance(y, Fence):
        if y.kind is FenceKind.WW:
            return _is_write(x)
        if y.kind is FenceKind.FULL and (y.mode.releases or (y.mode is Mode.ACQ and _is_read(x))):
            return True
    if isinstance(x, Fence):
        if x.kind is FenceKind.WW:
            return _is_write(y)
        if x.kind is FenceKind.FULL and (x.mode.acquires or (x.mode is Mode.REL and _is_write(y))):
            return True
        return False
    # R2, R3, R4
    if _acquires(x) or _releases(y):
        return True
    if x.mode is Mode.SC and y.mode is Mode.SC:
        return True
    # R5: registers transitively derived from x's result
    tainted: set[str] = set()
    dst = writes_of(x)
    if dst and _is_read(x):
        tainted.add(dst)
    control = isinstance(x, (Await, AwaitCas))
    for ins in between:
        if isinstance(ins, Branch) and isinstance(ins.cond, Reg) and ins.cond.name in tainted:
            control = True
        d = writes_of(ins)
        if d is None:
            continue
        if isinstance(ins, Compute) and any(r in tainted for r in reads_of(ins)):
            tainted.add(d)
        else:
            tainted.discard(d)
    if any(r in tainted for r in reads_of(y)):
        return True
    # R6
    if control and _is_write(y):
        return True
    # R7
    if _is_write(x) and _is_write(y) and any(
        isinstance(i, Fence) and i.kind is FenceKind.WW for i in between
    ):
        return True
    return False


def iter_events(trace: ExecutionTrace, thread: int) -> Iterable[Event]:
    return (e for e in trace.commit_order if e.thread == thread)


__all__ = [
    "Compiled",
    "EngineConfig",
    "EngineError",
    "Event",
    "ExecutionTrace",
    "ExplorationSummary",
    "check_trace_coherence",
    "dump_trace",
    "explore",
    "iter_events",
    "outcomes",
    "ppo_ordered",
    "replay",
    "sc_executions",
]
