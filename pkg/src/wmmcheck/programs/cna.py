"""The CNA lock (lock, unlock, find_successor) with the counter client.

Each shared access is tagged with the line of ``nativelock/cnalock.h`` that
performs the same access, so the optimizer's report and the native lock
refer to the same source positions. The initial mode of every point is SC.
"""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Mapping, Sequence

from ..ir.builder import CodeBuilder, build_client
from ..ir.core import (
    NULL,
    Assignment,
    Const,
    Mode,
    ObjectDecl,
    Pred,
    Program,
    apply_assignment,
    assignment_by_tag,
    list_barrier_points,
)

HEADER = "cnalock.h"
SC, ACQ, REL, RLX = Mode.SC, Mode.ACQ, Mode.REL, Mode.RLX


@lru_cache(maxsize=None)
def header_lines() -> tuple[str, ...]:
    text = resources.files("wmmcheck.nativelock").joinpath(HEADER).read_text()
    return tuple(text.splitlines())


def _tag(line: int) -> tuple[str, str]:
    return f"{HEADER}:{line}", header_lines()[line - 1].strip()


# Modes found by the optimizer at 4 threads; every point not listed is RLX.
FIG2_MODES: dict[str, Mode] = {
    "cnalock.h:43": SC,   # SWAP(&lock->tail, me)
    "cnalock.h:50": REL,  # tail->next = me
    "cnalock.h:51": ACQ,  # while (!me->spin)
    "cnalock.h:65": ACQ,  # next->next
    "cnalock.h:81": ACQ,  # cur->next
    "cnalock.h:87": ACQ,  # if (!me->next)
    "cnalock.h:90": SC,   # CAS(&lock->tail, me, NULL)
    "cnalock.h:96": SC,   # CAS(&lock->tail, me, secHead->secTail)
    "cnalock.h:97": REL,  # secHead->spin = 1
    "cnalock.h:107": REL,  # succ->spin = me->spin
    "cnalock.h:113": REL,  # succ->spin = 1 (secondary queue flush)
    "cnalock.h:116": REL,  # me->next->spin = 1
}
SUCC_SPIN_TAG = "cnalock.h:107"


class _Cna:
    """Emits the lock templates into a builder; ``me`` is the node register."""

    def __init__(self, b: CodeBuilder, me: str):
        self.b = b
        self.me = me

    def acc(self, method: str, line: int, *args, **kw):
        tag, snippet = _tag(line)
        return getattr(self.b, method)(*args, mode=SC, tag=tag, snippet=snippet, **kw)

    def lock(self) -> None:
        b, me = self.b, self.me
        with b.func("cna_lock"):
            self.acc("store", 38, f"{me}.next", None)
            self.acc("store", 39, f"{me}.socket", -1)
            self.acc("store", 40, f"{me}.spin", 0)
            tail = self.acc("swap", 43, "lock.tail", me)
            empty = b.compute("eq", tail, None)
            with b.if_(empty):
                self.acc("store", 45, f"{me}.spin", 1)
                b.ret()
            self.acc("store", 49, f"{me}.socket", b.numa())
            self.acc("store", 50, f"{tail}.next", me)
            self.acc("await_", 51, f"{me}.spin", Pred.NONZERO)

    def find_successor(self, result: str) -> None:
        b, me = self.b, self.me
        with b.func("find_successor"):
            nxt = self.acc("load", 56, f"{me}.next")
            my = self.acc("load", 57, f"{me}.socket")
            unset = b.compute("eq", my, -1)
            with b.if_(unset):
                b.mov(b.numa(), dst=my)
            ns = self.acc("load", 60, f"{nxt}.socket")
            with b.if_(b.compute("eq", ns, my)):
                b.mov(nxt, dst=result)
                b.ret()
            sec_head = nxt
            sec_tail = b.mov(nxt, dst=b.reg("secTail"))
            cur = self.acc("load", 65, f"{nxt}.next", dst=b.reg("cur"))
            loop, body, done = b.fresh("walk"), b.fresh("walk_body"), b.fresh("walk_done")
            b.label(loop)
            b.br(b.compute("ne", cur, None), body, done)
            b.label(body)
            cs = self.acc("load", 67, f"{cur}.socket")
            with b.if_(b.compute("eq", cs, my)):
                sp = self.acc("load", 68, f"{me}.spin")
                with b.if_else(b.compute("gt", sp, 1)) as br:
                    head = self.acc("load", 69, f"{me}.spin")
                    last = self.acc("load", 70, f"{head}.secTail")
                    self.acc("store", 71, f"{last}.next", sec_head)
                    br.otherwise()
                    self.acc("store", 73, f"{me}.spin", sec_head)
                self.acc("store", 75, f"{sec_tail}.next", None)
                head2 = self.acc("load", 76, f"{me}.spin")
                self.acc("store", 77, f"{head2}.secTail", sec_tail)
                b.mov(cur, dst=result)
                b.ret()
            b.mov(cur, dst=sec_tail)
            self.acc("load", 81, f"{cur}.next", dst=cur)
            b.jmp(loop)
            b.label(done)
            b.mov(None, dst=result)

    def unlock(self) -> None:
        b, me = self.b, self.me
        with b.func("cna_unlock"):
            n0 = self.acc("load", 87, f"{me}.next")
            with b.if_(b.compute("eq", n0, None)):
                sp = self.acc("load", 88, f"{me}.spin")
                with b.if_else(b.compute("eq", sp, 1)) as br:
                    ok = self.acc("cas", 90, "lock.tail", me, None, flag=True)
                    with b.if_(ok):
                        b.ret()
                    br.otherwise()
                    sec_head = self.acc("load", 93, f"{me}.spin")
                    sec_tail = self.acc("load", 95, f"{sec_head}.secTail")
                    ok2 = self.acc("cas", 96, "lock.tail", me, sec_tail, flag=True)
                    with b.if_(ok2):
                        self.acc("store", 97, f"{sec_head}.spin", 1)
                        b.ret()
                self.acc("await_", 101, f"{me}.next", Pred.NONZERO)
            succ = b.mov(None, dst=b.reg("succ"))
            local = b.nondet()  # keep_lock_local()
            found = b.reg("found")
            b.mov(0, dst=found)
            with b.if_(local):
                self.find_successor(succ)
                b.compute("ne", succ, None, dst=found)
            with b.if_else(found) as br:
                v = self.acc("load", 106, f"{me}.spin")
                self.acc("store", 107, f"{succ}.spin", v)
                br.otherwise()
                sp = self.acc("load", 108, f"{me}.spin")
                with b.if_else(b.compute("gt", sp, 1)) as br2:
                    s2 = self.acc("load", 109, f"{me}.spin")
                    last = self.acc("load", 110, f"{s2}.secTail")
                    nx = self.acc("load", 111, f"{me}.next")
                    self.acc("store", 112, f"{last}.next", nx)
                    self.acc("store", 113, f"{s2}.spin", 1)
                    br2.otherwise()
                    nx2 = self.acc("load", 115, f"{me}.next")
                    self.acc("store", 116, f"{nx2}.spin", 1)


def _lock(b: CodeBuilder, me: str) -> None:
    _Cna(b, me).lock()


def _unlock(b: CodeBuilder, me: str) -> None:
    _Cna(b, me).unlock()


def _node_fields(tid: int, node: int):
    return (("next", NULL), ("spin", Const(0)), ("socket", Const(0)), ("secTail", NULL))


def build_cna(n_threads: int, numa_map: Mapping[int, int] | Sequence[int] | None = None,
              name: str = "cna") -> Program:
    return build_client(
        _lock,
        _unlock,
        n_threads,
        numa_map,
        lock_objects=[ObjectDecl("lock", (("tail", NULL),))],
        node_fields=_node_fields,
        name=name,
        notes=(
            "CNA lock with the counter client; modes start at SC.",
            "keep_lock_local() is a nondeterministic choice; CPU_PAUSE is dropped.",
        ),
    )


def fig2_assignment(program: Program) -> Assignment:
    """The optimized assignment: named points per FIG2_MODES, all others RLX."""
    modes = {p.source_tag: FIG2_MODES.get(p.source_tag, RLX) for p in list_barrier_points(program)}
    return assignment_by_tag(program, modes)


def buggy_assignment(program: Program) -> Assignment:
    """The optimized assignment with the local hand-off release relaxed."""
    a = fig2_assignment(program)
    pts = list_barrier_points(program)
    idx = next(i for i, p in enumerate(pts) if p.source_tag == SUCC_SPIN_TAG)
    return a.with_mode(idx, RLX)


def build_cna_buggy(n_threads: int = 2, numa_map=None) -> Program:
    """Relaxed ``succ->spin`` hand-off; all threads on one socket by default.

    Local hand-off only happens between threads on the same socket, so the
    default map puts everyone on node 0.
    """
    if numa_map is None:
        numa_map = [0] * n_threads
    p = build_cna(n_threads, numa_map, name="cna-buggy")
    return apply_assignment(p, buggy_assignment(p))
