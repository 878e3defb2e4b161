"""Linux CNA (qspinlock slow path, patch v15) with the split-lock simplifications.

Modes are fixed by the Linux primitives and are not meant to be optimized;
they are still barrier points so ``list_barrier_points`` enumerates every
shared access.

Simplifications kept from the verified variant:

* the qspinlock word is split into ``lock.spinlock`` (cmpxchg spin lock) and
  ``lock.val`` (the CNA tail only); there is no pending bit and no locked
  byte in ``val``;
* every thread takes the slow path (the client calls it directly); the
  spin lock is acquired with an acquire-CAS await after the CNA lock;
* ``probably()`` returns 0, so the shuffle-reduction early return in
  ``cna_wait_head_or_lock`` is dead and its guarding read of
  ``node->locked`` is dropped;
* ``cna_order_queue`` is called once instead of in a ``LOCK_IS_BUSY`` loop;
* ``intra_node_threshold_reached`` reads the global ``my_threshold``, which
  a main thread sets to 1 at an arbitrary point.

Elided or filled in from the v15 patch (the listing truncates them):

* ``cna_splice_head``: load the secondary tail from ``node->locked`` and
  its head from ``tail_2nd->next``; link to ``next`` when there is one,
  otherwise clear ``tail_2nd->next`` and release-CAS ``lock.val`` from
  ``val`` to ``tail_2nd``, restoring the link on failure;
* ``cna_try_clear_tail``, ``cna_order_queue``, ``cna_splice_next`` and
  ``cna_lock_handoff`` follow v15;
* the slow path only tries to clear the tail when ``val`` equals its own
  tail (the ``(val & _Q_TAIL_MASK) == tail`` test of upstream qspinlock,
  which the listing leaves out);
* encoded tails, ``decode_tail`` and ``grab_mcs_node`` are direct node
  references; ``node->count`` and ``prefetchw`` are dropped;
* ``cna_init_node`` has no priority waiters, so ``numa_node`` is the real
  node and the ``CNA_PRIORITY_NODE`` branch is never taken (it is kept);
* ``local_clock()`` returns 2 so a fresh ``start_time`` differs from both 0
  and ``FLUSH_SECONDARY_QUEUE`` (1).
"""

from __future__ import annotations

import re
from typing import Mapping, Sequence

from ..ir.builder import CodeBuilder, build_client
from ..ir.core import NULL, Const, FenceKind, Mode, ObjectDecl, Pred, Program

RLX, ACQ, REL = Mode.RLX, Mode.ACQ, Mode.REL
FLUSH_SECONDARY_QUEUE = 1
LOCAL_CLOCK = 2
CNA_PRIORITY_NODE = -1


class _Linux:
    def __init__(self, b: CodeBuilder, node: str):
        self.b = b
        self.node = node

    def acc(self, method: str, mode: Mode, file: str, snippet: str, *args, **kw):
        tag = file + ":" + re.sub(r"\s+", "", snippet)
        return getattr(self.b, method)(*args, mode=mode, tag=tag, snippet=snippet, **kw)

    # qspinlock_cna.h ----------------------------------------------------
    def cna_init_node(self) -> None:
        b, node = self.b, self.node
        with b.func("cna_init_node"):
            self.acc("store", RLX, "qspinlock_cna.h", "cn->numa_node = cn->real_numa_node",
                     f"{node}.numa_node", b.numa())
            self.acc("store", RLX, "qspinlock_cna.h", "cn->start_time = 0", f"{node}.start_time", 0)

    def splice_head(self, val: str | None, nxt: str | None, result: str) -> None:
        """``cna_splice_head(lock, val, node, next)``; ``nxt=None`` is the NULL call."""
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_splice_head"):
            tail2 = self.acc("load", RLX, f, "tail_2nd = decode_tail(node->locked)", f"{node}.locked")
            head2 = self.acc("load", RLX, f, "head_2nd = tail_2nd->next", f"{tail2}.next")
            if nxt is not None:
                self.acc("store", RLX, f, "tail_2nd->next = next", f"{tail2}.next", nxt)
            else:
                self.acc("store", RLX, f, "tail_2nd->next = NULL", f"{tail2}.next", None)
                ok = self.acc("cas", REL, f, "atomic_try_cmpxchg_release(&lock->val, &val, new)",
                              "lock.val", val, tail2, flag=True)
                with b.if_(b.compute("not", ok)):
                    self.acc("store", RLX, f, "tail_2nd->next = head_2nd", f"{tail2}.next", head2)
                    b.mov(None, dst=result)
                    b.ret()
            b.mov(head2, dst=result)

    def try_clear_tail(self, val: str, result: str) -> None:
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_try_clear_tail"):
            locked = self.acc("load", RLX, f, "node->locked > 1", f"{node}.locked")
            with b.if_(b.compute("gt", locked, 1)):
                nxt = b.reg("head")
                self.splice_head(val, None, nxt)
                with b.if_(b.compute("ne", nxt, None)):
                    self.acc("store", REL, f, "arch_mcs_lock_handoff(&next->locked, 1)", f"{nxt}.locked", 1)
                    b.mov(1, dst=result)
                    b.ret()
                b.mov(0, dst=result)
                b.ret()
            self.acc("cas", RLX, "qspinlock.c", "atomic_try_cmpxchg_relaxed(&lock->val, &val, 0)",
                     "lock.val", val, None, flag=True, dst=result)

    def splice_next(self, nxt: str, nnext: str) -> None:
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_splice_next"):
            self.acc("store", RLX, f, "node->next = nnext", f"{node}.next", nnext)
            locked = self.acc("load", RLX, f, "node->locked <= 1", f"{node}.locked")
            with b.if_else(b.compute("le", locked, 1)) as br:
                self.acc("store", RLX, f, "next->next = next", f"{nxt}.next", nxt)
                self.acc("store", RLX, f, "cn->start_time = local_clock()", f"{node}.start_time", LOCAL_CLOCK)
                br.otherwise()
                tail2 = self.acc("load", RLX, f, "tail_2nd = decode_tail(node->locked)", f"{node}.locked")
                head2 = self.acc("load", RLX, f, "head_2nd = tail_2nd->next", f"{tail2}.next")
                self.acc("store", RLX, f, "tail_2nd->next = next", f"{tail2}.next", nxt)
                self.acc("store", RLX, f, "next->next = head_2nd", f"{nxt}.next", head2)
            self.acc("store", RLX, f, "node->locked = next->encoded_tail", f"{node}.locked", nxt)

    def order_queue(self) -> None:
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_order_queue"):
            nxt = self.acc("load", RLX, f, "next = READ_ONCE(node->next)", f"{node}.next")
            with b.if_(b.compute("eq", nxt, None)):
                b.ret()
            mine = self.acc("load", RLX, f, "numa_node = cn->numa_node", f"{node}.numa_node")
            theirs = self.acc("load", RLX, f, "next_numa_node = next->numa_node", f"{nxt}.numa_node")
            with b.if_(b.compute("ne", theirs, mine)):
                nnext = self.acc("load", RLX, f, "nnext = READ_ONCE(next->next)", f"{nxt}.next")
                with b.if_(b.compute("ne", nnext, None)):
                    self.splice_next(nxt, nnext)

    def wait_head_or_lock(self) -> None:
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_wait_head_or_lock"):
            st = self.acc("load", RLX, f, "!cn->start_time", f"{node}.start_time")
            go = b.reg("order")
            b.compute("eq", st, 0, dst=go)
            with b.if_(b.compute("not", go)):
                th = self.acc("load", RLX, f, "my_threshold != 0", "my_threshold")
                b.compute("eq", th, 0, dst=go)
            with b.if_else(go) as br:
                nn = self.acc("load", RLX, f, "cn->numa_node == CNA_PRIORITY_NODE", f"{node}.numa_node")
                with b.if_(b.compute("eq", nn, CNA_PRIORITY_NODE)):
                    self.acc("store", RLX, f, "cn->numa_node = cn->real_numa_node", f"{node}.numa_node", b.numa())
                self.order_queue()
                br.otherwise()
                self.acc("store", RLX, f, "cn->start_time = FLUSH_SECONDARY_QUEUE", f"{node}.start_time",
                         FLUSH_SECONDARY_QUEUE)

    def lock_handoff(self, nxt: str) -> None:
        b, node = self.b, self.node
        f = "qspinlock_cna.h"
        with b.func("cna_lock_handoff"):
            val = b.mov(1, dst=b.reg("hval"))
            st = self.acc("load", RLX, f, "cn->start_time != FLUSH_SECONDARY_QUEUE", f"{node}.start_time")
            with b.if_else(b.compute("ne", st, FLUSH_SECONDARY_QUEUE)) as br:
                locked = self.acc("load", RLX, f, "node->locked > 1", f"{node}.locked")
                with b.if_(b.compute("gt", locked, 1)):
                    self.acc("load", RLX, f, "val = node->locked", f"{node}.locked", dst=val)
                    self.acc("load", RLX, f, "next = node->next", f"{node}.next", dst=nxt)
                    nn = self.acc("load", RLX, f, "cn->numa_node", f"{node}.numa_node")
                    self.acc("store", RLX, f, "next->numa_node = cn->numa_node", f"{nxt}.numa_node", nn)
                    t = self.acc("load", RLX, f, "cn->start_time", f"{node}.start_time")
                    self.acc("store", RLX, f, "next->start_time = cn->start_time", f"{nxt}.start_time", t)
                br.otherwise()
                locked2 = self.acc("load", RLX, f, "else if (node->locked > 1)", f"{node}.locked")
                with b.if_(b.compute("gt", locked2, 1)):
                    self.splice_head(None, nxt, nxt)
            self.acc("store", REL, f, "arch_mcs_lock_handoff(&next->locked, val)", f"{nxt}.locked", val)

    # qspinlock.c --------------------------------------------------------
    def slowpath(self) -> None:
        b, node = self.b, self.node
        f = "qspinlock.c"
        with b.func("queued_spin_lock_slowpath"):
            b.fence(FenceKind.COMPILER, tag="barrier()")
            self.acc("store", RLX, f, "node->locked = 0", f"{node}.locked", 0)
            self.acc("store", RLX, f, "node->next = NULL", f"{node}.next", None)
            self.cna_init_node()
            b.fence(FenceKind.WW, tag="smp_wmb()")
            old = self.acc("swap", RLX, f, "old = xchg_tail(lock, tail)", "lock.val", node)
            nxt = b.mov(None, dst=b.reg("next"))
            with b.if_(b.compute("ne", old, None)):
                self.acc("store", RLX, f, "WRITE_ONCE(prev->next, node)", f"{old}.next", node)
                self.acc("await_", ACQ, f, "arch_mcs_spin_wait(&node->locked)", f"{node}.locked", Pred.NONZERO)
                self.acc("load", RLX, f, "next = READ_ONCE(node->next)", f"{node}.next", dst=nxt)
            self.wait_head_or_lock()
            val = self.acc("load", ACQ, f, "val = atomic_read_acquire(&lock->val)", "lock.val")
            self.acc("await_cas", ACQ, f, "await_while(cmpxchg_acquire(&lock->spinlock, 0, 1) != 0)",
                     "lock.spinlock", 0, 1)
            release = b.fresh("release")
            with b.if_(b.compute("eq", val, node)):
                cleared = b.reg("cleared")
                self.try_clear_tail(val, cleared)
                with b.if_(cleared):
                    b.jmp(release)
            with b.if_(b.compute("eq", nxt, None)):
                self.acc("await_", RLX, f, "next = smp_cond_load_relaxed(&node->next, (VAL))",
                         f"{node}.next", Pred.NONZERO, dst=nxt)
            self.lock_handoff(nxt)
            b.label(release)

    def unlock(self) -> None:
        with self.b.func("queued_spin_unlock"):
            self.acc("store", REL, "qspinlock.h", "smp_store_release(&lock->spinlock, 0)", "lock.spinlock", 0)


def _lock(b: CodeBuilder, me: str) -> None:
    _Linux(b, me).slowpath()


def _unlock(b: CodeBuilder, me: str) -> None:
    _Linux(b, me).unlock()


def _main_thread(b: CodeBuilder) -> None:
    with b.func("main"):
        b.store("my_threshold", 1, Mode.RLX, "client.c:my_threshold=1", "my_threshold = 1")


def _node_fields(tid: int, node: int):
    return (("next", NULL), ("locked", Const(0)), ("numa_node", Const(node)), ("start_time", Const(0)))


def build_linux_cna(n_threads: int, numa_map: Mapping[int, int] | Sequence[int] | None = None) -> Program:
    if n_threads < 2:
        raise ValueError("the Linux CNA client needs at least 2 threads")
    return build_client(
        _lock,
        _unlock,
        n_threads,
        numa_map,
        lock_objects=[ObjectDecl("lock", (("spinlock", Const(0)), ("val", NULL)))],
        node_fields=_node_fields,
        node_name="node",
        extra_globals=(("my_threshold", Const(0)),),
        extra_threads=(_main_thread,),
        name="linux-cna",
        notes=(
            "Linux CNA slow path (patch v15) with the split qspinlock; modes fixed by the Linux primitives.",
            "A main thread sets my_threshold = 1 concurrently with the workers.",
        ),
    )
