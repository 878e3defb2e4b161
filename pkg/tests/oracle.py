"""Brute-force reference semantics for straight-line litmus programs.

Deliberately shares no code with the engine: it reads the IR instructions,
computes the ordering relation pairwise from the rules, and enumerates every
interleaving of whole-program event sequences that respects it. Only loads,
stores of constants or registers, and fences are supported.
"""

from __future__ import annotations

from wmmcheck.ir.core import Const, Fence, FenceKind, Label, Load, Mode, Reg, Return, Store


def _ops(code):
    out = []
    for ins in code:
        if isinstance(ins, (Label, Return)):
            continue
        if not isinstance(ins, (Load, Store, Fence)):
            raise ValueError(f"oracle does not support {type(ins).__name__}")
        out.append(ins)
    return out


def _noop(x) -> bool:
    return isinstance(x, Fence) and (x.kind is FenceKind.COMPILER or (x.kind is FenceKind.FULL and x.mode is Mode.RLX))


def ordered(ops, i: int, j: int, model: str) -> bool:
    """Whether ops[i] must commit before ops[j] (i < j)."""
    if model == "sc":
        return True
    a, b = ops[i], ops[j]
    if _noop(a) or _noop(b):
        return False
    fa, fb = isinstance(a, Fence), isinstance(b, Fence)
    if fa and fb:
        return True
    if fb:
        if b.kind is FenceKind.WW:
            return isinstance(a, Store)
        return b.mode in (Mode.REL, Mode.SC) or isinstance(a, Load)
    if fa:
        if a.kind is FenceKind.WW:
            return isinstance(b, Store)
        return a.mode in (Mode.ACQ, Mode.SC) or isinstance(b, Store)
    if a.loc == b.loc:
        return True
    if isinstance(a, Load) and a.mode in (Mode.ACQ, Mode.SC):
        return True
    if isinstance(b, Store) and b.mode in (Mode.REL, Mode.SC):
        return True
    if a.mode is Mode.SC and b.mode is Mode.SC:
        return True
    if isinstance(a, Load) and isinstance(b, Store) and b.value == Reg(a.dst):
        return True
    if isinstance(a, Store) and isinstance(b, Store):
        if any(isinstance(f, Fence) and f.kind is FenceKind.WW for f in ops[i + 1:j]):
            return True
    return False


def outcomes(program, observed, model: str = "weak") -> set[tuple[tuple[str, int], ...]]:
    threads = [_ops(t.code) for t in program.threads]
    preds = []
    for ops in threads:
        preds.append([{i for i in range(j) if ordered(ops, i, j, model)} for j in range(len(ops))])
    init = {g: v.value for g, v in program.globals}
    result = set()

    def run(done: list[set[int]], mem: dict, regs: list[dict]) -> None:
        progressed = False
        for t, ops in enumerate(threads):
            for j, ins in enumerate(ops):
                if j in done[t] or not preds[t][j] <= done[t]:
                    continue
                progressed = True
                mem2, regs2 = dict(mem), [dict(r) for r in regs]
                name = ins.loc.field if not isinstance(ins, Fence) else None
                if isinstance(ins, Load):
                    regs2[t][ins.dst] = mem2[name]
                elif isinstance(ins, Store):
                    v = ins.value
                    mem2[name] = v.value if isinstance(v, Const) else regs2[t][v.name]
                d2 = [set(s) for s in done]
                d2[t].add(j)
                run(d2, mem2, regs2)
        if not progressed:
            result.add(tuple((n, mem[n]) for n in observed))

    run([set() for _ in threads], init, [{} for _ in threads])
    return result
