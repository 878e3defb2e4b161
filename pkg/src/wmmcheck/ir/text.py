"""Line-oriented text format for programs.

Grammar (one item per line, ``//`` starts a comment line)::

    program <name>
    global <name> = <value>
    object <name> { <field>=<value>, ... }
    numa <node> <node> ...
    point <id> <kind> <function> <source-tag> "<snippet>"
    thread <tid>:
      <instruction>
    assert <global> == <int>

Values are integers, ``null`` or ``&object``. Registers are written ``%r``,
locations ``%r.field``, ``object.field`` or ``global``. Shared accesses take a
mode suffix ``@rlx|@acq|@rel|@sc``, an optional barrier point ``#<id>`` and an
optional source tag ``[file:line]``::

    %r = load LOC @m             store LOC, OP @m
    %r = swap LOC, OP @m         %r = cas LOC, OP, OP @m
    %r = cas.ok LOC, OP, OP @m   %r = await.cas LOC, OP, OP @m
    %r = await LOC != 0 @m       %r = await LOC == 0 @m
    %r = await LOC == OP @m      fence full @m | fence ww | fence compiler
    %r = <op> OP[, OP]           br OP, Lthen, Lelse
    jmp L                        L:
    %r = nondet                  %r = numa
    ret

Leading comment lines are kept so that ``print(parse(text)) == text`` for
any text this module prints.
"""

from __future__ import annotations

import json
import re

from .core import (
    COMPUTE_OPS,
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
)


class ParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


# ---------------------------------------------------------------------------
# printing
# ---------------------------------------------------------------------------


def _loc(loc: Loc) -> str:
    return str(loc)


def _suffix(ins) -> str:
    s = f" @{ins.mode.value}"
    if ins.point is not None:
        s += f" #{ins.point}"
    if ins.tag:
        s += f" [{ins.tag}]"
    return s


def format_instruction(ins: Instruction) -> str:
    if isinstance(ins, Label):
        return f"{ins.name}:"
    if isinstance(ins, Load):
        return f"%{ins.dst} = load {_loc(ins.loc)}{_suffix(ins)}"
    if isinstance(ins, Store):
        return f"store {_loc(ins.loc)}, {ins.value}{_suffix(ins)}"
    if isinstance(ins, Swap):
        return f"%{ins.dst} = swap {_loc(ins.loc)}, {ins.value}{_suffix(ins)}"
    if isinstance(ins, Cas):
        op = "cas.ok" if ins.returns_flag else "cas"
        return f"%{ins.dst} = {op} {_loc(ins.loc)}, {ins.expected}, {ins.desired}{_suffix(ins)}"
    if isinstance(ins, AwaitCas):
        return f"%{ins.dst} = await.cas {_loc(ins.loc)}, {ins.expected}, {ins.desired}{_suffix(ins)}"
    if isinstance(ins, Await):
        if ins.pred is Pred.EQ:
            cond = f"== {ins.arg}"
        else:
            cond = ins.pred.value
        return f"%{ins.dst} = await {_loc(ins.loc)} {cond}{_suffix(ins)}"
    if isinstance(ins, Fence):
        if ins.kind is FenceKind.FULL:
            return f"fence full{_suffix(ins)}"
        tag = f" [{ins.tag}]" if ins.tag else ""
        return f"fence {ins.kind.value}{tag}"
    if isinstance(ins, Compute):
        return f"%{ins.dst} = {ins.op} " + ", ".join(str(a) for a in ins.args)
    if isinstance(ins, Branch):
        return f"br {ins.cond}, {ins.then}, {ins.orelse}"
    if isinstance(ins, Jump):
        return f"jmp {ins.target}"
    if isinstance(ins, Nondet):
        return f"%{ins.dst} = nondet"
    if isinstance(ins, NumaNode):
        return f"%{ins.dst} = numa"
    if isinstance(ins, Return):
        return "ret"
    raise TypeError(f"not an instruction: {ins!r}")


def format_program(program: Program) -> str:
    lines: list[str] = [f"// {c}" if c else "//" for c in program.notes]
    if program.name:
        lines.append(f"program {program.name}")
    for name, init in program.globals:
        lines.append(f"global {name} = {init}")
    for obj in program.objects:
        fields = ", ".join(f"{f}={v}" for f, v in obj.fields)
        lines.append(f"object {obj.name} {{ {fields} }}")
    if program.numa:
        lines.append("numa " + " ".join(str(n) for n in program.numa))
    for p in program.points:
        if not p.source_tag or re.search(r"\s", p.source_tag):
            raise ValueError(f"point {p.id}: source tag {p.source_tag!r} must be non-empty without whitespace")
        lines.append(f"point {p.id} {p.kind.value} {p.function} {p.source_tag} {json.dumps(p.snippet)}")
    for t in program.threads:
        lines.append(f"thread {t.tid}:")
        for ins in t.code:
            text = format_instruction(ins)
            lines.append(text if isinstance(ins, Label) else "  " + text)
    for a in program.assertions:
        lines.append(f"assert {a.name} == {a.value}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_SUFFIX = re.compile(r"\s*@(?P<mode>rlx|acq|rel|sc)(?:\s+#(?P<point>\d+))?(?:\s+\[(?P<tag>[^\]]*)\])?\s*$")
_TAG_ONLY = re.compile(r"\s*\[(?P<tag>[^\]]*)\]\s*$")


def parse_value(tok: str, lineno: int = 0) -> Operand:
    tok = tok.strip()
    if tok == "null":
        return NULL
    if tok.startswith("&") and re.fullmatch(_IDENT, tok[1:]):
        return ObjRef(tok[1:])
    if tok.startswith("%") and re.fullmatch(_IDENT, tok[1:]):
        return Reg(tok[1:])
    if re.fullmatch(r"-?\d+", tok):
        return Const(int(tok))
    raise ParseError(lineno, f"bad operand {tok!r}")


def _init_value(tok: str, lineno: int):
    v = parse_value(tok, lineno)
    if isinstance(v, Reg):
        raise ParseError(lineno, "registers cannot initialize cells")
    return v


def parse_loc(tok: str, lineno: int = 0) -> Loc:
    tok = tok.strip()
    m = re.fullmatch(rf"(%?{_IDENT})\.({_IDENT})", tok)
    if m:
        base, fld = m.groups()
        return Loc(Reg(base[1:]) if base.startswith("%") else ObjName(base), fld)
    if re.fullmatch(_IDENT, tok):
        return Loc(None, tok)
    raise ParseError(lineno, f"bad location {tok!r}")


def _split_suffix(body: str, lineno: int) -> tuple[str, Mode, int | None, str | None]:
    m = _SUFFIX.search(body)
    if not m:
        raise ParseError(lineno, "shared access needs a mode suffix (@rlx|@acq|@rel|@sc)")
    point = int(m.group("point")) if m.group("point") else None
    return body[: m.start()], Mode(m.group("mode")), point, m.group("tag")


def _args(text: str, n: int, lineno: int) -> list[str]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != n or not all(parts):
        raise ParseError(lineno, f"expected {n} comma-separated arguments, got {text!r}")
    return parts


def parse_instruction(line: str, lineno: int = 0) -> Instruction:
    text = line.strip()
    if re.fullmatch(rf"{_IDENT}:", text):
        return Label(text[:-1])
    if text == "ret":
        return Return()
    m = re.fullmatch(rf"jmp ({_IDENT})", text)
    if m:
        return Jump(m.group(1))
    m = re.fullmatch(rf"br (\S+), ({_IDENT}), ({_IDENT})", text)
    if m:
        return Branch(parse_value(m.group(1), lineno), m.group(2), m.group(3))
    if text.startswith("fence "):
        rest = text[len("fence "):]
        if rest.startswith("full"):
            _, mode, point, tag = _split_suffix(rest, lineno)
            return Fence(FenceKind.FULL, mode, point, tag)
        kind, _, tail = rest.partition(" ")
        tag = None
        if tail:
            tm = _TAG_ONLY.fullmatch(" " + tail)
            if not tm:
                raise ParseError(lineno, f"bad fence {text!r}")
            tag = tm.group("tag")
        try:
            fk = FenceKind(kind)
        except ValueError:
            raise ParseError(lineno, f"unknown fence kind {kind!r}") from None
        return Fence(fk, Mode.SC, None, tag)
    if text.startswith("store "):
        body, mode, point, tag = _split_suffix(text[len("store "):], lineno)
        loc, val = _args(body, 2, lineno)
        return Store(parse_loc(loc, lineno), parse_value(val, lineno), mode, point, tag)
    m = re.fullmatch(rf"%({_IDENT}) = (\S+)(?: (.*))?", text)
    if not m:
        raise ParseError(lineno, f"cannot parse {text!r}")
    dst, op, rest = m.group(1), m.group(2), m.group(3) or ""
    if op == "nondet" and not rest:
        return Nondet(dst)
    if op == "numa" and not rest:
        return NumaNode(dst)
    if op == "load":
        body, mode, point, tag = _split_suffix(rest, lineno)
        return Load(dst, parse_loc(body, lineno), mode, point, tag)
    if op == "swap":
        body, mode, point, tag = _split_suffix(rest, lineno)
        loc, val = _args(body, 2, lineno)
        return Swap(dst, parse_loc(loc, lineno), parse_value(val, lineno), mode, point, tag)
    if op in ("cas", "cas.ok", "await.cas"):
        body, mode, point, tag = _split_suffix(rest, lineno)
        loc, exp, des = _args(body, 3, lineno)
        args = (dst, parse_loc(loc, lineno), parse_value(exp, lineno), parse_value(des, lineno), mode, point, tag)
        if op == "await.cas":
            return AwaitCas(*args)
        return Cas(*args, returns_flag=(op == "cas.ok"))
    if op == "await":
        body, mode, point, tag = _split_suffix(rest, lineno)
        am = re.fullmatch(r"(\S+) (!=|==) (\S+)", body.strip())
        if not am:
            raise ParseError(lineno, f"bad await {text!r}")
        loc, cmp, arg = am.groups()
        if cmp == "!=":
            if arg != "0":
                raise ParseError(lineno, "await supports only '!= 0'")
            return Await(dst, parse_loc(loc, lineno), Pred.NONZERO, None, mode, point, tag)
        if arg == "0":
            return Await(dst, parse_loc(loc, lineno), Pred.ZERO, None, mode, point, tag)
        return Await(dst, parse_loc(loc, lineno), Pred.EQ, parse_value(arg, lineno), mode, point, tag)
    if op in COMPUTE_OPS:
        args = tuple(parse_value(a, lineno) for a in _args(rest, COMPUTE_OPS[op], lineno))
        return Compute(dst, op, args)
    raise ParseError(lineno, f"unknown operation {op!r}")


def parse_program(text: str) -> Program:
    notes: list[str] = []
    name = ""
    globals_: list = []
    objects: list[ObjectDecl] = []
    numa: tuple[int, ...] = ()
    points: list[PointDecl] = []
    threads: list[Thread] = []
    assertions: list[Assertion] = []
    cur_tid: int | None = None
    cur_code: list[Instruction] = []
    seen_content = False

    def close_thread():
        nonlocal cur_tid, cur_code
        if cur_tid is not None:
            threads.append(Thread(cur_tid, tuple(cur_code)))
        cur_tid, cur_code = None, []

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("//"):
            if not seen_content:
                notes.append(stripped[2:].removeprefix(" "))
            continue
        seen_content = True
        if cur_tid is not None and (raw.startswith(" ") or re.fullmatch(rf"{_IDENT}:", stripped)) \
                and not stripped.startswith("thread "):
            cur_code.append(parse_instruction(stripped, lineno))
            continue
        head, _, rest = stripped.partition(" ")
        if head == "program":
            name = rest.strip()
        elif head == "global":
            m = re.fullmatch(rf"({_IDENT}) = (\S+)", rest)
            if not m:
                raise ParseError(lineno, f"bad global {stripped!r}")
            globals_.append((m.group(1), _init_value(m.group(2), lineno)))
        elif head == "object":
            m = re.fullmatch(rf"({_IDENT}) \{{(.*)\}}", rest)
            if not m:
                raise ParseError(lineno, f"bad object {stripped!r}")
            fields = []
            for item in filter(None, (s.strip() for s in m.group(2).split(","))):
                fm = re.fullmatch(rf"({_IDENT})=(\S+)", item)
                if not fm:
                    raise ParseError(lineno, f"bad field {item!r}")
                fields.append((fm.group(1), _init_value(fm.group(2), lineno)))
            objects.append(ObjectDecl(m.group(1), tuple(fields)))
        elif head == "numa":
            try:
                numa = tuple(int(x) for x in rest.split())
            except ValueError:
                raise ParseError(lineno, f"bad numa map {rest!r}") from None
        elif head == "point":
            m = re.fullmatch(r"(\d+) (\w+) (\S+) (\S+) (\".*\")", rest)
            if not m:
                raise ParseError(lineno, f"bad point {stripped!r}")
            try:
                kind = OpKind(m.group(2))
                snippet = json.loads(m.group(5))
            except ValueError as exc:
                raise ParseError(lineno, str(exc)) from None
            points.append(PointDecl(int(m.group(1)), kind, m.group(3), m.group(4), snippet))
        elif head == "thread":
            m = re.fullmatch(r"(\d+):", rest)
            if not m:
                raise ParseError(lineno, f"bad thread header {stripped!r}")
            close_thread()
            cur_tid = int(m.group(1))
        elif head == "assert":
            close_thread()
            m = re.fullmatch(rf"({_IDENT}) == (-?\d+)", rest)
            if not m:
                raise ParseError(lineno, f"bad assertion {stripped!r}")
            assertions.append(Assertion(m.group(1), int(m.group(2))))
        else:
            raise ParseError(lineno, f"unexpected line {stripped!r}")
    close_thread()
    return Program(
        globals=tuple(globals_),
        objects=tuple(objects),
        points=tuple(points),
        threads=tuple(threads),
        assertions=tuple(assertions),
        numa=numa,
        name=name,
        notes=tuple(notes),
    )


__all__ = [
    "ParseError",
    "format_instruction",
    "format_program",
    "parse_instruction",
    "parse_loc",
    "parse_program",
    "parse_value",
]
