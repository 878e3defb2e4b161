"""Concurrent-program representation shared by every other module."""

from .builder import CodeBuilder, PointTable, build_client, default_numa, straight_line
from .core import (
    MODE_ORDER,
    NULL,
    Assertion,
    Assignment,
    AssignmentError,
    Await,
    AwaitCas,
    BarrierPoint,
    Branch,
    Cas,
    Compute,
    Const,
    Diagnostic,
    Fence,
    FenceKind,
    Instruction,
    Jump,
    Label,
    Load,
    Loc,
    Mode,
    Nondet,
    NullRef,
    NumaNode,
    ObjectDecl,
    ObjName,
    ObjRef,
    OpKind,
    PointDecl,
    Pred,
    Program,
    Reg,
    Return,
    Store,
    Swap,
    Thread,
    apply_assignment,
    assignment_by_tag,
    current_assignment,
    list_barrier_points,
    one_step_down,
    op_kind,
    uniform_assignment,
    valid_modes,
    validate,
)
from .text import ParseError, format_instruction, format_program, parse_program

__all__ = [
    "MODE_ORDER", "NULL", "Assertion", "Assignment", "AssignmentError", "Await",
    "AwaitCas", "BarrierPoint", "Branch", "Cas", "CodeBuilder", "Compute", "Const",
    "Diagnostic", "Fence", "FenceKind", "Instruction", "Jump", "Label", "Load", "Loc",
    "Mode", "Nondet", "NullRef", "NumaNode", "ObjName", "ObjRef", "ObjectDecl", "OpKind",
    "ParseError", "PointDecl", "PointTable", "Pred", "Program", "Reg", "Return", "Store",
    "Swap", "Thread", "apply_assignment", "assignment_by_tag", "build_client",
    "current_assignment", "default_numa", "format_instruction", "format_program",
    "list_barrier_points", "one_step_down", "op_kind", "parse_program", "straight_line",
    "uniform_assignment", "valid_modes", "validate",
]
