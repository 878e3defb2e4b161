"""Shipped programs: the CNA lock, its Linux variant and a litmus corpus."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Mapping, Sequence

from ..ir.text import format_program
from .cna import FIG2_MODES, SUCC_SPIN_TAG, build_cna, build_cna_buggy, buggy_assignment, fig2_assignment
from .linux_cna import build_linux_cna
from .litmus import LITMUS_NAMES, NamedProgram, litmus, litmus_corpus, project

LOCK_BUILTINS = ("cna", "cna-buggy", "linux-cna")


def cna(n_threads: int, numa_map: Mapping[int, int] | Sequence[int] | None = None) -> NamedProgram:
    return NamedProgram(f"cna-{n_threads}", build_cna(n_threads, numa_map))


def cna_buggy(n_threads: int = 2, numa_map: Mapping[int, int] | Sequence[int] | None = None) -> NamedProgram:
    return NamedProgram(f"cna-buggy-{n_threads}", build_cna_buggy(n_threads, numa_map))


def linux_cna(n_threads: int, numa_map: Mapping[int, int] | Sequence[int] | None = None) -> NamedProgram:
    return NamedProgram(f"linux-cna-{n_threads}", build_linux_cna(n_threads, numa_map))


def builtin_names() -> tuple[str, ...]:
    return LOCK_BUILTINS + LITMUS_NAMES


def builtin(name: str, n_threads: int | None = None) -> NamedProgram:
    """Resolve a builtin by name; lock programs need a thread count."""
    makers = {"cna": cna, "cna-buggy": cna_buggy, "linux-cna": linux_cna}
    if name in makers:
        defaults = {"cna": 2, "cna-buggy": 2, "linux-cna": 2}
        return makers[name](n_threads if n_threads is not None else defaults[name])
    if name in LITMUS_NAMES:
        return litmus(name)
    raise KeyError(f"unknown builtin {name!r}; known: {', '.join(builtin_names())}")


def export_set() -> list[NamedProgram]:
    """Everything written by :func:`export_programs`."""
    out = [cna(n) for n in (2, 3, 4)]
    out.append(cna_buggy(2))
    out += [linux_cna(n) for n in (2, 3)]
    out += litmus_corpus()
    return out


def file_name(named: NamedProgram) -> str:
    return re.sub(r"[^A-Za-z0-9_.+-]", "-", named.name) + ".ir"


def export_programs(directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for named in export_set():
        path = d / file_name(named)
        path.write_text(format_program(named.program))
        written.append(path)
    return written


__all__ = [
    "FIG2_MODES",
    "LITMUS_NAMES",
    "LOCK_BUILTINS",
    "NamedProgram",
    "SUCC_SPIN_TAG",
    "buggy_assignment",
    "build_cna",
    "build_cna_buggy",
    "build_linux_cna",
    "builtin",
    "builtin_names",
    "cna",
    "cna_buggy",
    "export_programs",
    "export_set",
    "fig2_assignment",
    "file_name",
    "linux_cna",
    "litmus",
    "litmus_corpus",
    "project",
]
