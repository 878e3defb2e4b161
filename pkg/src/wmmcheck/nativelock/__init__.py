"""Native CNA lock (C11 atomics) plus a pthread stress harness.

The lock lives in ``cnalock.h``; ``stress.c`` drives it. Both are compiled on
demand with the system C compiler into a per-user cache directory.
"""

from __future__ import annotations

import hashlib
import os
import re
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..ir.core import Mode

HEADER = "cnalock.h"
HARNESS = "stress.c"

_ORDERS = {
    "memory_order_relaxed": Mode.RLX,
    "memory_order_acquire": Mode.ACQ,
    "memory_order_release": Mode.REL,
    "memory_order_seq_cst": Mode.SC,
}


class NativeBuildError(RuntimeError):
    pass


@dataclass(frozen=True)
class StressRun:
    counter: int
    expected: int
    anomalies: int
    mode: str
    max_gap: int

    @property
    def line(self) -> str:
        return f"counter={self.counter} expected={self.expected} anomalies={self.anomalies} mode={self.mode}"


def source_text(name: str) -> str:
    return resources.files(__name__).joinpath(name).read_text()


def compiler() -> str | None:
    for cc in (os.environ.get("CC"), "cc", "gcc", "clang"):
        if cc and shutil.which(cc):
            return cc
    return None


def _cache_dir() -> Path:
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    d = Path(base) / "wmmcheck"
    try:
        d.mkdir(parents=True, exist_ok=True)
        return d
    except OSError:
        d = Path(tempfile.gettempdir()) / "wmmcheck-cache"
        d.mkdir(parents=True, exist_ok=True)
        return d


def build(*, buggy: bool = False, sanitize: str | None = None, opt: str = "-O2") -> Path:
    """Compile the harness; returns the executable path (cached by content)."""
    cc = compiler()
    if cc is None:
        raise NativeBuildError("no C compiler found (set CC)")
    flags = [opt, "-std=c11", "-pthread"]
    if buggy:
        flags.append("-DCNA_BUGGY")
    if sanitize:
        flags += [f"-fsanitize={sanitize}", "-g"]
    header, harness = source_text(HEADER), source_text(HARNESS)
    key = hashlib.sha256("\0".join([cc, *flags, header, harness]).encode()).hexdigest()[:16]
    out = _cache_dir() / f"cna-stress-{key}"
    if out.exists():
        return out
    with tempfile.TemporaryDirectory() as tmp:
        for name, text in ((HEADER, header), (HARNESS, harness)):
            Path(tmp, name).write_text(text)
        exe = Path(tmp, "stress")
        proc = subprocess.run([cc, *flags, "-o", str(exe), str(Path(tmp, HARNESS))],
                              capture_output=True, text=True)
        if proc.returncode != 0:
            raise NativeBuildError(proc.stderr.strip() or "compilation failed")
        shutil.copy2(exe, out)
    return out


_LINE = re.compile(r"counter=(\d+) expected=(\d+) anomalies=(-?\d+) mode=(\w+)")
_GAP = re.compile(r"# max_gap=(\d+)")


def parse_output(text: str) -> list[StressRun]:
    runs = []
    pending = None
    for line in text.splitlines():
        m = _LINE.fullmatch(line.strip())
        if m:
            pending = [int(m[1]), int(m[2]), int(m[3]), m[4]]
            continue
        g = _GAP.fullmatch(line.strip())
        if g and pending is not None:
            runs.append(StressRun(*pending, max_gap=int(g[1])))
            pending = None
    return runs


def stress(n_threads: int, iterations: int, mode: str = "verified", runs: int = 1, *,
           timeout: float | None = None, sanitize: str | None = None) -> list[StressRun]:
    """Run the harness ``runs`` times; one StressRun per run."""
    if n_threads < 1:
        raise ValueError("n_threads must be >= 1")
    if mode not in ("verified", "buggy"):
        raise ValueError(f"unknown mode {mode!r}")
    exe = build(buggy=mode == "buggy", sanitize=sanitize)
    proc = subprocess.run([str(exe), str(n_threads), str(iterations), str(runs)],
                          capture_output=True, text=True, timeout=timeout)
    got = parse_output(proc.stdout)
    if len(got) != runs:
        raise RuntimeError(f"harness produced {len(got)} of {runs} results: {proc.stderr.strip()}")
    if sanitize and proc.returncode != 0 and mode == "verified" and all(r.anomalies == 0 for r in got):
        raise RuntimeError(f"sanitizer reported problems:\n{proc.stderr}")
    return got


# ---------------------------------------------------------------------------
# ordering audit
# ---------------------------------------------------------------------------


def _macros(text: str, buggy: bool) -> dict[str, str]:
    """``#define NAME memory_order_x`` values, honouring the CNA_BUGGY switch."""
    out: dict[str, str] = {}
    active = [True]
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("#ifdef CNA_BUGGY"):
            active.append(buggy)
        elif s.startswith("#ifndef CNA_BUGGY"):
            active.append(not buggy)
        elif s.startswith("#ifdef") or s.startswith("#ifndef") or s.startswith("#if "):
            active.append(True)
        elif s.startswith("#else"):
            active[-1] = not active[-1] if len(active) > 1 else active[-1]
        elif s.startswith("#endif"):
            if len(active) > 1:
                active.pop()
        elif s.startswith("#define") and all(active):
            parts = s.split()
            if len(parts) >= 3 and parts[2] in _ORDERS:
                out[parts[1]] = parts[2]
    return out


def annotated_modes(*, buggy: bool = False) -> dict[str, Mode]:
    """Ordering of every atomic access in the header, keyed ``cnalock.h:<line>``.

    For compare-and-swap the success ordering is taken; the failure ordering
    must not be stronger.
    """
    text = source_text(HEADER)
    macros = _macros(text, buggy)
    names = "|".join(map(re.escape, [*_ORDERS, *macros]))
    pat = re.compile(rf"atomic_\w+_explicit\(.*?\b({names})\b")
    out: dict[str, Mode] = {}
    for no, line in enumerate(text.splitlines(), 1):
        if "#define" in line:
            continue
        m = pat.search(line)
        if m:
            order = macros.get(m[1], m[1])
            out[f"{HEADER}:{no}"] = _ORDERS[order]
    return out


__all__ = [
    "NativeBuildError",
    "StressRun",
    "annotated_modes",
    "build",
    "compiler",
    "parse_output",
    "source_text",
    "stress",
]
