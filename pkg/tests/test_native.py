from __future__ import annotations

import subprocess

import pytest

from wmmcheck.ir import Mode, list_barrier_points
from wmmcheck.nativelock import (
    NativeBuildError,
    annotated_modes,
    build,
    compiler,
    parse_output,
    stress,
)
from wmmcheck.programs import FIG2_MODES, SUCC_SPIN_TAG, buggy_assignment, build_cna, fig2_assignment

needs_cc = pytest.mark.skipif(compiler() is None, reason="no C compiler")


def _by_tag(program, assignment):
    return {p.source_tag: m for p, m in zip(list_barrier_points(program), assignment)}


def test_native_orders_match_model(cna2):
    assert annotated_modes() == _by_tag(cna2, fig2_assignment(cna2))


def test_buggy_native_orders_match_model(cna2):
    assert annotated_modes(buggy=True) == _by_tag(cna2, buggy_assignment(cna2))
    assert annotated_modes(buggy=True)[SUCC_SPIN_TAG] is Mode.RLX


def test_every_named_point_is_annotated():
    modes = annotated_modes()
    assert all(modes[tag] is m for tag, m in FIG2_MODES.items())
    assert {p.source_tag for p in list_barrier_points(build_cna(1))} == set(modes)


def test_parse_output():
    text = "counter=10 expected=12 anomalies=2 mode=buggy\n# max_gap=3\n"
    (run,) = parse_output(text)
    assert (run.counter, run.expected, run.anomalies, run.mode, run.max_gap) == (10, 12, 2, "buggy", 3)
    assert run.line.startswith("counter=10 expected=12 anomalies=2 mode=buggy")


def test_bad_arguments():
    with pytest.raises(ValueError):
        stress(0, 10)
    with pytest.raises(ValueError):
        stress(1, 10, mode="fast")


@needs_cc
def test_single_thread_counts_exactly():
    (run,) = stress(1, 5000)
    assert run.counter == run.expected == 5000 and run.anomalies == 0


@needs_cc
def test_small_contended_run():
    runs = stress(4, 20000, runs=2)
    assert [r.counter for r in runs] == [80000, 80000]
    # no thread starves: gaps stay well below the total number of acquisitions
    assert all(r.max_gap < 80000 for r in runs)


@needs_cc
def test_buggy_mode_is_informational():
    (run,) = stress(2, 5000, mode="buggy")
    assert run.mode == "buggy" and run.anomalies >= 0


@needs_cc
def test_harness_rejects_bad_usage():
    exe = build()
    assert subprocess.run([str(exe)], capture_output=True).returncode == 64


@needs_cc
def test_thread_sanitizer_is_clean():
    try:
        build(sanitize="thread")
    except NativeBuildError as exc:
        pytest.skip(f"thread sanitizer unavailable: {exc}")
    (run,) = stress(4, 2000, sanitize="thread")
    assert run.anomalies == 0
