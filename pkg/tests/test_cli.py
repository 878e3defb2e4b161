from __future__ import annotations

import json

import pytest

from wmmcheck.cli import main

NEVER_SIGNALED = """\
program wait
global flag = 0
point 1 await T0 wait ""
thread 0:
  %v = await flag != 0 @acq #1
  ret
"""

UNDEFINED_REG = """\
program bad
global x = 0
thread 0:
  store x, %r @rlx
  ret
"""


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_help_exits_zero(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--help"])
    assert exc.value.code == 0
    assert "check" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["check"], ["check", "cna", "--threads", "0"],
                                  ["check", "cna", "--model", "tso"]])
def test_usage_errors_exit_64(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 64


def test_pass_exit_zero(capsys):
    code, out, _ = run(capsys, "check", "cna", "--threads", "2")
    assert code == 0
    assert out.startswith("Pass (")


def test_assertion_violation_exit_one(capsys):
    code, out, err = run(capsys, "check", "cna-buggy")
    assert code == 1
    assert out.startswith("AssertionViolation")
    assert "failed: v == 2 (got 1)" in err
    assert "reordered (program order vs commit order):" in err


def test_liveness_exit_two(capsys, tmp_path):
    f = tmp_path / "wait.ir"
    f.write_text(NEVER_SIGNALED)
    code, out, err = run(capsys, "check", str(f))
    assert code == 2
    assert "blocked: T0 await on flag" in err


def test_timeout_exit_three(capsys):
    code, out, _ = run(capsys, "check", "cna", "--threads", "3", "--timeout", "0.05")
    assert code == 3
    assert out.startswith("Timeout")


def test_invalid_program_exit_four(capsys, tmp_path):
    f = tmp_path / "bad.ir"
    f.write_text(UNDEFINED_REG)
    code, out, err = run(capsys, "check", str(f))
    assert code == 4
    assert "use-before-def" in err


def test_unknown_program_and_threads_misuse(capsys, tmp_path):
    assert run(capsys, "check", "no-such-program")[0] == 64
    assert run(capsys, "check", "MP", "--threads", "2")[0] == 64
    f = tmp_path / "wait.ir"
    f.write_text(NEVER_SIGNALED)
    assert run(capsys, "check", str(f), "--threads", "2")[0] == 64
    assert run(capsys, "check", "linux-cna", "--threads", "1")[0] == 64


def test_check_json(capsys, tmp_path):
    out = tmp_path / "v.json"
    run(capsys, "check", "cna", "--threads", "1", "--json", str(out))
    data = json.loads(out.read_text())
    assert data["verdict"] == "Pass" and data["exit_code"] == 0


def test_litmus_golden(capsys):
    code, out, _ = run(capsys, "litmus", "MP+rel/acq")
    assert code == 0
    assert out == (
        "MP+rel/acq   weak ok  r1=0,r2=0 r1=0,r2=1 r1=1,r2=1\n"
        "MP+rel/acq   sc   ok  r1=0,r2=0 r1=0,r2=1 r1=1,r2=1\n"
    )


def test_litmus_all_and_list(capsys):
    code, out, _ = run(capsys, "litmus")
    assert code == 0 and "MISMATCH" not in out and len(out.splitlines()) == 14
    code, out, _ = run(capsys, "litmus", "--list")
    assert out.split() == ["cna", "cna-buggy", "linux-cna", "MP", "MP+rel/acq", "SB", "SB+sc", "LB",
                           "LB+data-dep", "CoRR"]
    assert run(capsys, "litmus", "IRIW")[0] == 64


def test_optimize_report_and_json(capsys, tmp_path):
    js = tmp_path / "r.json"
    code, out, err = run(capsys, "optimize", "SB+sc", "--json", str(js))
    assert code == 0
    assert out.startswith("== SUMMARY ")
    assert "Barriers: 4\n" in out
    assert "START ssss #4" in err and "== CERTIFICATE" in err
    assert json.loads(js.read_text())["maximal"] is True


def test_optimize_rejects_bad_schedule(capsys):
    assert run(capsys, "optimize", "MP", "--growth", "1")[0] == 64
    assert run(capsys, "optimize", "MP", "--tau", "5", "--max-timeout", "1")[0] == 64


def test_optimize_failing_baseline_exit_one(capsys, tmp_path):
    f = tmp_path / "wait.ir"
    f.write_text(NEVER_SIGNALED)
    code, _, err = run(capsys, "optimize", str(f))
    assert code == 1
    assert "all-SC baseline does not pass: LivenessViolation" in err


def test_export(capsys, tmp_path):
    code, out, _ = run(capsys, "export", str(tmp_path / "out"))
    assert code == 0
    assert (tmp_path / "out" / "cna-4.ir").exists()
    assert len(out.splitlines()) == 13


def test_stress(capsys):
    from wmmcheck.nativelock import compiler

    if compiler() is None:
        pytest.skip("no C compiler")
    code, out, _ = run(capsys, "stress", "--threads", "2", "--iterations", "1000")
    assert code == 0
    assert out.startswith("counter=2000 expected=2000 anomalies=0 mode=verified")
    assert run(capsys, "stress", "--iterations", "-1")[0] == 64
