import numpy as np

from igasil.cli import main
from igasil.selftest import CHECKS, run_selftest


def test_selftest_passes_on_fresh_build(capsys):
    lines = []
    ok = run_selftest(out=lines.append)
    assert ok
    assert sum("PASS" in ln for ln in lines) == len(CHECKS)


def test_selftest_has_at_least_six_named_groups():
    names = [name for name, _ in CHECKS]
    assert len(names) >= 6
    assert len(set(names)) == len(names)


def test_selftest_detects_corrupted_payoff():
    bad = np.array([
        [11, -30, 0, -30],
        [-30, 7, 6, -10],
        [0, 6, 4, 0],       # corrupted (c,c) entry
        [-30, -10, 0, 0],
    ], dtype=float)
    lines = []
    ok = run_selftest(payoff_override=bad, out=lines.append)
    assert not ok
    assert any("payoff-table" in ln and "FAIL" in ln for ln in lines)


def test_cli_selftest_exit_code(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "all checks passed" in out


def test_replay_dump_does_not_mutate_run_dir(tmp_path, capsys):
    args = ["train", "--variant", "iac", "--out", str(tmp_path),
            "--episodes", "40", "--train.warmup", "10", "--train.window", "20",
            "--agent.batch", "8", "--net.hidden", "8"]
    assert main(args) == 0
    run_dir = next(tmp_path.glob("climbing-iac-*"))
    before = {p.name: p.read_bytes() for p in run_dir.glob("*.csv")}
    assert main(["replay-dump", "--run", str(run_dir), "--out",
                 str(tmp_path / "d.csv"), "--episodes", "2"]) == 0
    after = {p.name: p.read_bytes() for p in run_dir.glob("*.csv")}
    assert before == after
