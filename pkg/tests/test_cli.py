"""Command-line surface: exit codes, manifests, artifacts, determinism."""

import json

import pytest

from cfset.cli import main
from cfset.scenario import SCRIPT_NAME, bundled_script


def test_explore_clean_run(tmp_path, capsys):
    code = main(
        [
            "explore", "--workers", "1", "--keys", "1,2", "--ops", "1",
            "--sys-budget", "0", "--depth", "6", "--out", str(tmp_path),
        ]
    )
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["command"] == "explore"
    assert manifest["outcome"]["violations"] == 0
    assert manifest["outcome"]["states_visited"] > 1
    out = capsys.readouterr().out
    assert "0 violations" in out


def test_explore_depth_zero(tmp_path):
    code = main(
        ["explore", "--workers", "2", "--keys", "1", "--depth", "0", "--out", str(tmp_path)]
    )
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outcome"]["states_visited"] == 1


def test_replay_bundled_script(tmp_path, capsys):
    script = tmp_path / SCRIPT_NAME
    script.write_text(bundled_script())
    code = main(["replay", "--script", str(script), "--keys", "10,14,16,22"])
    assert code == 0
    out = capsys.readouterr().out
    assert "set={10,14,15,17,18,22}" in out  # the pre-rotation snapshot
    assert "set={10,18,22}" in out  # the final snapshot
    assert "regular=True" in out
    assert "confluent=13" in out  # mid-rotation summary line


def test_replay_empty_script(tmp_path, capsys):
    script = tmp_path / "empty.script"
    script.write_text("# nothing to do\n")
    assert main(["replay", "--script", str(script)]) == 0
    out = capsys.readouterr().out
    assert "set={}" in out and "regular=True" in out


def test_replay_corrupted_script(tmp_path, capsys):
    lines = bundled_script().splitlines()
    lines[5], lines[9] = lines[9], lines[5]  # swap two steps arbitrarily
    script = tmp_path / "broken.script"
    script.write_text("\n".join(lines))
    code = main(["replay", "--script", str(script)])
    assert code == 1
    err = capsys.readouterr().err
    assert "replay failed" in err and "script line" in err


def test_walk_deterministic_artifacts(tmp_path):
    args = [
        "walk", "--seed", "5", "--walks", "4", "--len", "18",
        "--workers", "2", "--keys", "1,2",
    ]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for i in range(4):
        a = (tmp_path / "a" / f"walk-{i:04d}.trace").read_text()
        b = (tmp_path / "b" / f"walk-{i:04d}.trace").read_text()
        assert a == b
    lin_a = (tmp_path / "a" / "linearizations.log").read_text()
    assert lin_a == (tmp_path / "b" / "linearizations.log").read_text()
    assert "lin" in lin_a and "sequential:" in lin_a


def test_stress_cli(tmp_path, capsys):
    code = main(
        [
            "stress", "--threads", "2", "--ops", "40", "--keys", "4",
            "--seed", "1", "--out", str(tmp_path),
        ]
    )
    assert code == 0
    history = (tmp_path / "history.log").read_text().splitlines()
    assert history and all(len(line.split()) >= 5 for line in history)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["outcome"]["passed"] is True
    assert "verdict pass" in capsys.readouterr().out


def test_stress_maintenance_off(tmp_path):
    code = main(
        [
            "stress", "--threads", "1", "--ops", "30", "--keys", "3",
            "--maintenance", "off", "--seed", "4", "--out", str(tmp_path),
        ]
    )
    assert code == 0


def test_report_for_explore(tmp_path):
    out = tmp_path / "run"
    assert main(
        ["explore", "--workers", "1", "--keys", "1", "--ops", "1",
         "--sys-budget", "0", "--depth", "6", "--out", str(out)]
    ) == 0
    rep = tmp_path / "rep"
    assert main(["report", "--manifest", str(out / "manifest.json"), "--out", str(rep)]) == 0
    assert (rep / "depth_profile.csv").exists()
    assert (rep / "depth_profile.png").stat().st_size > 0


def test_report_for_stress(tmp_path):
    out = tmp_path / "run"
    assert main(
        ["stress", "--threads", "2", "--ops", "30", "--keys", "3",
         "--seed", "2", "--out", str(out)]
    ) == 0
    rep = tmp_path / "rep"
    assert main(["report", "--manifest", str(out / "manifest.json"), "--out", str(rep)]) == 0
    assert (rep / "stress_summary.csv").exists()
    assert (rep / "stress_ops.png").stat().st_size > 0


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["explore", "--definitely-not-a-flag"])
    assert exc.value.code == 2


def test_thread_fault_exit_code(tmp_path, monkeypatch):
    import cfset.cli as cli

    def boom(config):
        raise RuntimeError("synthetic fault")

    monkeypatch.setattr(cli, "stress", boom)
    code = main(["stress", "--threads", "1", "--ops", "1", "--out", str(tmp_path)])
    assert code == 3


def test_missing_script_is_usage_error(tmp_path):
    assert main(["replay", "--script", str(tmp_path / "nope.script")]) == 2
