"""CLI subcommands and exit codes (0 ok, 2 diverged, 3 protocol, 4 config)."""

import dataclasses
import json

import pytest

from vilbench.cli import main
from vilbench.scenario import ActorSpec, manual_drive_scenario, scenario_to_json
from vilbench.worldcore import ActorKind


def test_run_and_report_and_replay(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["run", "--scenario", "emergency_brake", "--seed", "5",
                 "--out", out]) == 0
    text = capsys.readouterr().out
    assert "emergency-brake latency" in text

    assert main(["report", out, "--settle", "1.0", "--json"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["scenario_name"] == "EmergencyBrake"
    assert doc["latency"]["count"] == 1

    assert main(["replay", out]) == 0
    assert "byte-identical" in capsys.readouterr().out


def test_camera_fps_and_tick_overrides(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["run", "--scenario", "emergency_brake", "--camera-fps", "2",
                 "--out", out]) == 0
    sidecar = json.loads((tmp_path / "run" / "run.json").read_text())
    assert sidecar["config"]["scenario"]["camera"]["fps"] == 2.0


def test_diverged_run_exits_2(tmp_path, capsys):
    sc = manual_drive_scenario(duration=30.0)
    script = (dataclasses.replace(sc.driver_script[0], throttle=1.0),)
    sc = dataclasses.replace(sc, driver_script=script,
                             actors=(ActorSpec(ActorKind.LEAD_VEHICLE, 12.0, 0.0),))
    f = tmp_path / "crash.json"
    f.write_text(json.dumps(scenario_to_json(sc)))
    assert main(["run", "--scenario", str(f)]) == 2


def test_config_error_exits_4(capsys):
    assert main(["run", "--scenario", "no_such_scenario"]) == 4
    assert "config error" in capsys.readouterr().err


def test_tampered_replay_exits_2(tmp_path, capsys):
    out = str(tmp_path / "run")
    assert main(["run", "--scenario", "manual_drive", "--out", out]) == 0
    capsys.readouterr()
    csv = tmp_path / "run" / "ticks.csv"
    lines = csv.read_text().splitlines()
    parts = lines[50].split(",")
    parts[5] = "99.9"
    lines[50] = ",".join(parts)
    csv.write_text("\n".join(lines) + "\n")
    assert main(["replay", out]) == 2
    assert "DIVERGENCE" in capsys.readouterr().out
