import json

import pytest

from balloonscope.cli import main
from balloonscope.harness import calibrate_from_scene


@pytest.fixture(scope="module")
def quick_yaml(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "quick.yaml"
    path.write_text("""
scene:
  noise_amplitude: 0.0
experiments:
  step:
    command_time_s: 0.2
    duration_s: 5.0
""", encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def saved_calibration(tmp_path_factory, clean_scene, roi):
    from balloonscope.config import CalibrationSettings

    calibration, _ = calibrate_from_scene(clean_scene, roi, CalibrationSettings(), seed=0)
    path = tmp_path_factory.mktemp("cal") / "cal.json"
    calibration.save(path)
    return path


def test_sweep_subcommand(tmp_path, capsys):
    code = main(["sweep", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] decoupling" in out
    assert (tmp_path / "sweep_table.csv").exists()


def test_calibrate_subcommand(tmp_path, capsys):
    code = main(["calibrate", "--seed", "5", "--out", str(tmp_path),
                 "--save", str(tmp_path / "cal.json")])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] calibration_rmse" in out
    saved = json.loads((tmp_path / "cal.json").read_text())
    assert saved["monotone"] is True


def test_step_subcommand_with_saved_calibration(tmp_path, capsys, quick_yaml, saved_calibration):
    code = main(["step", "--config", str(quick_yaml), "--seed", "2",
                 "--out", str(tmp_path), "--calibration", str(saved_calibration)])
    out = capsys.readouterr().out
    assert code == 0
    assert "[PASS] settling_time" in out
    assert (tmp_path / "step_trace.csv").exists()


def test_replay_subcommand(tmp_path, capsys, quick_yaml, saved_calibration):
    script = tmp_path / "ops.csv"
    script.write_text("time_s,kind,value\n0.2,set_angle,35\n", encoding="utf-8")
    code = main(["replay", "--config", str(quick_yaml), "--commands", str(script),
                 "--duration", "4.0", "--out", str(tmp_path),
                 "--calibration", str(saved_calibration)])
    assert code == 0
    assert (tmp_path / "replay_trace.csv").exists()
    assert "[PASS] run_completed" in capsys.readouterr().out


def test_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("control:\n  camera_hz: 30\n", encoding="utf-8")
    code = main(["sweep", "--config", str(bad)])
    assert code == 2
    assert "control.camera_hz" in capsys.readouterr().err


def test_missing_command_file_exits_2(tmp_path, capsys):
    code = main(["replay", "--commands", str(tmp_path / "nope.csv")])
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_failing_requirement_exits_1(tmp_path, capsys):
    coupled = tmp_path / "coupled.yaml"
    coupled.write_text("""
plant:
  response_anchors:
    - [0.0, 4.6, 0.0]
    - [0.5, 6.0, 10.0]
    - [2.0, 8.5, 60.0]
    - [4.0, 9.5, 100.0]
""", encoding="utf-8")
    code = main(["sweep", "--config", str(coupled)])
    assert code == 1
    assert "[FAIL] decoupling" in capsys.readouterr().out
