"""Validation experiments, trace metrics and requirement verdicts.

Each experiment drives the simulator the way the bench experiments drove the
physical rig, computes its metrics from the raw (unsmoothed) trace, and
scores them against the design targets:

    collapsed outer diameter  <= 5 mm        (delivery sheath)
    deployed face diameter    8 .. 11 mm     (optics need the dome)
    maximum bend              >= 60 deg
    working channel bore      >= 0.5 mm
    deployment decoupling     face >= 8 mm whenever the tip is bent
    mean steering rate        >= 10 deg/s
    settling time             <= 6 s for a rest-to-60-deg command
    steady tracking error     <= 2 deg
    disturbance recovery      back inside 2 deg within 5 s of a tool change

Every run writes a trace CSV and a metrics JSON into its output directory;
both are deterministic byte-for-byte for a fixed config and seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from balloonscope.config import CalibrationSettings, SimConfig
from balloonscope.control import Command, Trace, run_closed_loop
from balloonscope.estimation import Calibration, fit_calibration, smooth_trace
from balloonscope.imaging import RegionOfInterest, SceneModel, render_view, sense
from balloonscope.plant import tip_pose

TARGET_COLLAPSED_OD_MM = 5.0
TARGET_FACE_MIN_MM = 8.0
TARGET_FACE_MAX_MM = 11.0
TARGET_MAX_ANGLE_DEG = 60.0
TARGET_CHANNEL_BORE_MM = 0.5
TARGET_SETTLE_S = 6.0
TARGET_OVERSHOOT_DEG = 2.0
TARGET_RATE_DEG_S = 10.0
TARGET_TRACK_DEG = 2.0
TARGET_CAL_RMSE = 0.005

PASS = "PASS"
FAIL = "FAIL"
SKIP = "SKIP"


@dataclass(frozen=True)
class Verdict:
    requirement: str
    status: str
    detail: str

    def as_dict(self) -> dict:
        return {"requirement": self.requirement, "status": self.status, "detail": self.detail}


@dataclass
class ExperimentResult:
    name: str
    seed: int
    metrics: dict
    verdicts: list[Verdict]
    trace: Trace | None = None

    @property
    def passed(self) -> bool:
        return all(v.status != FAIL for v in self.verdicts)

    def metrics_json(self) -> str:
        payload = {
            "experiment": self.name,
            "seed": self.seed,
            "metrics": self.metrics,
            "verdicts": [v.as_dict() for v in self.verdicts],
        }
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def _check(requirement: str, ok: bool, detail: str) -> Verdict:
    return Verdict(requirement, PASS if ok else FAIL, detail)


# ---------------------------------------------------------------------------
# trace metrics


def settle_time_s(
    times: np.ndarray,
    angles: np.ndarray,
    command_time_s: float,
    target_deg: float,
    band_deg: float = TARGET_TRACK_DEG,
) -> float | None:
    """Time from the command until the angle enters the band for good.

    "For good" means it never leaves the band again within the trace, so a
    response that cuts through the band and overshoots out of it does not
    count as settled at the crossing.
    """
    after = times >= command_time_s - 1e-9
    t = times[after]
    in_band = np.abs(angles[after] - target_deg) <= band_deg
    if not in_band.size:
        return None
    # Last index that is out of band; settled from the next sample on.
    out = np.flatnonzero(~in_band)
    first_settled = 0 if out.size == 0 else out[-1] + 1
    if first_settled >= in_band.size:
        return None
    return float(t[first_settled] - command_time_s)


def overshoot_deg(
    times: np.ndarray, angles: np.ndarray, command_time_s: float, target_deg: float
) -> float:
    """Peak excursion past the target after the command (negative if never reached)."""
    after = times >= command_time_s - 1e-9
    return float(np.max(angles[after]) - target_deg)


def mean_rate_deg_s(
    times: np.ndarray,
    angles: np.ndarray,
    command_time_s: float,
    target_deg: float,
    band_deg: float = TARGET_TRACK_DEG,
) -> float | None:
    """Command magnitude divided by settling time."""
    settle = settle_time_s(times, angles, command_time_s, target_deg, band_deg)
    if settle is None or settle <= 0:
        return None
    before = times <= command_time_s + 1e-9
    start = float(angles[before][-1]) if np.any(before) else float(angles[0])
    return abs(target_deg - start) / settle


def max_error_after(
    times: np.ndarray, angles: np.ndarray, target_deg: float, from_time_s: float
) -> float:
    window = times >= from_time_s - 1e-9
    return float(np.max(np.abs(angles[window] - target_deg)))


def recovery_time_s(
    times: np.ndarray,
    angles: np.ndarray,
    event_time_s: float,
    target_deg: float,
    band_deg: float,
    until_time_s: float,
) -> float | None:
    """Settle time within a bounded phase (event .. until)."""
    phase = (times >= event_time_s - 1e-9) & (times < until_time_s - 1e-9)
    return settle_time_s(times[phase], angles[phase], event_time_s, target_deg, band_deg)


# ---------------------------------------------------------------------------
# output helpers


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_common(result: ExperimentResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"{result.name}_metrics.json").write_text(result.metrics_json(), encoding="utf-8")
    if result.trace is not None:
        result.trace.save_csv(out / f"{result.name}_trace.csv")


def _write_smoothed(trace: Trace, name: str, out_dir) -> None:
    """Companion CSV with the smoothed estimate, for plotting only."""
    est = trace.estimated_angles()
    if est.size < 7 or np.any(~np.isfinite(est)):
        return
    smoothed = smooth_trace(est)
    rows = list(zip(trace.times(), est, smoothed))
    write_csv(Path(out_dir) / f"{name}_smoothed.csv",
              ("time_s", "alpha_est_deg", "alpha_est_smoothed_deg"), rows)


# ---------------------------------------------------------------------------
# calibration sweep


def calibrate_from_scene(
    scene: SceneModel,
    roi: RegionOfInterest,
    settings: CalibrationSettings | None = None,
    seed: int = 0,
    min_pixels: int = 50,
) -> tuple[Calibration, list[tuple[float, float, float]]]:
    """Sweep the scene across the angle grid and fit the ratio calibration.

    Renders ``repeats`` seeded frames per grid angle and averages their
    ratios; averaging knocks the sensor noise down before the fit sees it.
    Returns the calibration and the (angle, mean ratio, ratio std) samples.
    """
    settings = settings or CalibrationSettings()
    samples = []
    for i, alpha in enumerate(settings.grid()):
        ratios = []
        for rep in range(settings.repeats):
            frame = render_view(scene, alpha, seed=[seed, i, rep])
            ratios.append(sense(frame, roi, min_pixels).ratio)
        samples.append((alpha, float(np.mean(ratios)), float(np.std(ratios))))
    calibration = fit_calibration([(a, p) for a, p, _ in samples], settings.degree)
    return calibration, samples


# ---------------------------------------------------------------------------
# experiments


def run_sweep(config: SimConfig, out_dir=None) -> ExperimentResult:
    """Quasi-static volume sweep: response table, decoupling and geometry checks."""
    curve = config.plant.curve
    geo = config.plant.geometry
    step = config.sweep.probe_step_ml
    n = int(round(curve.max_volume_ml / step)) + 1
    volumes = np.linspace(0.0, curve.max_volume_ml, n)
    pairs = [curve.evaluate(v) for v in volumes]
    diameters = np.array([d for d, _ in pairs])
    angles = np.array([a for _, a in pairs])

    bent = angles > 1e-9
    decoupled = bool(np.all(diameters[bent] >= TARGET_FACE_MIN_MM - 1e-9))
    monotone_d = bool(np.all(np.diff(diameters) >= -1e-12))
    monotone_a = bool(np.all(np.diff(angles) >= -1e-12))
    deployed_d = curve.diameter(curve.deploy_volume_ml)
    max_angle = float(angles[-1])

    verdicts = [
        _check("collapsed_od", geo.collapsed_od_mm <= TARGET_COLLAPSED_OD_MM,
               f"{geo.collapsed_od_mm} mm collapsed vs {TARGET_COLLAPSED_OD_MM} mm budget"),
        _check("channel_bore", geo.channel_id_mm >= TARGET_CHANNEL_BORE_MM,
               f"{geo.channel_id_mm} mm bore vs {TARGET_CHANNEL_BORE_MM} mm minimum"),
        _check("face_diameter",
               TARGET_FACE_MIN_MM <= deployed_d <= TARGET_FACE_MAX_MM,
               f"{deployed_d:.2f} mm at deployment vs {TARGET_FACE_MIN_MM}-{TARGET_FACE_MAX_MM} mm"),
        _check("max_angle", max_angle >= TARGET_MAX_ANGLE_DEG,
               f"{max_angle:.1f} deg at full volume vs {TARGET_MAX_ANGLE_DEG} deg"),
        _check("decoupling", decoupled,
               "face at full size before any bending" if decoupled
               else "face below full size while bent"),
        _check("monotone_response", monotone_d and monotone_a,
               "diameter and angle both non-decreasing in volume"),
    ]
    metrics = {
        "probe_step_ml": step,
        "max_volume_ml": curve.max_volume_ml,
        "deploy_volume_ml": curve.deploy_volume_ml,
        "deployed_face_mm": deployed_d,
        "max_angle_deg": max_angle,
    }
    result = ExperimentResult("sweep", 0, metrics, verdicts)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        table_n = int(round(curve.max_volume_ml / config.sweep.table_step_ml)) + 1
        rows = []
        for v in np.linspace(0.0, curve.max_volume_ml, table_n):
            d, a = curve.evaluate(v)
            x, y, z = tip_pose(a, 0.0, geo)
            rows.append((float(v), d, a, x, y, z))
        write_csv(out / "sweep_table.csv",
                  ("volume_ml", "face_diameter_mm", "free_angle_deg",
                   "tip_x_mm", "tip_y_mm", "tip_z_mm"), rows)
        _write_common(result, out)
    return result


def run_calibration(
    config: SimConfig, seed: int = 0, out_dir=None, save_path=None
) -> tuple[ExperimentResult, Calibration]:
    """Calibration sweep experiment: fit, report quality, optionally save."""
    calibration, samples = calibrate_from_scene(
        config.scene, config.roi, config.calibration, seed, config.loop.min_channel_pixels
    )
    verdicts = [
        _check("calibration_rmse", calibration.rmse <= TARGET_CAL_RMSE,
               f"rmse {calibration.rmse:.6f} vs {TARGET_CAL_RMSE}"),
        _check("calibration_monotone", calibration.monotone,
               "fit strictly increasing over its bracket" if calibration.monotone
               else "fit reverses direction inside its bracket"),
    ]
    metrics = {
        "rmse": calibration.rmse,
        "bracket_deg": list(calibration.bracket_deg),
        "samples": len(samples),
        "repeats": config.calibration.repeats,
    }
    result = ExperimentResult("calibrate", seed, metrics, verdicts)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "calibration_samples.csv",
                  ("alpha_deg", "ratio_mean", "ratio_std"), samples)
        calibration.save(out / "calibration.json")
        _write_common(result, out)
    if save_path is not None:
        calibration.save(save_path)
    return result, calibration


def ensure_calibration(config: SimConfig, seed: int, source=None) -> Calibration:
    """Load a calibration file, or sweep a fresh one when source is None/"auto"."""
    if source is None or str(source) == "auto":
        calibration, _ = calibrate_from_scene(
            config.scene, config.roi, config.calibration, seed, config.loop.min_channel_pixels
        )
        return calibration
    return Calibration.load(source)


def run_step(
    config: SimConfig, seed: int = 0, out_dir=None, calibration: Calibration | None = None
) -> ExperimentResult:
    """Rest-to-target step response under closed-loop steering."""
    if calibration is None:
        calibration = ensure_calibration(config, seed)
    s = config.step
    commands = [Command(s.command_time_s, "set_angle", s.target_deg)]
    trace = run_closed_loop(
        config.plant, config.scene, config.roi, calibration,
        commands, s.duration_s, config.loop, seed,
    )
    times, angles = trace.times(), trace.true_angles()
    settle = settle_time_s(times, angles, s.command_time_s, s.target_deg, s.settle_band_deg)
    over = overshoot_deg(times, angles, s.command_time_s, s.target_deg)
    rate = mean_rate_deg_s(times, angles, s.command_time_s, s.target_deg, s.settle_band_deg)
    track = max_error_after(times, angles, s.target_deg, s.duration_s - 1.0)
    verdicts = [
        _check("settling_time", settle is not None and settle <= TARGET_SETTLE_S,
               f"{'never settled' if settle is None else f'{settle:.2f} s'} vs {TARGET_SETTLE_S} s"),
        _check("overshoot", over <= TARGET_OVERSHOOT_DEG,
               f"{over:.2f} deg past target vs {TARGET_OVERSHOOT_DEG} deg"),
        _check("tip_rate", rate is not None and rate >= TARGET_RATE_DEG_S,
               f"{'n/a' if rate is None else f'{rate:.1f} deg/s'} vs {TARGET_RATE_DEG_S} deg/s"),
        _check("tracking_error", track <= TARGET_TRACK_DEG,
               f"{track:.2f} deg max over the final second vs {TARGET_TRACK_DEG} deg"),
    ]
    metrics = {
        "target_deg": s.target_deg,
        "settle_s": settle,
        "overshoot_deg": over,
        "mean_rate_deg_s": rate,
        "final_second_max_error_deg": track,
        "fault_ticks": int(sum(1 for r in trace.records if r.fault)),
    }
    result = ExperimentResult("step", seed, metrics, verdicts, trace)
    if out_dir is not None:
        _write_common(result, out_dir)
        _write_smoothed(trace, "step", out_dir)
    return result


def run_tool_compensation(
    config: SimConfig, seed: int = 0, out_dir=None, calibration: Calibration | None = None
) -> ExperimentResult:
    """Settle on target, insert the channel tool, then remove it.

    The loop never learns about the tool; it just sees the ratio error the
    stiffness change produces and drives it back out.  Scored on how fast the
    bend re-enters the tracking band after each change.
    """
    if calibration is None:
        calibration = ensure_calibration(config, seed)
    s = config.tool_experiment
    commands = [
        Command(s.command_time_s, "set_angle", s.target_deg),
        Command(s.insert_time_s, "tool_insert"),
        Command(s.remove_time_s, "tool_remove"),
    ]
    trace = run_closed_loop(
        config.plant, config.scene, config.roi, calibration,
        commands, s.duration_s, config.loop, seed,
    )
    times, angles = trace.times(), trace.true_angles()
    settle = recovery_time_s(times, angles, s.command_time_s, s.target_deg,
                             s.recover_band_deg, s.insert_time_s)
    rec_insert = recovery_time_s(times, angles, s.insert_time_s, s.target_deg,
                                 s.recover_band_deg, s.remove_time_s)
    rec_remove = settle_time_s(times, angles, s.remove_time_s, s.target_deg, s.recover_band_deg)
    insert_phase = (times >= s.insert_time_s - 1e-9) & (times < s.remove_time_s - 1e-9)
    disturb_insert = float(np.max(np.abs(angles[insert_phase] - s.target_deg)))
    verdicts = [
        _check("initial_settle", settle is not None and settle <= TARGET_SETTLE_S,
               f"{'never' if settle is None else f'{settle:.2f} s'} vs {TARGET_SETTLE_S} s"),
        _check("recover_after_insert",
               rec_insert is not None and rec_insert <= s.recover_within_s,
               f"{'never' if rec_insert is None else f'{rec_insert:.2f} s'} vs {s.recover_within_s} s"),
        _check("recover_after_remove",
               rec_remove is not None and rec_remove <= s.recover_within_s,
               f"{'never' if rec_remove is None else f'{rec_remove:.2f} s'} vs {s.recover_within_s} s"),
    ]
    metrics = {
        "target_deg": s.target_deg,
        "initial_settle_s": settle,
        "recover_after_insert_s": rec_insert,
        "recover_after_remove_s": rec_remove,
        "max_excursion_after_insert_deg": disturb_insert,
        "fault_ticks": int(sum(1 for r in trace.records if r.fault)),
    }
    result = ExperimentResult("toolcomp", seed, metrics, verdicts, trace)
    if out_dir is not None:
        _write_common(result, out_dir)
        _write_smoothed(trace, "toolcomp", out_dir)
    return result


def load_command_csv(path) -> list[Command]:
    """Read an operator command script: time_s,kind,value with a header row."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0].replace(" ", "") != "time_s,kind,value":
        raise ValueError(f"{path}: expected header 'time_s,kind,value'")
    commands = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 3:
            raise ValueError(f"{path}:{ln}: expected 3 fields, got {len(parts)}")
        time_s = float(parts[0])
        value = float(parts[2]) if parts[2] else None
        commands.append(Command(time_s, parts[1], value))
    return commands


def run_replay(
    config: SimConfig,
    commands: list[Command],
    duration_s: float | None = None,
    seed: int = 0,
    out_dir=None,
    calibration: Calibration | None = None,
) -> ExperimentResult:
    """Replay a recorded operator session deterministically."""
    if calibration is None:
        calibration = ensure_calibration(config, seed)
    if not commands:
        raise ValueError("replay needs at least one command")
    if duration_s is None:
        duration_s = max(c.time_s for c in commands) + 3.0
    trace = run_closed_loop(
        config.plant, config.scene, config.roi, calibration,
        commands, duration_s, config.loop, seed,
    )
    times, angles = trace.times(), trace.true_angles()
    setpoints = [c for c in commands if c.kind == "set_angle"]
    if setpoints:
        last = max(setpoints, key=lambda c: c.time_s)
        tail = duration_s - last.time_s
        if tail >= 3.0:
            err = max_error_after(times, angles, float(last.value), duration_s - 1.0)
            tracking = _check("tracking_error", err <= TARGET_TRACK_DEG,
                              f"{err:.2f} deg vs {TARGET_TRACK_DEG} deg at the final setpoint")
        else:
            tracking = Verdict("tracking_error", SKIP,
                               f"only {tail:.1f} s after the last setpoint")
    else:
        tracking = Verdict("tracking_error", SKIP, "no angle setpoints in the script")
    fault_ticks = int(sum(1 for r in trace.records if r.fault))
    verdicts = [
        _check("run_completed", True, f"{len(trace.records)} ticks, {fault_ticks} fault ticks"),
        tracking,
    ]
    metrics = {
        "duration_s": duration_s,
        "commands": len(commands),
        "fault_ticks": fault_ticks,
        "final_angle_deg": float(angles[-1]),
    }
    result = ExperimentResult("replay", seed, metrics, verdicts, trace)
    if out_dir is not None:
        _write_common(result, out_dir)
        _write_smoothed(trace, "replay", out_dir)
    return result
