"""Configuration aggregation and YAML loading.

A SimConfig bundles everything a run needs: plant model, scene, region of
interest, loop rates and gains, calibration sweep settings, experiment
scenarios and service rates.  ``default_config()`` is the canonical build;
``load_config(path)`` overlays a YAML file on those defaults.

Config errors always carry the file and the dotted key path of the offending
value, because "somewhere in your YAML" is not an actionable message.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from balloonscope.control import LoopConfig
from balloonscope.imaging import RegionOfInterest, SceneModel
from balloonscope.plant import (
    BalloonGeometry,
    PlantModel,
    PumpParams,
    ResponseCurve,
    ResponseLag,
    ToolModel,
)


class ConfigError(ValueError):
    """A configuration value is missing, unknown, or invalid."""

    def __init__(self, source: str, keypath: str, message: str):
        self.source = source
        self.keypath = keypath
        self.message = message
        super().__init__(f"{source}: {keypath}: {message}")


@dataclass(frozen=True)
class CalibrationSettings:
    """Calibration sweep: angle grid, repeats per point, fit degree."""

    start_deg: float = 0.0
    stop_deg: float = 100.0
    step_deg: float = 5.0
    repeats: int = 3
    degree: int = 4

    def __post_init__(self) -> None:
        if self.step_deg <= 0 or self.stop_deg <= self.start_deg:
            raise ValueError("sweep grid must be increasing with a positive step")
        if self.repeats < 1:
            raise ValueError("need at least one frame per grid point")
        if self.degree < 1:
            raise ValueError("fit degree must be at least 1")

    def grid(self) -> list[float]:
        angles = []
        a = self.start_deg
        while a <= self.stop_deg + 1e-9:
            angles.append(round(a, 9))
            a += self.step_deg
        return angles


@dataclass(frozen=True)
class StepSettings:
    """Step-response experiment: one angle command from rest."""

    target_deg: float = 60.0
    command_time_s: float = 0.5
    duration_s: float = 8.0
    settle_band_deg: float = 2.0

    def __post_init__(self) -> None:
        if self.duration_s <= self.command_time_s:
            raise ValueError("experiment must outlast the command time")
        if self.settle_band_deg <= 0:
            raise ValueError("settle band must be positive")


@dataclass(frozen=True)
class ToolSettings:
    """Tool-disturbance experiment: settle, insert the tool, then remove it."""

    target_deg: float = 60.0
    command_time_s: float = 0.5
    insert_time_s: float = 6.0
    remove_time_s: float = 12.0
    duration_s: float = 18.0
    recover_band_deg: float = 2.0
    recover_within_s: float = 5.0

    def __post_init__(self) -> None:
        if not (self.command_time_s < self.insert_time_s < self.remove_time_s < self.duration_s):
            raise ValueError("tool experiment phases must be ordered and fit the duration")


@dataclass(frozen=True)
class SweepSettings:
    """Quasi-static response sweep resolution."""

    probe_step_ml: float = 0.01
    table_step_ml: float = 0.2

    def __post_init__(self) -> None:
        if self.probe_step_ml <= 0 or self.table_step_ml <= 0:
            raise ValueError("sweep steps must be positive")


@dataclass(frozen=True)
class ServiceSettings:
    """Teleoperation service rates.  Telemetry is paced per client; commands
    beyond the rate limit are refused with a fault rather than queued."""

    state_rate_hz: float = 15.0
    frame_rate_hz: float = 10.0
    command_rate_hz: float = 50.0
    time_scale: float = 1.0
    png_compress_level: int = 1

    def __post_init__(self) -> None:
        if min(self.state_rate_hz, self.frame_rate_hz, self.command_rate_hz) <= 0:
            raise ValueError("service rates must be positive")
        if self.time_scale <= 0:
            raise ValueError("time scale must be positive")
        if not (0 <= self.png_compress_level <= 9):
            raise ValueError("png compression level must be 0..9")


@dataclass(frozen=True)
class SimConfig:
    plant: PlantModel = field(default_factory=PlantModel)
    scene: SceneModel = field(default_factory=SceneModel)
    roi: RegionOfInterest = field(default_factory=RegionOfInterest)
    loop: LoopConfig = field(default_factory=LoopConfig)
    calibration: CalibrationSettings = field(default_factory=CalibrationSettings)
    step: StepSettings = field(default_factory=StepSettings)
    tool_experiment: ToolSettings = field(default_factory=ToolSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    service: ServiceSettings = field(default_factory=ServiceSettings)


def default_config() -> SimConfig:
    """Canonical experiment configuration.

    Identical to the shipped configs/default.yaml.  Sensor noise is on here
    (the bare SceneModel defaults are noise-free) so the packaged experiments
    run against a camera that flickers like a real one.
    """
    return SimConfig(scene=SceneModel(noise_amplitude=1.5, radius_jitter_px=0.15))


def _coerce(value, ftype: str, source: str, keypath: str):
    try:
        if ftype == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise TypeError
            return float(value)
        if ftype == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise TypeError
            return value
        if ftype == "bool":
            if not isinstance(value, bool):
                raise TypeError
            return value
    except TypeError:
        raise ConfigError(source, keypath, f"expected {ftype}, got {value!r}") from None
    raise AssertionError(f"unhandled field type {ftype}")


_TUPLE_FIELDS = {
    "blood_rgb": (int, 3),
    "channel_rgb": (int, 3),
    "vignette_rgb": (int, 3),
    "channel_center_px": (float, 2),
    "center_drift_px_per_deg": (float, 2),
    "thresholds": (float, None),
    "speeds_rpm": (float, None),
}


def _build_dataclass(cls, data, source: str, keypath: str):
    """Instantiate a flat dataclass from a YAML mapping with field checking."""
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(source, keypath, f"expected a mapping, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{keypath}.{key}" if keypath else str(key)
        if key not in known:
            raise ConfigError(source, path, f"unknown setting (valid: {', '.join(sorted(known))})")
        if key in _TUPLE_FIELDS:
            elem, length = _TUPLE_FIELDS[key]
            if not isinstance(value, (list, tuple)) or (length and len(value) != length):
                want = f"list of {length} {elem.__name__}s" if length else f"list of {elem.__name__}s"
                raise ConfigError(source, path, f"expected {want}, got {value!r}")
            try:
                kwargs[key] = tuple(elem(v) for v in value)
            except (TypeError, ValueError):
                raise ConfigError(source, path, f"expected numeric entries, got {value!r}") from None
        else:
            ftype = known[key].type.split("|")[0].strip() if isinstance(known[key].type, str) else known[key].type.__name__
            kwargs[key] = _coerce(value, ftype, source, path)
    try:
        return cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(source, keypath or cls.__name__, str(exc)) from None


def _build_plant(data, source: str) -> PlantModel:
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(source, "plant", "expected a mapping")
    known = {"geometry", "response_anchors", "tool", "pump", "lag"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(source, f"plant.{sorted(unknown)[0]}", f"unknown setting (valid: {', '.join(sorted(known))})")
    geometry = _build_dataclass(BalloonGeometry, data.get("geometry"), source, "plant.geometry")
    pump = _build_dataclass(PumpParams, data.get("pump"), source, "plant.pump")
    lag = _build_dataclass(ResponseLag, data.get("lag"), source, "plant.lag")
    # Tool defaults live on the plant; insertion state is a runtime command.
    tool_data = dict(data.get("tool") or {})
    if "inserted" in tool_data:
        raise ConfigError(source, "plant.tool.inserted", "tool insertion is a runtime command, not a config setting")
    tool = _build_dataclass(ToolModel, tool_data, source, "plant.tool")
    anchors = data.get("response_anchors")
    if anchors is None:
        curve = ResponseCurve()
    else:
        if not isinstance(anchors, list) or not all(
            isinstance(row, (list, tuple)) and len(row) == 3 for row in anchors
        ):
            raise ConfigError(
                source, "plant.response_anchors",
                "expected a list of [volume_ml, face_diameter_mm, free_angle_deg] rows",
            )
        try:
            curve = ResponseCurve(tuple(tuple(float(x) for x in row) for row in anchors))
        except (TypeError, ValueError) as exc:
            raise ConfigError(source, "plant.response_anchors", str(exc)) from None
    return PlantModel(geometry=geometry, curve=curve, pump=pump, lag=lag, tool=tool)


def _build_roi(data, source: str) -> RegionOfInterest:
    if data is None:
        return RegionOfInterest()
    if not isinstance(data, (list, tuple)) or len(data) != 4:
        raise ConfigError(source, "roi", f"expected [x0, y0, x1, y1], got {data!r}")
    try:
        x0, y0, x1, y1 = (int(v) for v in data)
        return RegionOfInterest(x0=x0, y0=y0, x1=x1, y1=y1)
    except (TypeError, ValueError) as exc:
        raise ConfigError(source, "roi", str(exc)) from None


_SECTIONS = {
    "plant",
    "scene",
    "roi",
    "control",
    "calibration",
    "experiments",
    "service",
}


def load_config(path) -> SimConfig:
    """Read a YAML config file, overlaying the package defaults.

    Every section and key is optional; unknown keys are errors so typos fail
    loudly instead of silently running the defaults.
    """
    source = str(path)
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(source, "<file>", f"not valid YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(source, "<file>", "top level must be a mapping of sections")
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ConfigError(
            source, sorted(unknown)[0], f"unknown section (valid: {', '.join(sorted(_SECTIONS))})"
        )
    experiments = data.get("experiments") or {}
    if not isinstance(experiments, dict):
        raise ConfigError(source, "experiments", "expected a mapping")
    exp_unknown = set(experiments) - {"step", "tool", "sweep"}
    if exp_unknown:
        raise ConfigError(source, f"experiments.{sorted(exp_unknown)[0]}", "unknown experiment (valid: step, sweep, tool)")

    plant = _build_plant(data.get("plant"), source)
    return SimConfig(
        plant=plant,
        scene=_build_dataclass(SceneModel, data.get("scene"), source, "scene"),
        roi=_build_roi(data.get("roi"), source),
        loop=_build_dataclass(LoopConfig, data.get("control"), source, "control"),
        calibration=_build_dataclass(CalibrationSettings, data.get("calibration"), source, "calibration"),
        step=_build_dataclass(StepSettings, experiments.get("step"), source, "experiments.step"),
        tool_experiment=_build_dataclass(ToolSettings, experiments.get("tool"), source, "experiments.tool"),
        sweep=_build_dataclass(SweepSettings, experiments.get("sweep"), source, "experiments.sweep"),
        service=_build_dataclass(ServiceSettings, data.get("service"), source, "service"),
    )
