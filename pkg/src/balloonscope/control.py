"""Bang-bang steering law and the closed-loop simulation.

Control runs in pixel-ratio space: the operator's angle command is mapped
through the calibration to a target ratio, the camera measurement gives the
current ratio, and the signed difference picks a pump speed from a three-tier
table.  Working in ratio space sidesteps inverting the calibration on every
frame and makes the deadband a camera-native quantity (a ratio step of 0.001
is 160 pixels, comfortably above the sensor's frame-to-frame flicker).

Timing model: the plant integrates on a fixed 1 ms grid; the camera ticks at
the configured rate with tick k landing on the first whole millisecond at or
after k / rate.  The pump speed chosen at a tick is held (zero-order hold)
until the next tick.  Frame noise is seeded per (run seed, tick index), so a
run is a pure function of its configuration and seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from balloonscope.estimation import Calibration, estimate_angle
from balloonscope.imaging import (
    ChannelLostError,
    RegionOfInterest,
    SceneModel,
    render_view,
    sense,
)
from balloonscope.plant import PlantModel, PlantState, apply_tool, step_pump

DEFAULT_THRESHOLDS = (0.001, 0.002, 0.006)
DEFAULT_SPEEDS_RPM = (5.0, 25.0, 100.0)

COMMAND_KINDS = frozenset({"set_angle", "estop", "reset", "tool_insert", "tool_remove"})

FAULT_NONE = ""
FAULT_CHANNEL_LOST = "channel_lost"
FAULT_ESTOP = "estop"


class PumpSaturationError(RuntimeError):
    """The syringe hit an end stop while being driven; the run is aborted.

    The partial trace up to the abort is attached as ``trace``.
    """

    def __init__(self, message: str, trace: "Trace | None" = None):
        super().__init__(message)
        self.trace = trace


def bang_bang_rpm(
    delta_ratio: float,
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
    speeds_rpm: Sequence[float] = DEFAULT_SPEEDS_RPM,
) -> float:
    """Pump speed for a signed pixel-ratio error (target minus measured).

    Positive error means the channel should fill more of the view, so the
    pump infuses (positive rpm).  Tier edges: the top tier is strict
    (|error| > top threshold), every lower tier includes its own lower edge,
    and errors inside the deadband command zero.  An error exactly at a
    shared edge therefore takes the gentler speed.
    """
    if len(thresholds) != len(speeds_rpm) or not thresholds:
        raise ValueError("need one speed per threshold")
    mag = abs(delta_ratio)
    sign = 1.0 if delta_ratio > 0 else -1.0
    if mag > thresholds[-1]:
        return sign * speeds_rpm[-1]
    for i in range(len(thresholds) - 2, -1, -1):
        if mag >= thresholds[i]:
            return sign * speeds_rpm[i]
    return 0.0


@dataclass(frozen=True)
class LoopConfig:
    """Rates and gains for the closed loop."""

    camera_rate_hz: float = 30.0
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    speeds_rpm: tuple[float, ...] = DEFAULT_SPEEDS_RPM
    plant_dt_s: float = 0.001
    inflate_rpm: float = 100.0
    min_channel_pixels: int = 50

    def __post_init__(self) -> None:
        if self.camera_rate_hz <= 0 or self.plant_dt_s <= 0:
            raise ValueError("rates must be positive")
        if len(self.thresholds) != len(self.speeds_rpm):
            raise ValueError("need one speed per threshold")
        if any(t <= 0 for t in self.thresholds) or any(
            b <= a for a, b in zip(self.thresholds, self.thresholds[1:])
        ):
            raise ValueError("thresholds must be positive and strictly increasing")
        if any(s <= 0 for s in self.speeds_rpm) or any(
            b <= a for a, b in zip(self.speeds_rpm, self.speeds_rpm[1:])
        ):
            raise ValueError("speeds must be positive and strictly increasing")
        if self.inflate_rpm <= 0:
            raise ValueError("inflate speed must be positive")


@dataclass(frozen=True)
class Command:
    """Timestamped operator command.

    ``value`` carries the angle for set_angle and is ignored otherwise.
    Commands apply at the first camera tick at or after their timestamp, in
    (timestamp, submission order) order.
    """

    time_s: float
    kind: str
    value: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in COMMAND_KINDS:
            raise ValueError(f"unknown command kind {self.kind!r}")
        if self.kind == "set_angle":
            if self.value is None or not math.isfinite(self.value):
                raise ValueError("set_angle needs a finite angle value")


TRACE_COLUMNS = (
    "time_s",
    "alpha_cmd_deg",
    "ratio_target",
    "ratio_measured",
    "ratio_error",
    "motor_rpm",
    "volume_ml",
    "alpha_true_deg",
    "alpha_est_deg",
    "face_diameter_mm",
    "tool_inserted",
    "fault",
)


@dataclass(frozen=True)
class TraceRecord:
    """One camera tick's worth of loop telemetry."""

    time_s: float
    alpha_cmd_deg: float
    ratio_target: float
    ratio_measured: float
    ratio_error: float
    motor_rpm: float
    volume_ml: float
    alpha_true_deg: float
    alpha_est_deg: float
    face_diameter_mm: float
    tool_inserted: bool
    fault: str = FAULT_NONE

    def csv_row(self) -> str:
        cells = []
        for name in TRACE_COLUMNS:
            v = getattr(self, name)
            if isinstance(v, bool):
                cells.append("1" if v else "0")
            elif isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        return ",".join(cells)


@dataclass
class Trace:
    """Ordered tick records for one run, with CSV round-tripping.

    Floats are written with shortest round-trip formatting, so a trace file
    is a byte-for-byte function of the run's configuration and seed.
    """

    records: list[TraceRecord] = field(default_factory=list)
    seed: int = 0

    def times(self) -> np.ndarray:
        return np.array([r.time_s for r in self.records])

    def true_angles(self) -> np.ndarray:
        return np.array([r.alpha_true_deg for r in self.records])

    def estimated_angles(self) -> np.ndarray:
        return np.array([r.alpha_est_deg for r in self.records])

    def commanded_angles(self) -> np.ndarray:
        return np.array([r.alpha_cmd_deg for r in self.records])

    def to_csv_text(self) -> str:
        lines = [",".join(TRACE_COLUMNS)]
        lines.extend(r.csv_row() for r in self.records)
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv_text())


class ClosedLoopSim:
    """Camera-in-the-loop simulation of the steering stack.

    One instance owns the plant state, the command inbox and the tick clock.
    ``run`` drives it on the deterministic schedule; a hosting service can
    instead alternate ``advance_to_ms`` / ``tick`` itself to pace ticks
    against wall time.
    """

    def __init__(
        self,
        model: PlantModel,
        scene: SceneModel,
        roi: RegionOfInterest,
        calibration: Calibration,
        loop: LoopConfig | None = None,
        seed: int = 0,
        initial_state: PlantState | None = None,
    ):
        if not calibration.monotone:
            raise ValueError("cannot steer with a non-monotone calibration")
        self.model = model
        self.scene = scene
        self.roi = roi
        self.calibration = calibration
        self.loop = loop or LoopConfig()
        self.seed = int(seed)
        self.state = initial_state if initial_state is not None else model.initial_state()
        self.alpha_cmd_deg = self.state.angle_deg
        self.estop = False
        self.held_rpm = 0.0
        self.tick_index = 0
        self.time_ms = 0
        self.last_frame: np.ndarray | None = None
        self.last_record: TraceRecord | None = None
        self._inbox: list[tuple[float, int, Command]] = []
        self._inbox_seq = 0
        self._dt_ms = round(self.loop.plant_dt_s * 1000)
        if self._dt_ms < 1 or abs(self._dt_ms - self.loop.plant_dt_s * 1000) > 1e-9:
            raise ValueError("plant step must be a whole number of milliseconds")

    def submit(self, command: Command) -> None:
        self._inbox.append((command.time_s, self._inbox_seq, command))
        self._inbox_seq += 1
        self._inbox.sort(key=lambda item: (item[0], item[1]))

    def next_tick_ms(self) -> int:
        return math.ceil(self.tick_index * 1000.0 / self.loop.camera_rate_hz)

    def advance_to_ms(self, t_ms: int) -> None:
        """Integrate the plant forward to ``t_ms`` holding the current speed."""
        if t_ms < self.time_ms:
            raise ValueError("time cannot run backwards")
        n_steps, rem = divmod(t_ms - self.time_ms, self._dt_ms)
        if rem:
            raise ValueError("tick times must land on the plant grid")
        dt = self.loop.plant_dt_s
        if self.model.lag.enabled:
            for _ in range(n_steps):
                self.state = self.model.step(self.state, self.held_rpm, dt)
                self._check_saturation()
        elif n_steps:
            # Quasi-static fast path: only the pump has memory, so step it on
            # the grid and re-evaluate the shape once at the target time.
            pump = self.state.pump
            if self.held_rpm == 0.0:
                pump = step_pump(pump, 0.0, n_steps * dt, self.model.pump)
            else:
                for _ in range(n_steps):
                    pump = step_pump(pump, self.held_rpm, dt, self.model.pump)
            volume = pump.volume_ml(self.model.pump)
            d, free = self.model.curve.evaluate(volume)
            self.state = replace(
                self.state,
                pump=pump,
                volume_ml=volume,
                face_diameter_mm=d,
                free_angle_deg=free,
                angle_deg=apply_tool(free, self.state.tool),
                time_s=self.state.time_s + n_steps * dt,
            )
            self._check_saturation()
        self.time_ms = t_ms

    def _check_saturation(self) -> None:
        if self.state.pump.saturated and self.held_rpm != 0.0:
            raise PumpSaturationError(
                f"syringe end stop at {self.state.volume_ml:.4f} mL "
                f"while commanding {self.held_rpm:+.0f} rpm"
            )

    def _apply_commands(self, t_ms: int) -> None:
        due = [c for c in self._inbox if c[0] * 1000.0 <= t_ms + 1e-6]
        self._inbox = self._inbox[len(due):]
        for _, _, cmd in due:
            if cmd.kind == "set_angle":
                lo, hi = self.calibration.bracket_deg
                self.alpha_cmd_deg = min(max(float(cmd.value), lo), hi)
            elif cmd.kind == "estop":
                self.estop = True
            elif cmd.kind == "reset":
                self.estop = False
            elif cmd.kind == "tool_insert":
                self.state = self.model.with_tool(self.state, True)
            elif cmd.kind == "tool_remove":
                self.state = self.model.with_tool(self.state, False)

    def tick(self) -> TraceRecord:
        """Run one camera tick at the current time: sense, decide, hold."""
        t_s = self.time_ms / 1000.0
        self._apply_commands(self.time_ms)
        frame = render_view(
            self.scene, self.state.angle_deg, seed=[self.seed, self.tick_index]
        )
        self.last_frame = frame
        target = self.calibration.evaluate(self.alpha_cmd_deg)
        fault = FAULT_NONE
        measured = math.nan
        error = math.nan
        alpha_est = math.nan
        omega = 0.0
        try:
            stats = sense(frame, self.roi, self.loop.min_channel_pixels)
        except ChannelLostError:
            fault = FAULT_CHANNEL_LOST
        else:
            measured = stats.ratio
            alpha_est = estimate_angle(self.calibration, measured).angle_deg
            error = target - measured
            omega = bang_bang_rpm(error, self.loop.thresholds, self.loop.speeds_rpm)
            deploy = self.model.curve.deploy_volume_ml
            if self.alpha_cmd_deg > 0.0 and self.state.volume_ml < deploy:
                omega = self.loop.inflate_rpm
        if self.estop:
            omega = 0.0
            fault = FAULT_ESTOP
        self.held_rpm = omega
        record = TraceRecord(
            time_s=t_s,
            alpha_cmd_deg=self.alpha_cmd_deg,
            ratio_target=target,
            ratio_measured=measured,
            ratio_error=error,
            motor_rpm=omega,
            volume_ml=self.state.volume_ml,
            alpha_true_deg=self.state.angle_deg,
            alpha_est_deg=alpha_est,
            face_diameter_mm=self.state.face_diameter_mm,
            tool_inserted=self.state.tool.inserted,
            fault=fault,
        )
        self.last_record = record
        self.tick_index += 1
        return record

    def run(self, duration_s: float, commands: Iterable[Command] = ()) -> Trace:
        """Run ticks up to and including ``duration_s`` and return the trace."""
        for cmd in commands:
            self.submit(cmd)
        end_ms = round(duration_s * 1000.0)
        trace = Trace(seed=self.seed)
        try:
            while self.next_tick_ms() <= end_ms:
                self.advance_to_ms(self.next_tick_ms())
                trace.records.append(self.tick())
            if self.time_ms < end_ms:
                self.advance_to_ms(end_ms)
        except PumpSaturationError as exc:
            raise PumpSaturationError(str(exc), trace) from None
        return trace


def run_closed_loop(
    model: PlantModel,
    scene: SceneModel,
    roi: RegionOfInterest,
    calibration: Calibration,
    commands: Iterable[Command],
    duration_s: float,
    loop: LoopConfig | None = None,
    seed: int = 0,
    initial_state: PlantState | None = None,
) -> Trace:
    """One-shot closed-loop run; see ClosedLoopSim for the stepping rules."""
    sim = ClosedLoopSim(
        model, scene, roi, calibration, loop=loop, seed=seed, initial_state=initial_state
    )
    return sim.run(duration_s, commands)
