"""Quasi-static plant model: syringe pump, balloon response, tool offset, tip pose.

Unit conventions used throughout this module:
    volumes     mL
    flow        mL/s (motor speed in rpm; 0.4 mL per revolution)
    lengths     mm
    angles      degrees at every public boundary (radians only inside tip_pose)
    time        seconds

The balloon has a single fluid input.  Infused volume is the sole state that
matters quasi-statically: the optical-face diameter and the free bending angle
are both memoryless functions of volume, represented by a monotone curve fit
through measured anchors.  Below the deploy volume the face inflates while the
angle stays at zero; past it the face is nearly full size and further volume
mostly bends the tip.  That sequencing is what lets one syringe drive both
deployment and steering without coupling the camera's view to the bend.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator

# Stepper drive: 1.8 deg full steps (200/rev) subdivided 32x by the driver.
FULL_STEPS_PER_REV = 200
MICROSTEP_SUBDIVISION = 32
MICROSTEPS_PER_REV = FULL_STEPS_PER_REV * MICROSTEP_SUBDIVISION  # 6400
ML_PER_REV = 0.4
VOLUME_QUANTUM_ML = ML_PER_REV / MICROSTEPS_PER_REV  # 62.5 nL
MAX_MOTOR_RPM = 450.0

# Volume/diameter/angle anchors for the default balloon build.  The face is
# fully deployed by 0.8 mL; bending starts only after that.
DEFAULT_RESPONSE_ANCHORS = (
    (0.0, 4.6, 0.0),
    (0.4, 6.5, 0.0),
    (0.8, 8.0, 0.0),
    (1.5, 8.5, 25.0),
    (2.4, 8.9, 60.0),
    (4.0, 9.5, 100.0),
)

MAX_BEND_DEG = 120.0


class MotorSpeedError(ValueError):
    """Commanded motor speed exceeds the drive's rated maximum."""


class GeometryError(ValueError):
    """Balloon geometry violates a build constraint."""


@dataclass(frozen=True)
class BalloonGeometry:
    """As-built dimensions of the balloon, all in millimetres.

    Wall thicknesses differ around the steering section on purpose: the
    thick-wall side stretches less, so pressure bends the tip toward it.
    The optical face uses a thin top layer and thicker base so it bulges
    into a dome the camera can see through.
    """

    proximal_wall_mm: float = 0.27
    steer_wall_top_mm: float = 0.80
    steer_wall_bottom_mm: float = 0.90
    window_wall_bottom_mm: float = 0.80
    face_top_mm: float = 0.50
    face_bottom_mm: float = 0.75
    proximal_id_mm: float = 4.09
    neck_id_mm: float = 1.75
    proximal_len_mm: float = 10.0
    steer_len_mm: float = 15.0
    window_len_mm: float = 7.5
    face_len_mm: float = 1.9
    clip_spacing_mm: float = 5.0
    clip_to_face_mm: float = 4.0
    collapsed_od_mm: float = 4.63
    channel_id_mm: float = 1.0
    channel_wall_mm: float = 0.5

    def __post_init__(self) -> None:
        for name, value in self.__dict__.items():
            if not (value > 0.0) or not math.isfinite(value):
                raise GeometryError(f"{name} must be a positive finite length, got {value!r}")
        if self.steer_wall_top_mm >= self.steer_wall_bottom_mm:
            raise GeometryError(
                "steering section needs a thickness asymmetry: "
                f"top wall {self.steer_wall_top_mm} mm must be thinner than "
                f"bottom wall {self.steer_wall_bottom_mm} mm"
            )
        if self.face_top_mm >= self.face_bottom_mm:
            raise GeometryError(
                "optical face needs a thin top over a thicker base: "
                f"{self.face_top_mm} mm vs {self.face_bottom_mm} mm"
            )
        if self.collapsed_od_mm > 5.0:
            raise GeometryError(
                f"collapsed outer diameter {self.collapsed_od_mm} mm exceeds the 5 mm "
                "delivery-sheath budget"
            )
        if self.channel_id_mm < 0.5:
            raise GeometryError(
                f"working channel bore {self.channel_id_mm} mm is below the 0.5 mm minimum"
            )


class ResponseCurveError(ValueError):
    """Anchor set cannot produce a valid monotone response."""


class ResponseCurve:
    """Monotone volume -> (face diameter, free bend angle) map.

    Built with shape-preserving cubic interpolation through the anchors, so
    the curve passes through every measured point, never overshoots between
    them, and stays monotone wherever the anchors are.  In particular the
    angle is identically zero across any leading run of zero-angle anchors,
    which is what keeps deployment from bending the tip.
    """

    def __init__(self, anchors=DEFAULT_RESPONSE_ANCHORS):
        anchors = tuple((float(v), float(d), float(a)) for v, d, a in anchors)
        if len(anchors) < 3:
            raise ResponseCurveError("need at least 3 anchors")
        volumes = np.array([a[0] for a in anchors])
        diameters = np.array([a[1] for a in anchors])
        angles = np.array([a[2] for a in anchors])
        if volumes[0] != 0.0:
            raise ResponseCurveError("first anchor must be at zero volume")
        if np.any(np.diff(volumes) <= 0):
            raise ResponseCurveError("anchor volumes must be strictly increasing")
        if np.any(np.diff(diameters) <= 0):
            raise ResponseCurveError("anchor diameters must be strictly increasing")
        if np.any(np.diff(angles) < 0):
            raise ResponseCurveError("anchor angles must be non-decreasing")
        if angles[-1] <= 0:
            raise ResponseCurveError("last anchor must reach a positive bend angle")
        self.anchors = anchors
        self.max_volume_ml = float(volumes[-1])
        self._diameter = PchipInterpolator(volumes, diameters)
        self._angle = PchipInterpolator(volumes, angles)
        # Deploy volume: past the last zero-angle anchor any extra volume bends
        # the tip.  All-positive-angle anchor sets deploy immediately.
        zero_run = np.flatnonzero(angles == 0.0)
        self.deploy_volume_ml = float(volumes[zero_run[-1]]) if zero_run.size else 0.0
        self._check_monotone()

    def _check_monotone(self, samples: int = 2001) -> None:
        v = np.linspace(0.0, self.max_volume_ml, samples)
        d = self._diameter(v)
        a = self._angle(v)
        if np.any(np.diff(d) < 0):
            raise ResponseCurveError("interpolated diameter is not non-decreasing")
        if np.any(np.diff(a) < 0):
            raise ResponseCurveError("interpolated angle is not non-decreasing")

    def evaluate(self, volume_ml: float) -> tuple[float, float]:
        """Face diameter (mm) and free bend angle (deg) at the given volume.

        Volume is clipped to the anchored range; the physical syringe cannot
        drive the balloon past the last anchor anyway.
        """
        v = min(max(float(volume_ml), 0.0), self.max_volume_ml)
        return float(self._diameter(v)), float(self._angle(v))

    def diameter(self, volume_ml: float) -> float:
        return self.evaluate(volume_ml)[0]

    def angle(self, volume_ml: float) -> float:
        return self.evaluate(volume_ml)[1]

    def volume_for_angle(self, angle_deg: float, tol: float = 1e-9) -> float:
        """Smallest volume whose free angle reaches ``angle_deg`` (bisection)."""
        target = float(angle_deg)
        lo, hi = self.deploy_volume_ml, self.max_volume_ml
        if target <= 0.0:
            return lo
        if target > self.angle(hi):
            raise ValueError(f"angle {target} deg is beyond the curve's range")
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if self.angle(mid) < target:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


@dataclass(frozen=True)
class ToolModel:
    """Straight instrument in the working channel stiffens the bend.

    The offset scales linearly with the free angle and reaches
    ``max_offset_deg`` at ``reference_angle_deg``: a tool fights a deep bend
    harder than a shallow one.
    """

    inserted: bool = False
    max_offset_deg: float = 13.0
    reference_angle_deg: float = 100.0

    def __post_init__(self) -> None:
        if self.reference_angle_deg <= 0:
            raise ValueError("reference angle must be positive")
        if self.max_offset_deg < 0:
            raise ValueError("offset cannot be negative")


def apply_tool(free_angle_deg: float, tool: ToolModel) -> float:
    """Achieved bend angle once the tool's stiffening is subtracted."""
    if not tool.inserted:
        return float(free_angle_deg)
    offset = tool.max_offset_deg * (free_angle_deg / tool.reference_angle_deg)
    return float(free_angle_deg - offset)


@dataclass(frozen=True)
class PumpParams:
    """Syringe drive constants.  Defaults match the stepper + 0.4 mL/rev screw."""

    ml_per_rev: float = ML_PER_REV
    microsteps_per_rev: int = MICROSTEPS_PER_REV
    max_rpm: float = MAX_MOTOR_RPM
    syringe_capacity_ml: float = 5.0

    def __post_init__(self) -> None:
        if self.ml_per_rev <= 0 or self.microsteps_per_rev <= 0:
            raise ValueError("pump scale factors must be positive")
        if self.max_rpm <= 0 or self.syringe_capacity_ml <= 0:
            raise ValueError("pump limits must be positive")

    @property
    def volume_quantum_ml(self) -> float:
        return self.ml_per_rev / self.microsteps_per_rev

    @property
    def capacity_microsteps(self) -> int:
        return round(self.syringe_capacity_ml / self.volume_quantum_ml)

    def flow_ml_per_s(self, rpm: float) -> float:
        return rpm * self.ml_per_rev / 60.0


@dataclass(frozen=True)
class PumpState:
    """Plunger position in microsteps.  The integer count is the source of
    truth; infused volume is always count * quantum, so volume bookkeeping can
    never drift away from what the motor actually did.

    ``commanded_steps_exact`` carries the un-rounded step total so that
    fractional steps accumulate across updates instead of being lost: holding
    a speed for N short intervals lands on the same count as one long one.
    """

    microstep_count: int = 0
    commanded_steps_exact: float = 0.0
    rpm_command: float = 0.0
    saturated: bool = False

    def volume_ml(self, params: PumpParams) -> float:
        return self.microstep_count * params.volume_quantum_ml


def step_pump(pump: PumpState, rpm: float, dt_s: float, params: PumpParams) -> PumpState:
    """Advance the plunger by ``dt_s`` at motor speed ``rpm``.

    The exact commanded step total integrates ``rpm``; the integer count is
    that total rounded to the nearest microstep and clamped to the syringe
    travel.  Clamping also pins the exact total to the end stop, so pushing
    against a stop does not bank steps that would replay on reversal.
    """
    if not math.isfinite(rpm) or abs(rpm) > params.max_rpm:
        raise MotorSpeedError(f"motor speed {rpm} rpm outside +/-{params.max_rpm} rpm")
    if dt_s <= 0 or not math.isfinite(dt_s):
        raise ValueError(f"dt must be a positive duration, got {dt_s!r}")
    steps_per_s = rpm / 60.0 * params.microsteps_per_rev
    exact = pump.commanded_steps_exact + steps_per_s * dt_s
    count = round(exact)
    cap = params.capacity_microsteps
    saturated = False
    if count < 0:
        count, exact, saturated = 0, 0.0, True
    elif count > cap:
        count, exact, saturated = cap, float(cap), True
    return PumpState(count, exact, float(rpm), saturated)


@dataclass(frozen=True)
class ResponseLag:
    """Optional first-order lag between volume and realized shape.

    Disabled by default: the elastomer settles much faster than the control
    interval, so the quasi-static map is the baseline behaviour.
    """

    enabled: bool = False
    tau_s: float = 0.2

    def __post_init__(self) -> None:
        if self.tau_s <= 0:
            raise ValueError("lag time constant must be positive")


@dataclass(frozen=True)
class PlantState:
    """Complete simulated state at an instant."""

    pump: PumpState
    volume_ml: float
    face_diameter_mm: float
    free_angle_deg: float
    angle_deg: float
    roll_deg: float
    tool: ToolModel
    time_s: float


@dataclass(frozen=True)
class PlantModel:
    """Bundles the geometry, response curve, pump constants and lag switch."""

    geometry: BalloonGeometry = field(default_factory=BalloonGeometry)
    curve: ResponseCurve = field(default_factory=ResponseCurve)
    pump: PumpParams = field(default_factory=PumpParams)
    lag: ResponseLag = field(default_factory=ResponseLag)
    tool: ToolModel = field(default_factory=ToolModel)

    def initial_state(
        self,
        volume_ml: float = 0.0,
        roll_deg: float = 0.0,
        tool: ToolModel | None = None,
    ) -> PlantState:
        tool = self.tool if tool is None else tool
        count = round(volume_ml / self.pump.volume_quantum_ml)
        if count < 0 or count > self.pump.capacity_microsteps:
            raise ValueError(f"initial volume {volume_ml} mL outside the syringe travel")
        pump = PumpState(microstep_count=count, commanded_steps_exact=float(count))
        volume = pump.volume_ml(self.pump)
        d, free = self.curve.evaluate(volume)
        return PlantState(
            pump=pump,
            volume_ml=volume,
            face_diameter_mm=d,
            free_angle_deg=free,
            angle_deg=apply_tool(free, tool),
            roll_deg=float(roll_deg),
            tool=tool,
            time_s=0.0,
        )

    def step(self, state: PlantState, rpm: float, dt_s: float) -> PlantState:
        """One integration step: move the plunger, then re-evaluate the shape.

        With lag enabled the realized diameter/angle relax toward the
        quasi-static targets with time constant tau; otherwise they track the
        curve exactly.
        """
        pump = step_pump(state.pump, rpm, dt_s, self.pump)
        volume = pump.volume_ml(self.pump)
        d_target, free_target = self.curve.evaluate(volume)
        if self.lag.enabled:
            k = 1.0 - math.exp(-dt_s / self.lag.tau_s)
            d = state.face_diameter_mm + (d_target - state.face_diameter_mm) * k
            free = state.free_angle_deg + (free_target - state.free_angle_deg) * k
        else:
            d, free = d_target, free_target
        return PlantState(
            pump=pump,
            volume_ml=volume,
            face_diameter_mm=d,
            free_angle_deg=free,
            angle_deg=apply_tool(free, state.tool),
            roll_deg=state.roll_deg,
            tool=state.tool,
            time_s=state.time_s + dt_s,
        )

    def with_tool(self, state: PlantState, inserted: bool) -> PlantState:
        """Insert or withdraw the channel tool; the bend snaps to the new offset."""
        tool = replace(state.tool, inserted=inserted)
        return replace(state, tool=tool, angle_deg=apply_tool(state.free_angle_deg, tool))


def tip_pose(alpha_deg: float, roll_deg: float, geometry: BalloonGeometry) -> tuple[float, float, float]:
    """Tip position (mm) for a steering section bent as a constant-curvature arc.

    The section of length ``steer_len_mm`` starts along +z.  Bending by alpha
    sweeps a circular arc in the plane selected by the roll angle; roll 0
    bends toward +x.  As alpha -> 0 the pose tends to the straight section
    end, which is the value returned at alpha = 0.
    """
    if not (0.0 <= alpha_deg <= MAX_BEND_DEG):
        raise ValueError(f"bend angle {alpha_deg} deg outside [0, {MAX_BEND_DEG}]")
    length = geometry.steer_len_mm
    alpha = math.radians(alpha_deg)
    theta = math.radians(roll_deg)
    if alpha < 1e-12:
        return (0.0, 0.0, length)
    radius = length / alpha
    planar = radius * (1.0 - math.cos(alpha))
    z = radius * math.sin(alpha)
    return (planar * math.cos(theta), planar * math.sin(theta), z)
