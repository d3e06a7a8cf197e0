import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balloonscope.plant import (
    DEFAULT_RESPONSE_ANCHORS,
    MICROSTEPS_PER_REV,
    VOLUME_QUANTUM_ML,
    BalloonGeometry,
    GeometryError,
    MotorSpeedError,
    PlantModel,
    PumpParams,
    PumpState,
    ResponseCurve,
    ResponseCurveError,
    ResponseLag,
    ToolModel,
    apply_tool,
    step_pump,
    tip_pose,
)
from oracles import microstep_count_exact, tip_pose_quadrature


# ---------------------------------------------------------------------------
# response curve


def test_curve_hits_every_anchor():
    curve = ResponseCurve()
    for v, d, a in DEFAULT_RESPONSE_ANCHORS:
        dd, aa = curve.evaluate(v)
        assert dd == pytest.approx(d, abs=1e-12)
        assert aa == pytest.approx(a, abs=1e-12)


def test_angle_is_exactly_zero_through_deployment():
    curve = ResponseCurve()
    assert curve.deploy_volume_ml == 0.8
    for v in np.linspace(0.0, 0.8, 401):
        assert curve.angle(float(v)) == 0.0


def test_curve_monotone_on_fine_grid():
    curve = ResponseCurve()
    v = np.linspace(0.0, curve.max_volume_ml, 4001)
    d = np.array([curve.diameter(float(x)) for x in v])
    a = np.array([curve.angle(float(x)) for x in v])
    assert np.all(np.diff(d) >= 0)
    assert np.all(np.diff(a) >= 0)


def test_decoupling_face_full_before_any_bend():
    curve = ResponseCurve()
    for v in np.arange(0.0, curve.max_volume_ml + 1e-9, 0.01):
        d, a = curve.evaluate(float(v))
        if a > 0.0:
            assert d >= 8.0 - 1e-9


def test_volume_clipped_to_anchored_range():
    curve = ResponseCurve()
    assert curve.evaluate(-1.0) == curve.evaluate(0.0)
    assert curve.evaluate(99.0) == curve.evaluate(curve.max_volume_ml)
    assert curve.angle(curve.max_volume_ml) == 100.0


def test_volume_for_angle_round_trips():
    curve = ResponseCurve()
    for target in (5.0, 25.0, 60.0, 99.0):
        v = curve.volume_for_angle(target)
        assert abs(curve.angle(v) - target) < 1e-6
    with pytest.raises(ValueError):
        curve.volume_for_angle(101.0)


@pytest.mark.parametrize(
    "anchors",
    [
        [(0.0, 4.6, 0.0), (0.4, 6.5, 0.0)],  # too few
        [(0.1, 4.6, 0.0), (0.4, 6.5, 0.0), (1.0, 8.0, 10.0)],  # no zero anchor
        [(0.0, 4.6, 0.0), (0.4, 4.0, 0.0), (1.0, 8.0, 10.0)],  # diameter reverses
        [(0.0, 4.6, 5.0), (0.4, 6.5, 3.0), (1.0, 8.0, 10.0)],  # angle reverses
        [(0.0, 4.6, 0.0), (0.4, 6.5, 0.0), (1.0, 8.0, 0.0)],  # never bends
    ],
)
def test_bad_anchor_sets_rejected(anchors):
    with pytest.raises(ResponseCurveError):
        ResponseCurve(anchors)


# ---------------------------------------------------------------------------
# syringe pump


def test_one_second_at_100_rpm_lands_on_10667_microsteps():
    pump = step_pump(PumpState(), 100.0, 1.0, PumpParams())
    assert pump.microstep_count == 10667
    assert pump.microstep_count == microstep_count_exact(100.0, 1)


def test_full_speed_one_second_is_three_millilitres():
    params = PumpParams()
    pump = step_pump(PumpState(), 450.0, 1.0, params)
    assert pump.microstep_count == 48000
    assert pump.volume_ml(params) == pytest.approx(3.0, abs=1e-12)


def test_volume_always_equals_count_times_quantum():
    params = PumpParams()
    pump = PumpState()
    rng = np.random.default_rng(3)
    for _ in range(200):
        pump = step_pump(pump, float(rng.uniform(-200, 300)), 0.01, params)
        assert pump.volume_ml(params) == pump.microstep_count * VOLUME_QUANTUM_ML


def test_split_intervals_accumulate_like_one_interval():
    params = PumpParams()
    whole = step_pump(PumpState(), 77.0, 1.0, params)
    pieces = PumpState()
    for _ in range(1000):
        pieces = step_pump(pieces, 77.0, 0.001, params)
    assert pieces.microstep_count == whole.microstep_count


def test_direction_reversal_returns_to_start():
    params = PumpParams()
    pump = PumpState()
    for _ in range(500):
        pump = step_pump(pump, 100.0, 0.001, params)
    up = pump.microstep_count
    assert up > 0
    for _ in range(500):
        pump = step_pump(pump, -100.0, 0.001, params)
    assert pump.microstep_count == 0


@given(
    rpm=st.floats(min_value=-450.0, max_value=450.0, allow_nan=False),
    ms=st.integers(min_value=1, max_value=4000),
)
@settings(max_examples=60, deadline=None)
def test_accumulated_count_tracks_exact_rational(rpm, ms):
    params = PumpParams(syringe_capacity_ml=1e9)  # keep the stop out of the way
    pump = PumpState(microstep_count=10**7, commanded_steps_exact=float(10**7))
    for _ in range(ms):
        pump = step_pump(pump, rpm, 0.001, params)
    expected = 10**7 + microstep_count_exact(rpm, Fraction(ms, 1000))
    # float accumulation may land a hair's breadth across a rounding boundary
    assert abs(pump.microstep_count - expected) <= 1


def test_empty_syringe_clamps_and_flags():
    params = PumpParams()
    pump = step_pump(PumpState(), -50.0, 0.5, params)
    assert pump.microstep_count == 0
    assert pump.saturated
    assert pump.commanded_steps_exact == 0.0  # no banked steps against the stop


def test_full_syringe_clamps_at_capacity():
    params = PumpParams(syringe_capacity_ml=0.5)
    pump = PumpState()
    for _ in range(30):
        pump = step_pump(pump, 450.0, 0.1, params)
    assert pump.microstep_count == params.capacity_microsteps
    assert pump.saturated
    assert pump.volume_ml(params) == pytest.approx(0.5, abs=1e-12)


def test_overspeed_and_bad_dt_rejected():
    with pytest.raises(MotorSpeedError):
        step_pump(PumpState(), 450.1, 0.01, PumpParams())
    with pytest.raises(ValueError):
        step_pump(PumpState(), 10.0, 0.0, PumpParams())
    with pytest.raises(ValueError):
        step_pump(PumpState(), 10.0, -0.1, PumpParams())


def test_flow_scale():
    params = PumpParams()
    assert params.flow_ml_per_s(150.0) == pytest.approx(1.0)
    assert params.volume_quantum_ml == pytest.approx(6.25e-5)
    assert MICROSTEPS_PER_REV == 6400


# ---------------------------------------------------------------------------
# tool offset


def test_tool_offset_is_13_degrees_at_full_bend():
    tool = ToolModel(inserted=True)
    assert apply_tool(100.0, tool) == 100.0 - 13.0


def test_tool_offset_scales_linearly():
    tool = ToolModel(inserted=True)
    for free in (0.0, 10.0, 50.0, 60.0, 100.0):
        assert apply_tool(free, tool) == pytest.approx(free * (1.0 - 13.0 / 100.0))


def test_tool_absent_is_identity():
    tool = ToolModel(inserted=False)
    for free in (0.0, 33.3, 100.0):
        assert apply_tool(free, tool) == free


# ---------------------------------------------------------------------------
# tip pose


def test_straight_tip_points_along_z():
    geo = BalloonGeometry()
    assert tip_pose(0.0, 0.0, geo) == (0.0, 0.0, 15.0)


def test_right_angle_bend_matches_arc_geometry():
    geo = BalloonGeometry()
    x, y, z = tip_pose(90.0, 0.0, geo)
    radius = 15.0 / (math.pi / 2.0)
    assert x == pytest.approx(radius, abs=1e-12)
    assert y == 0.0
    assert z == pytest.approx(radius, abs=1e-12)


@given(
    alpha=st.floats(min_value=0.01, max_value=120.0),
    roll=st.floats(min_value=-180.0, max_value=180.0),
)
@settings(max_examples=40, deadline=None)
def test_tip_pose_agrees_with_quadrature(alpha, roll):
    geo = BalloonGeometry()
    got = tip_pose(alpha, roll, geo)
    want = tip_pose_quadrature(alpha, roll, geo.steer_len_mm)
    for g, w in zip(got, want):
        assert g == pytest.approx(w, abs=1e-7)


def test_small_angles_approach_the_straight_pose():
    geo = BalloonGeometry()
    x, y, z = tip_pose(1e-7, 0.0, geo)
    assert abs(x) < 1e-6 and y == 0.0
    assert z == pytest.approx(15.0, abs=1e-9)


def test_roll_selects_the_bend_plane():
    geo = BalloonGeometry()
    x0, y0, _ = tip_pose(60.0, 0.0, geo)
    x90, y90, _ = tip_pose(60.0, 90.0, geo)
    assert y0 == 0.0
    assert x90 == pytest.approx(0.0, abs=1e-12)
    assert y90 == pytest.approx(x0)


def test_pose_rejects_out_of_range_angles():
    geo = BalloonGeometry()
    with pytest.raises(ValueError):
        tip_pose(-1.0, 0.0, geo)
    with pytest.raises(ValueError):
        tip_pose(121.0, 0.0, geo)


# ---------------------------------------------------------------------------
# geometry constraints


def test_default_geometry_is_valid():
    geo = BalloonGeometry()
    assert geo.collapsed_od_mm <= 5.0
    assert geo.channel_id_mm >= 0.5


@pytest.mark.parametrize(
    "kwargs",
    [
        {"steer_wall_top_mm": 0.95},  # no bending asymmetry
        {"face_top_mm": 0.8},  # face would not dome
        {"collapsed_od_mm": 5.2},  # too fat for the sheath
        {"channel_id_mm": 0.4},  # bore too small
        {"steer_len_mm": -1.0},
    ],
)
def test_bad_geometry_rejected(kwargs):
    with pytest.raises(GeometryError):
        BalloonGeometry(**kwargs)


# ---------------------------------------------------------------------------
# whole plant


def test_held_infusion_reaches_the_60_degree_anchor(model):
    state = model.initial_state()
    for _ in range(3600):
        state = model.step(state, 100.0, 0.001)
    assert state.volume_ml == pytest.approx(2.4, abs=VOLUME_QUANTUM_ML)
    assert state.angle_deg == pytest.approx(60.0, abs=0.01)
    assert state.face_diameter_mm == pytest.approx(8.9, abs=0.01)
    assert state.time_s == pytest.approx(3.6)


def test_initial_state_from_volume(model):
    state = model.initial_state(volume_ml=2.4)
    assert state.volume_ml == pytest.approx(2.4, abs=VOLUME_QUANTUM_ML)
    assert state.angle_deg == pytest.approx(60.0, abs=0.01)
    with pytest.raises(ValueError):
        model.initial_state(volume_ml=-0.1)
    with pytest.raises(ValueError):
        model.initial_state(volume_ml=99.0)


def test_tool_toggle_shifts_the_achieved_angle(model):
    state = model.initial_state(volume_ml=2.4)
    free = state.free_angle_deg
    with_tool = model.with_tool(state, True)
    assert with_tool.angle_deg == pytest.approx(free * 0.87)
    back = model.with_tool(with_tool, False)
    assert back.angle_deg == state.angle_deg


def test_lag_relaxes_toward_the_quasi_static_shape():
    model = PlantModel(lag=ResponseLag(enabled=True, tau_s=0.1))
    state = model.initial_state()
    state = model.step(state, 450.0, 0.15)  # one big gulp of volume
    target_d, _ = model.curve.evaluate(state.volume_ml)
    assert 4.6 < state.face_diameter_mm < target_d  # still catching up
    for _ in range(2500):
        state = model.step(state, 0.0, 0.001)
    d_now, a_now = model.curve.evaluate(state.volume_ml)
    assert state.face_diameter_mm == pytest.approx(d_now, abs=1e-6)
    assert state.free_angle_deg == pytest.approx(a_now, abs=1e-6)
