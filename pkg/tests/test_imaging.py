import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from balloonscope.imaging import (
    FRAME_SHAPE,
    TOTAL_PIXELS,
    ChannelLostError,
    RegionOfInterest,
    SceneError,
    SceneModel,
    brighten,
    classify_pixels,
    extract_channel_region,
    from_png_bytes,
    grayscale,
    hue_saturation,
    pixel_ratio,
    render_view,
    sense,
    sense_stages,
    to_png_bytes,
)
from oracles import (
    brighten_scalar,
    channel_pixels_reference,
    classify_keep_scalar,
    disk_pixel_count,
    hue_sat_gray_scalar,
    largest_region_filled_bfs,
)

ROI_BOX = (50, 50, 350, 350)


# ---------------------------------------------------------------------------
# colour conventions


@pytest.mark.parametrize(
    "rgb,hue,sat",
    [
        ((255, 0, 0), 0.0, 255.0),
        ((0, 255, 0), 60.0, 255.0),
        ((0, 0, 255), 120.0, 255.0),
        ((255, 255, 0), 30.0, 255.0),
        ((255, 0, 255), 150.0, 255.0),
        ((128, 128, 128), 0.0, 0.0),
        ((0, 0, 0), 0.0, 0.0),
        ((255, 0, 1), 179.88235294117646, 255.0),  # just on the red side of the wrap
    ],
)
def test_hue_saturation_landmarks(rgb, hue, sat):
    pixel = np.array([[rgb]], dtype=np.uint8)
    h, s = hue_saturation(pixel)
    assert h[0, 0] == pytest.approx(hue, abs=1e-9)
    assert s[0, 0] == pytest.approx(sat, abs=1e-9)


def test_grayscale_rounds_half_up():
    # 0.299*1 + 0.587*2 + 0.114*3 = 1.815 -> floor(2.315) = 2
    pixel = np.array([[[1, 2, 3]]], dtype=np.uint8)
    assert grayscale(pixel)[0, 0] == 2.0


@given(st.integers(0, 255), st.integers(0, 255), st.integers(0, 255))
@settings(max_examples=300, deadline=None)
def test_hue_sat_gray_match_scalar_reference(r, g, b):
    pixel = np.array([[[r, g, b]]], dtype=np.uint8)
    h, s = hue_saturation(pixel)
    gray = grayscale(pixel)
    hh, ss, gg = hue_sat_gray_scalar(r, g, b)
    assert h[0, 0] == hh
    assert s[0, 0] == ss
    assert gray[0, 0] == gg


def test_brighten_rounds_half_away_and_caps():
    frame = np.array([[[1, 2, 73], [74, 0, 255]]], dtype=np.uint8)
    out = brighten(frame)
    # 1*3.5+0.5=4.0, 2*3.5+0.5=7.5 -> 7, 73*3.5=255.5 -> floor(256)=256 capped
    assert out.tolist() == [[[4, 7, 255], [255, 0, 255]]]


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=25, deadline=None)
def test_brighten_matches_scalar_reference(seed):
    rng = np.random.default_rng(seed)
    frame = rng.integers(0, 256, size=(8, 9, 3), dtype=np.uint8)
    assert np.array_equal(brighten(frame), brighten_scalar(frame))


# ---------------------------------------------------------------------------
# scene rendering


def test_render_is_deterministic_per_seed():
    scene = SceneModel(noise_amplitude=2.0, radius_jitter_px=0.2)
    a = render_view(scene, 40.0, seed=[7, 3])
    b = render_view(scene, 40.0, seed=[7, 3])
    c = render_view(scene, 40.0, seed=[7, 4])
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_render_paints_the_three_scene_regions():
    scene = SceneModel()
    frame = render_view(scene, 0.0)
    assert frame.shape == FRAME_SHAPE
    assert tuple(frame[0, 0]) == scene.vignette_rgb  # corner, outside the circle
    assert tuple(frame[200, 200]) == scene.channel_rgb  # disk centre
    assert tuple(frame[60, 200]) == scene.blood_rgb  # inside circle, off the disk


def test_disk_grows_and_drifts_with_angle():
    scene = SceneModel()
    assert scene.channel_radius_px(0.0) == pytest.approx(39.1)
    assert scene.channel_radius_px(100.0) == pytest.approx(39.1 + 73.7)
    assert scene.channel_center(100.0) == pytest.approx((220.0, 210.0))


def test_scene_rejects_disks_that_escape_the_vignette():
    with pytest.raises(SceneError):
        SceneModel(radius_px_per_deg=2.0)
    with pytest.raises(SceneError):
        SceneModel(noise_amplitude=-0.1)


# ---------------------------------------------------------------------------
# classification and extraction against the oracles


def test_classification_keeps_channel_kills_blood_and_vignette(roi):
    scene = SceneModel()
    frame = render_view(scene, 30.0)
    stages = sense_stages(frame, roi)
    classified = stages.classified
    assert tuple(classified[0, 0]) == (0, 0, 0)  # vignette goes to black
    assert tuple(classified[60, 200]) == (0, 0, 0)  # blood goes to black
    cx, cy = scene.channel_center(30.0)
    assert classified[int(cy), int(cx)].any()  # channel survives
    assert tuple(classified[40, 200]) == (0, 0, 0)  # above the region of interest


@pytest.mark.parametrize("alpha,seeded", [(0.0, False), (45.0, True), (100.0, False)])
def test_keep_mask_matches_per_pixel_oracle(roi, alpha, seeded):
    scene = SceneModel(noise_amplitude=1.5 if seeded else 0.0)
    frame = render_view(scene, alpha, seed=[11, int(alpha)] if seeded else None)
    stages = sense_stages(frame, roi)
    keep = stages.classified.any(axis=2)
    oracle = classify_keep_scalar(brighten_scalar(frame), ROI_BOX)
    assert np.array_equal(keep, oracle)


def test_extraction_matches_bfs_oracle_on_synthetic_masks():
    rng = np.random.default_rng(5)
    for _ in range(20):
        mask = rng.random((40, 50)) < 0.45
        frame = np.zeros((40, 50, 3), dtype=np.uint8)
        frame[mask] = (10, 200, 30)
        size, filled = largest_region_filled_bfs(mask)
        if size < 8:
            with pytest.raises(ChannelLostError):
                extract_channel_region(frame, min_pixels=8)
        else:
            got = extract_channel_region(frame, min_pixels=8)
            assert np.array_equal(got, filled)


def test_diagonal_contact_is_one_region():
    frame = np.zeros((6, 6, 3), dtype=np.uint8)
    frame[1, 1] = frame[2, 2] = frame[3, 3] = (50, 120, 50)
    mask = extract_channel_region(frame, min_pixels=3)
    assert int(mask.sum()) == 3


def test_largest_region_wins_and_holes_fill():
    frame = np.zeros((30, 30, 3), dtype=np.uint8)
    frame[2:6, 2:6] = (40, 160, 90)  # 16 px blob
    frame[10:20, 10:20] = (40, 160, 90)  # 100 px blob with a hole
    frame[14, 14] = (0, 0, 0)
    mask = extract_channel_region(frame, min_pixels=10)
    assert mask[14, 14]  # hole filled
    assert not mask[3, 3]  # smaller blob discarded
    assert int(mask.sum()) == 100


def test_channel_lost_when_region_too_small():
    frame = np.zeros((20, 20, 3), dtype=np.uint8)
    frame[5:12, 5:12] = (40, 160, 90)  # 49 px, one short of the floor
    with pytest.raises(ChannelLostError):
        extract_channel_region(frame, min_pixels=50)
    frame[12, 5] = (40, 160, 90)  # 50th pixel touches the blob
    assert int(extract_channel_region(frame, min_pixels=50).sum()) == 50


def test_channel_lost_on_blood_only_frame(roi):
    scene = SceneModel()
    frame = np.empty(FRAME_SHAPE, dtype=np.uint8)
    frame[:, :] = scene.blood_rgb
    with pytest.raises(ChannelLostError):
        sense(frame, roi)


# ---------------------------------------------------------------------------
# end-to-end pixel ratio


def test_ratio_matches_full_reference_pipeline(roi):
    scene = SceneModel(noise_amplitude=1.5, radius_jitter_px=0.15)
    for k, alpha in enumerate((0.0, 33.0, 76.0)):
        frame = render_view(scene, alpha, seed=[23, k])
        stats = sense(frame, roi)
        expected = channel_pixels_reference(frame, ROI_BOX)
        assert stats.channel_pixels == expected
        assert stats.total_pixels == TOTAL_PIXELS


def test_noise_free_ratio_equals_disk_geometry(roi):
    scene = SceneModel()
    for alpha in (0.0, 20.0, 60.0, 100.0):
        frame = render_view(scene, alpha)
        stats = sense(frame, roi)
        cx, cy = scene.channel_center(alpha)
        expected = disk_pixel_count(cx, cy, scene.channel_radius_px(alpha), ROI_BOX)
        assert stats.channel_pixels == expected
        assert stats.ratio == expected / TOTAL_PIXELS


def test_ratio_increases_with_angle(roi):
    scene = SceneModel()
    ratios = [sense(render_view(scene, a), roi).ratio for a in np.linspace(0, 100, 11)]
    assert all(b > a for a, b in zip(ratios, ratios[1:]))
    assert 0.02 < ratios[0] < 0.04
    assert 0.2 < ratios[-1] < 0.3


def test_pixel_stats_bookkeeping():
    mask = np.zeros((4, 5), dtype=bool)
    mask[1, 1] = mask[2, 2] = True
    stats = pixel_ratio(mask)
    assert stats.channel_pixels == 2
    assert stats.total_pixels == 20
    assert stats.ratio == 0.1


# ---------------------------------------------------------------------------
# region of interest and serialization


def test_roi_validation():
    with pytest.raises(ValueError):
        RegionOfInterest(x0=-1)
    with pytest.raises(ValueError):
        RegionOfInterest(x0=300, x1=200)
    with pytest.raises(ValueError):
        RegionOfInterest(y1=401)
    m = RegionOfInterest().mask()
    assert m[50, 50] and not m[49, 50] and not m[350, 200]
    assert int(m.sum()) == 300 * 300


def test_png_round_trip_is_lossless():
    rng = np.random.default_rng(9)
    frame = rng.integers(0, 256, size=FRAME_SHAPE, dtype=np.uint8)
    data = to_png_bytes(frame, compress_level=1)
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    assert np.array_equal(from_png_bytes(data), frame)
