"""Synthetic endoscope camera and the pixel-classification sensing pipeline.

The camera looks through the balloon's optical face at a blood-red field with
the dark working-channel tip in view.  As the balloon bends, the channel tip
fills more of the image, so the fraction of channel pixels is a monotone proxy
for the bend angle.  Sensing runs these stages, in this order:

    1. brighten      multiply RGB by a gain (default 3.5), round half up, cap 255
    2. classify      black out red-hued pixels, near-black pixels, and
                     everything outside the region of interest
    3. extract       keep the largest 8-connected surviving region, fill its
                     internal holes; fewer than ``min_pixels`` means the
                     channel is lost
    4. ratio         channel pixels / total pixels

Image conventions (fixed, relied on by the classifier tests):
    frames           uint8 RGB, shape (H, W, 3), default 400 x 400
    hue              [0, 180) half-degree scale from the max/min chroma form
    saturation       0..255 as delta/max * 255 (0 where max is 0)
    grayscale        floor(0.299 R + 0.587 G + 0.114 B + 0.5)
All classifier arithmetic happens in float64 on the brightened frame.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from PIL import Image
from scipy import ndimage

FRAME_WIDTH = 400
FRAME_HEIGHT = 400
FRAME_SHAPE = (FRAME_HEIGHT, FRAME_WIDTH, 3)
TOTAL_PIXELS = FRAME_WIDTH * FRAME_HEIGHT

BRIGHTEN_GAIN = 3.5
RED_HUE_LOW = 10.0  # hue <= low or >= high counts as red
RED_HUE_HIGH = 160.0
RED_SAT_MIN = 15.0
GRAY_BLACK_MAX = 5.0  # grayscale below this is treated as black
MIN_CHANNEL_PIXELS = 50

# 8-connectivity for the channel region; diagonal contact keeps a speckled
# boundary from splitting the blob.
_LABEL_STRUCTURE = np.ones((3, 3), dtype=bool)


class ChannelLostError(RuntimeError):
    """The working channel is not visible in the frame."""


class SceneError(ValueError):
    """Scene parameters cannot produce a usable calibration view."""


@dataclass(frozen=True)
class RegionOfInterest:
    """Inclusive-exclusive pixel rectangle [x0, x1) x [y0, y1)."""

    x0: int = 50
    y0: int = 50
    x1: int = 350
    y1: int = 350

    def __post_init__(self) -> None:
        if not (0 <= self.x0 < self.x1 <= FRAME_WIDTH):
            raise ValueError(f"x span [{self.x0}, {self.x1}) outside frame width {FRAME_WIDTH}")
        if not (0 <= self.y0 < self.y1 <= FRAME_HEIGHT):
            raise ValueError(f"y span [{self.y0}, {self.y1}) outside frame height {FRAME_HEIGHT}")

    def mask(self) -> np.ndarray:
        m = np.zeros((FRAME_HEIGHT, FRAME_WIDTH), dtype=bool)
        m[self.y0 : self.y1, self.x0 : self.x1] = True
        return m


@dataclass(frozen=True)
class PixelStats:
    """Channel-pixel accounting for one frame."""

    channel_pixels: int
    total_pixels: int

    @property
    def ratio(self) -> float:
        return self.channel_pixels / self.total_pixels


@dataclass(frozen=True)
class SceneModel:
    """Parametric scene: red field, dark channel disk, dark vignette ring.

    The channel disk grows linearly with bend angle and its centre drifts a
    little, mimicking the tip translating in view.  ``noise_amplitude`` adds
    per-pixel Gaussian RGB noise; ``radius_jitter_px`` perturbs the disk
    radius once per frame, standing in for pulsatile motion of the field.
    """

    blood_rgb: tuple[int, int, int] = (120, 8, 12)
    channel_rgb: tuple[int, int, int] = (60, 70, 80)
    vignette_rgb: tuple[int, int, int] = (1, 1, 1)
    vignette_radius_px: float = 190.0
    channel_center_px: tuple[float, float] = (200.0, 200.0)
    center_drift_px_per_deg: tuple[float, float] = (0.2, 0.1)
    radius_px_at_zero: float = 39.1
    radius_px_per_deg: float = 0.737
    noise_amplitude: float = 0.0
    radius_jitter_px: float = 0.0
    max_angle_deg: float = 110.0

    def __post_init__(self) -> None:
        if self.radius_px_at_zero <= 0 or self.radius_px_per_deg <= 0:
            raise SceneError("channel disk must start visible and grow strictly with angle")
        if self.noise_amplitude < 0 or self.radius_jitter_px < 0:
            raise SceneError("noise magnitudes cannot be negative")
        cx0, cy0 = self.channel_center(0.0)
        cx1, cy1 = self.channel_center(self.max_angle_deg)
        fx, fy = FRAME_WIDTH / 2.0, FRAME_HEIGHT / 2.0
        for (cx, cy), r in (
            ((cx0, cy0), self.channel_radius_px(0.0)),
            ((cx1, cy1), self.channel_radius_px(self.max_angle_deg)),
        ):
            if math.hypot(cx - fx, cy - fy) + r > self.vignette_radius_px:
                raise SceneError("channel disk leaves the vignette within the working range")

    def channel_radius_px(self, alpha_deg: float) -> float:
        return self.radius_px_at_zero + self.radius_px_per_deg * alpha_deg

    def channel_center(self, alpha_deg: float) -> tuple[float, float]:
        dx, dy = self.center_drift_px_per_deg
        cx, cy = self.channel_center_px
        return (cx + dx * alpha_deg, cy + dy * alpha_deg)

    def channel_area_px(self, alpha_deg: float) -> float:
        """Continuous disk area; the rendered pixel count tracks this closely."""
        return math.pi * self.channel_radius_px(alpha_deg) ** 2


@lru_cache(maxsize=4)
def _pixel_grids(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    yy, xx = np.mgrid[0:height, 0:width]
    return yy.astype(np.float64), xx.astype(np.float64)


@lru_cache(maxsize=4)
def _vignette_mask(height: int, width: int, radius: float) -> np.ndarray:
    yy, xx = _pixel_grids(height, width)
    cx, cy = width / 2.0, height / 2.0
    return (xx - cx) ** 2 + (yy - cy) ** 2 > radius * radius


def render_view(scene: SceneModel, alpha_deg: float, seed=None) -> np.ndarray:
    """Render one uint8 RGB frame of the scene at the given bend angle.

    ``seed`` feeds a fresh generator; identical (scene, angle, seed) triples
    render identical frames.  Pass None for a noise-free nominal frame (jitter
    and pixel noise both need the generator, so they are skipped).
    """
    alpha = float(alpha_deg)
    rng = None if seed is None else np.random.default_rng(seed)
    radius = scene.channel_radius_px(alpha)
    if rng is not None and scene.radius_jitter_px > 0:
        radius = max(1.0, radius + scene.radius_jitter_px * rng.standard_normal())
    cx, cy = scene.channel_center(alpha)

    frame = np.empty(FRAME_SHAPE, dtype=np.uint8)
    frame[:, :] = scene.blood_rgb
    frame[_vignette_mask(FRAME_HEIGHT, FRAME_WIDTH, scene.vignette_radius_px)] = scene.vignette_rgb

    # Rasterize the disk inside its bounding box only; centre-of-pixel test.
    x_lo = max(0, int(math.floor(cx - radius)) - 1)
    x_hi = min(FRAME_WIDTH, int(math.ceil(cx + radius)) + 2)
    y_lo = max(0, int(math.floor(cy - radius)) - 1)
    y_hi = min(FRAME_HEIGHT, int(math.ceil(cy + radius)) + 2)
    yy, xx = _pixel_grids(FRAME_HEIGHT, FRAME_WIDTH)
    sub_y = yy[y_lo:y_hi, x_lo:x_hi] - cy
    sub_x = xx[y_lo:y_hi, x_lo:x_hi] - cx
    disk = sub_x * sub_x + sub_y * sub_y <= radius * radius
    frame[y_lo:y_hi, x_lo:x_hi][disk] = scene.channel_rgb

    if rng is not None and scene.noise_amplitude > 0:
        noisy = frame.astype(np.float64) + scene.noise_amplitude * rng.standard_normal(frame.shape)
        frame = np.clip(np.rint(noisy), 0, 255).astype(np.uint8)
    return frame


def render_frame(state, scene: SceneModel, seed=None) -> np.ndarray:
    """Render the camera view for a plant state (uses its achieved bend angle)."""
    return render_view(scene, state.angle_deg, seed)


def brighten(frame: np.ndarray, gain: float = BRIGHTEN_GAIN) -> np.ndarray:
    """Scale RGB by ``gain``, rounding half away from zero, saturating at 255."""
    out = np.floor(frame.astype(np.float64) * gain + 0.5)
    return np.minimum(out, 255.0).astype(np.uint8)


def hue_saturation(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hue on the half-degree [0, 180) scale and saturation 0..255, float64.

    Hue uses the standard max/min chroma form; the red-dominant branch wraps
    modulo 6 so negative green-minus-blue lands in the upper hue range.
    Zero-chroma pixels get hue 0 and saturation 0.
    """
    f = frame.astype(np.float64)
    r, g, b = f[..., 0], f[..., 1], f[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn
    safe = np.where(delta == 0, 1.0, delta)
    h_r = ((g - b) / safe) % 6.0
    h_g = (b - r) / safe + 2.0
    h_b = (r - g) / safe + 4.0
    segment = np.where(mx == r, h_r, np.where(mx == g, h_g, h_b))
    hue = np.where(delta == 0, 0.0, 60.0 * segment / 2.0)
    sat = np.where(mx == 0, 0.0, delta / np.where(mx == 0, 1.0, mx) * 255.0)
    return hue, sat


def grayscale(frame: np.ndarray) -> np.ndarray:
    """Luma with the usual RGB weights, rounded down after adding one half."""
    f = frame.astype(np.float64)
    return np.floor(0.299 * f[..., 0] + 0.587 * f[..., 1] + 0.114 * f[..., 2] + 0.5)


def classify_pixels(frame: np.ndarray, roi: RegionOfInterest) -> np.ndarray:
    """Black out red-hued, near-black, and out-of-interest pixels.

    Operates on an already-brightened frame.  Returns a new frame where
    rejected pixels are (0, 0, 0) and survivors keep their values.
    """
    hue, sat = hue_saturation(frame)
    gray = grayscale(frame)
    red = ((hue <= RED_HUE_LOW) | (hue >= RED_HUE_HIGH)) & (sat > RED_SAT_MIN)
    dark = gray < GRAY_BLACK_MAX
    keep = ~(red | dark) & roi.mask()
    out = frame.copy()
    out[~keep] = 0
    return out


def extract_channel_region(frame: np.ndarray, min_pixels: int = MIN_CHANNEL_PIXELS) -> np.ndarray:
    """Largest 8-connected non-black region with its internal holes filled.

    Raises ChannelLostError when the largest region (before hole filling) has
    fewer than ``min_pixels`` pixels, including the all-black case.  Losing
    the channel is a fault, not an empty measurement: a pixel ratio of zero
    would read as a huge negative error and slam the pump.
    """
    nonblack = frame.any(axis=2)
    labels, count = ndimage.label(nonblack, structure=_LABEL_STRUCTURE)
    if count == 0:
        raise ChannelLostError("no candidate channel pixels in frame")
    sizes = ndimage.sum_labels(nonblack, labels, index=np.arange(1, count + 1))
    best = int(np.argmax(sizes)) + 1
    if sizes[best - 1] < min_pixels:
        raise ChannelLostError(
            f"largest candidate region has {int(sizes[best - 1])} px, below {min_pixels}"
        )
    return ndimage.binary_fill_holes(labels == best)


def pixel_ratio(mask: np.ndarray) -> PixelStats:
    """Channel-pixel count over the whole frame's pixel count."""
    return PixelStats(int(np.count_nonzero(mask)), int(mask.shape[0] * mask.shape[1]))


@dataclass(frozen=True)
class SenseStages:
    """Intermediate products of one sensing pass, for tests and debug views."""

    brightened: np.ndarray
    classified: np.ndarray
    mask: np.ndarray
    stats: PixelStats


def sense_stages(
    frame: np.ndarray,
    roi: RegionOfInterest,
    min_pixels: int = MIN_CHANNEL_PIXELS,
    gain: float = BRIGHTEN_GAIN,
) -> SenseStages:
    brightened = brighten(frame, gain)
    classified = classify_pixels(brightened, roi)
    mask = extract_channel_region(classified, min_pixels)
    return SenseStages(brightened, classified, mask, pixel_ratio(mask))


def sense(
    frame: np.ndarray,
    roi: RegionOfInterest,
    min_pixels: int = MIN_CHANNEL_PIXELS,
    gain: float = BRIGHTEN_GAIN,
) -> PixelStats:
    """Full sensing pass: brighten, classify, extract, count."""
    return sense_stages(frame, roi, min_pixels, gain).stats


def to_png_bytes(frame: np.ndarray, compress_level: int = 6) -> bytes:
    buf = io.BytesIO()
    Image.fromarray(frame, mode="RGB").save(buf, format="PNG", compress_level=compress_level)
    return buf.getvalue()


def from_png_bytes(data: bytes) -> np.ndarray:
    with Image.open(io.BytesIO(data)) as im:
        return np.asarray(im.convert("RGB"))
