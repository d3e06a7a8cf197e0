"""Calibration between bend angle and pixel ratio, and trace smoothing.

The pixel ratio grows monotonically with bend angle but the exact shape
depends on optics and scene, so each session fits a low-order polynomial
``P = f(alpha)`` from a sweep and inverts it by bisection at runtime.  A
degree-4 fit tracks the gentle curvature of disk-area growth without the
wiggle room to go non-monotone on clean data; the fit refuses silently bad
inputs and flags non-monotone results as unusable for control.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import savgol_filter

CALIBRATION_DEGREE = 4
MIN_SPAN_DEG = 30.0
INVERSION_TOL_DEG = 0.01
MONOTONE_PROBE_STEP_DEG = 0.1

SAVGOL_WINDOW = 7
SAVGOL_ORDER = 2


class InsufficientSamplesError(ValueError):
    """Too few or too poorly spread samples to fit a calibration."""


class NonMonotoneCalibrationWarning(UserWarning):
    """Fit came out non-monotone; it cannot be inverted for control."""


class AngleEstimate(NamedTuple):
    angle_deg: float
    saturated: bool


@dataclass(frozen=True)
class Calibration:
    """Polynomial pixel-ratio model over a bracketed angle range.

    ``coeffs`` are ascending powers (constant first).  ``bracket_deg`` is the
    sampled angle range; the polynomial means nothing outside it and
    estimates clamp to it.  ``monotone`` records whether the fit increases
    over the whole bracket; only monotone calibrations may steer.
    """

    coeffs: tuple[float, ...]
    bracket_deg: tuple[float, float]
    rmse: float
    monotone: bool

    def evaluate(self, alpha_deg: float) -> float:
        return float(npoly.polyval(alpha_deg, np.asarray(self.coeffs)))

    def to_dict(self) -> dict:
        return {
            "coeffs": list(self.coeffs),
            "bracket_deg": list(self.bracket_deg),
            "rmse": self.rmse,
            "monotone": self.monotone,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, data: dict) -> "Calibration":
        return cls(
            coeffs=tuple(float(c) for c in data["coeffs"]),
            bracket_deg=(float(data["bracket_deg"][0]), float(data["bracket_deg"][1])),
            rmse=float(data["rmse"]),
            monotone=bool(data["monotone"]),
        )

    @classmethod
    def load(cls, path) -> "Calibration":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _is_monotone(coeffs: np.ndarray, lo: float, hi: float, step: float = MONOTONE_PROBE_STEP_DEG) -> bool:
    n = max(2, int(math.ceil((hi - lo) / step)) + 1)
    grid = np.linspace(lo, hi, n)
    values = npoly.polyval(grid, coeffs)
    return bool(np.all(np.diff(values) > 0))


def fit_calibration(
    samples: Sequence[tuple[float, float]],
    degree: int = CALIBRATION_DEGREE,
) -> Calibration:
    """Least-squares polynomial fit of pixel ratio against bend angle.

    ``samples`` are (angle_deg, pixel_ratio) pairs.  Requires at least
    degree + 1 samples at degree + 1 distinct angles spanning at least 30
    degrees; anything less underdetermines the polynomial or leaves the
    bracket too short to steer across.
    """
    pairs = [(float(a), float(p)) for a, p in samples]
    if len(pairs) < degree + 1:
        raise InsufficientSamplesError(
            f"need at least {degree + 1} samples for a degree-{degree} fit, got {len(pairs)}"
        )
    alphas = np.array([a for a, _ in pairs])
    ratios = np.array([p for _, p in pairs])
    distinct = np.unique(alphas)
    if distinct.size < degree + 1:
        raise InsufficientSamplesError(
            f"need {degree + 1} distinct angles, got {distinct.size}"
        )
    span = float(distinct.max() - distinct.min())
    if span < MIN_SPAN_DEG:
        raise InsufficientSamplesError(
            f"angle span {span:.1f} deg is below the {MIN_SPAN_DEG:.0f} deg minimum"
        )
    coeffs = npoly.polyfit(alphas, ratios, degree)
    residuals = npoly.polyval(alphas, coeffs) - ratios
    rmse = float(np.sqrt(np.mean(residuals**2)))
    lo, hi = float(distinct.min()), float(distinct.max())
    monotone = _is_monotone(coeffs, lo, hi)
    if not monotone:
        warnings.warn(
            "calibration fit is not monotone over its bracket; it cannot be "
            "inverted and must not be used for steering",
            NonMonotoneCalibrationWarning,
            stacklevel=2,
        )
    return Calibration(tuple(float(c) for c in coeffs), (lo, hi), rmse, monotone)


def estimate_angle(
    calibration: Calibration,
    ratio: float,
    tol_deg: float = INVERSION_TOL_DEG,
) -> AngleEstimate:
    """Invert the calibration at a measured pixel ratio by bisection.

    Ratios outside the calibrated range clamp to the bracket edge and set the
    ``saturated`` flag; the controller treats such readings as "at least this
    far off", which is all bang-bang needs.
    """
    if not calibration.monotone:
        raise ValueError("calibration is not monotone; angle inversion is undefined")
    lo, hi = calibration.bracket_deg
    p = float(ratio)
    if p <= calibration.evaluate(lo):
        return AngleEstimate(lo, p < calibration.evaluate(lo))
    if p >= calibration.evaluate(hi):
        return AngleEstimate(hi, p > calibration.evaluate(hi))
    a, b = lo, hi
    while b - a > tol_deg:
        mid = 0.5 * (a + b)
        if calibration.evaluate(mid) < p:
            a = mid
        else:
            b = mid
    return AngleEstimate(0.5 * (a + b), False)


def smooth_trace(values: Sequence[float], window: int = SAVGOL_WINDOW, order: int = SAVGOL_ORDER) -> np.ndarray:
    """Least-squares polynomial smoothing over a sliding window.

    Interior points fit a quadratic over the centred 7-sample window; the
    first and last half-windows evaluate the quadratic fitted to the first
    and last full window, so edges do not get padded with invented data.
    Presentation-only: control and metrics always consume raw samples.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("smoothing expects a 1-D series")
    if x.size < window:
        raise ValueError(f"series of {x.size} samples is shorter than the {window} window")
    return savgol_filter(x, window_length=window, polyorder=order, mode="interp")
