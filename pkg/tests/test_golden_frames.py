"""Pinned-frame tests: fresh renders must match the stored PNGs bit for bit.

These catch silent drift in the renderer or the sensing pipeline.  If they
fail after an intentional change, regenerate with
scripts/regen_golden_frames.py and review the new images.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from balloonscope.config import default_config
from balloonscope.imaging import RegionOfInterest, SceneModel, from_png_bytes, render_view, sense

GOLDEN_DIR = Path(__file__).parent / "data" / "v1"
MANIFEST = json.loads((GOLDEN_DIR / "manifest.json").read_text())


@pytest.mark.parametrize("entry", MANIFEST, ids=[e["name"] for e in MANIFEST])
def test_render_matches_pinned_frame(entry):
    scene = default_config().scene if entry["noisy"] else SceneModel()
    fresh = render_view(scene, entry["alpha_deg"], entry["seed"])
    stored = from_png_bytes((GOLDEN_DIR / (entry["name"] + ".png")).read_bytes())
    assert stored.shape == fresh.shape
    assert np.array_equal(fresh, stored)


@pytest.mark.parametrize("entry", MANIFEST, ids=[e["name"] for e in MANIFEST])
def test_sensing_of_pinned_frame_matches_manifest(entry):
    stored = from_png_bytes((GOLDEN_DIR / (entry["name"] + ".png")).read_bytes())
    stats = sense(stored, RegionOfInterest())
    assert stats.channel_pixels == entry["channel_pixels"]
    assert stats.ratio == entry["ratio"]
