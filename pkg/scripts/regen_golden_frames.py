"""Regenerate the pinned camera frames under tests/data/v1/.

Run this only when the rendering pipeline changes on purpose; the golden
tests exist to catch accidental drift, so a regen should be a deliberate,
reviewed act.  Each frame is stored losslessly as PNG next to a manifest
recording the render inputs and the pixel ratio the sensing pipeline
reports for it.
"""

import json
from pathlib import Path

from balloonscope.config import default_config
from balloonscope.imaging import RegionOfInterest, SceneModel, render_view, sense, to_png_bytes

GOLDEN_DIR = Path(__file__).resolve().parent.parent / "tests" / "data" / "v1"

# (name, alpha_deg, seed, noisy) -- a clean frame plus noisy frames spanning
# the bend range, including the deployment plateau end and full deflection.
CASES = [
    ("clean_060", 60.0, None, False),
    ("noisy_000", 0.0, 11, True),
    ("noisy_037", 37.5, 12, True),
    ("noisy_100", 100.0, 13, True),
]


def main():
    cfg = default_config()
    clean = SceneModel()
    roi = RegionOfInterest()
    GOLDEN_DIR.mkdir(parents=True, exist_ok=True)
    manifest = []
    for name, alpha, seed, noisy in CASES:
        scene = cfg.scene if noisy else clean
        frame = render_view(scene, alpha, seed)
        (GOLDEN_DIR / f"{name}.png").write_bytes(to_png_bytes(frame))
        stats = sense(frame, roi)
        manifest.append({
            "name": name,
            "alpha_deg": alpha,
            "seed": seed,
            "noisy": noisy,
            "ratio": stats.ratio,
            "channel_pixels": stats.channel_pixels,
        })
        print(f"{name}: alpha={alpha:6.1f} seed={seed} ratio={stats.ratio:.6f}")
    (GOLDEN_DIR / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(CASES)} frames to {GOLDEN_DIR}")


if __name__ == "__main__":
    main()
