"""Builds data/motorcycle_fenced/: a real rectified stereo pair (the
Middlebury motorcycle scene shipped with scikit-image) with a chain-link
fence composited in front at a disparity larger than any background
disparity.

Usage: python3 scripts/make_fenced_pair.py [out_dir]
"""

import sys
from pathlib import Path

import numpy as np
from PIL import Image
from skimage import data
from skimage.transform import rescale

SCALE = 0.5
FENCE_DISPARITY = 45  # pixels at the output scale; background tops out near 30
WIRE = 3.0
PITCH = 28.0
ANGLE = np.deg2rad(45.0)
SEED = 3


def fence_coverage(h, w, shift):
    """Anti-aliased wire coverage in [0, 1], sampled 4x4 per pixel."""
    cov = np.zeros((h, w))
    offs = (np.arange(4) + 0.5) / 4
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    for oy in offs:
        for ox in offs:
            y, x = yy + oy, xx + ox + shift
            a = x * np.sin(ANGLE) + y * np.cos(ANGLE) + 0.37 * PITCH
            b = x * np.cos(ANGLE) - y * np.sin(ANGLE) + 0.61 * PITCH
            near = lambda v: np.minimum(v % PITCH, PITCH - v % PITCH) < WIRE / 2
            cov += near(a) | near(b)
    return cov / 16


def main():
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data" / "motorcycle_fenced"
    out.mkdir(parents=True, exist_ok=True)
    left, right, _ = data.stereo_motorcycle()
    left = rescale(left / 255.0, SCALE, channel_axis=-1, anti_aliasing=True)
    right = rescale(right / 255.0, SCALE, channel_axis=-1, anti_aliasing=True)
    h, w = left.shape[:2]
    rng = np.random.default_rng(SEED)
    # Galvanised-wire grey with mild per-pixel variation, shared by both views
    # through the fence's own coordinates.
    tone = 0.12 + 0.03 * rng.standard_normal((h, w + FENCE_DISPARITY))
    tone = np.clip(tone, 0.0, 1.0)
    for img, shift, name in ((left, 0, "left"), (right, FENCE_DISPARITY, "right")):
        cov = fence_coverage(h, w, shift)[..., None]
        colour = tone[:, shift:shift + w, None]
        comp = (1 - cov) * img + cov * colour
        Image.fromarray((np.clip(comp, 0, 1) * 255 + 0.5).astype(np.uint8)).save(out / f"{name}.png")
    print(f"wrote {out} ({w}x{h})")


if __name__ == "__main__":
    main()
