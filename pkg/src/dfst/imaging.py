"""Image decoding, patch geometry, and the windowed multi-channel appearance stack.

The appearance representation stacks one normalized luminance channel with 10
color-name probability channels, every channel tapered by a separable Hann
window so the map is periodic enough for frequency-domain correlation.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError

CN_TABLE_ROWS = 32768
CN_CHANNELS = 10
NUM_CHANNELS = 1 + CN_CHANNELS

# ITU-R BT.601 luminance weights
GRAY_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass
class BoundingBox:
    """Axis-aligned box in center convention; extents are real-valued pixels.

    The center may lie outside the image (a tracker can drift to the border),
    but the extent must stay positive.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        if not (self.w > 0 and self.h > 0):
            raise DataError(f"box extent must be positive, got w={self.w}, h={self.h}")

    @classmethod
    def from_topleft(cls, x, y, w, h):
        return cls(x + w / 2.0, y + h / 2.0, float(w), float(h))

    def to_topleft(self):
        return (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)

    @property
    def area(self):
        return self.w * self.h

    def scaled(self, factor):
        """Same center, extents multiplied by ``factor``."""
        return BoundingBox(self.cx, self.cy, self.w * factor, self.h * factor)

    def shifted(self, dx, dy):
        return BoundingBox(self.cx + dx, self.cy + dy, self.w, self.h)


class CNTable:
    """Lookup table mapping quantized RGB to a distribution over 10 color names.

    Immutable after construction and safe to share between tracker instances.
    """

    def __init__(self, rows):
        rows = np.ascontiguousarray(rows, dtype=np.float64)
        if rows.shape != (CN_TABLE_ROWS, CN_CHANNELS):
            raise DataError(
                f"row count mismatch: expected {CN_TABLE_ROWS}x{CN_CHANNELS}, got {rows.shape}"
            )
        if np.any(rows < 0.0) or np.any(rows > 1.0):
            raise DataError("probability out of [0, 1]")
        sums = rows.sum(axis=1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > 1e-3)
        if bad.size:
            raise DataError(
                f"row not a distribution: row {bad[0]} sums to {sums[bad[0]]:.6f}"
            )
        rows.setflags(write=False)
        self.rows = rows

    def lookup(self, img):
        """Per-pixel color-name probabilities of an RGB image, shape (H, W, 10)."""
        return self.rows[cn_index_map(img)]


def cn_index(r, g, b):
    """Row index of an RGB triple in the 32x32x32-quantized color table."""
    return int(r) // 8 + 32 * (int(g) // 8) + 1024 * (int(b) // 8)


def cn_index_map(img):
    """Vectorized ``cn_index`` over the last axis of an (..., 3) uint8 array."""
    q = np.asarray(img).astype(np.int64) // 8
    return q[..., 0] + 32 * q[..., 1] + 1024 * q[..., 2]


def load_cn_table(path):
    """Load a color-name table: CSV, or raw little-endian float64 for ``.bin``."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"color-name table not found: {path}")
    if path.suffix == ".bin":
        raw = np.fromfile(path, dtype="<f8")
        if raw.size != CN_TABLE_ROWS * CN_CHANNELS:
            raise DataError(
                f"row count mismatch: expected {CN_TABLE_ROWS * CN_CHANNELS} values, "
                f"got {raw.size}"
            )
        return CNTable(raw.reshape(CN_TABLE_ROWS, CN_CHANNELS))
    try:
        rows = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DataError(f"malformed color-name table row: {exc}") from exc
    return CNTable(rows)


# One representative RGB per color name for the procedural fallback table.
_CN_ANCHORS = np.array(
    [
        [16, 16, 16],     # black
        [32, 64, 200],    # blue
        [120, 72, 24],    # brown
        [128, 128, 128],  # grey
        [40, 160, 48],    # green
        [240, 144, 32],   # orange
        [248, 160, 192],  # pink
        [136, 48, 168],   # purple
        [216, 40, 40],    # red
        [240, 224, 48],   # yellow
    ],
    dtype=np.float64,
)


@functools.lru_cache(maxsize=1)
def default_cn_table():
    """Smooth procedural color-name mapping built from 10 RGB anchor colors.

    A stand-in for a learned table when none is supplied: each quantized RGB
    cell is softly assigned to the anchors by Gaussian distance weighting.
    """
    i = np.arange(CN_TABLE_ROWS)
    rgb = np.stack([i % 32, (i // 32) % 32, i // 1024], axis=1) * 8.0 + 3.5
    d2 = ((rgb[:, None, :] - _CN_ANCHORS[None, :, :]) ** 2).sum(axis=2)
    w = np.exp(-d2 / (2.0 * 60.0**2))
    w /= w.sum(axis=1, keepdims=True)
    return CNTable(w)


def load_image(path):
    """Decode a PNG/JPEG file to an (H, W, 3) uint8 RGB array."""
    with PILImage.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_image(img, path):
    PILImage.fromarray(np.asarray(img, dtype=np.uint8)).save(path)


def _round_extent(v):
    # half-up rounding keeps extents deterministic across platforms
    return int(np.floor(v + 0.5))


def extract_patch(img, box):
    """Crop round(w) x round(h) centered on the box, replicating edge pixels
    for any part of the crop that falls outside the image."""
    img = np.asarray(img)
    pw = _round_extent(box.w)
    ph = _round_extent(box.h)
    if pw < 1 or ph < 1:
        raise DataError(f"degenerate box: rounds to {pw}x{ph}")
    rows = int(np.floor(box.cy)) + np.arange(ph) - ph // 2
    cols = int(np.floor(box.cx)) + np.arange(pw) - pw // 2
    rows = np.clip(rows, 0, img.shape[0] - 1)
    cols = np.clip(cols, 0, img.shape[1] - 1)
    return img[rows[:, None], cols[None, :]]


def resize_bilinear(img, out_w, out_h):
    """Bilinear resample with half-pixel sample centers, rounded back to uint8."""
    if out_w < 1 or out_h < 1:
        raise DataError(f"output size must be at least 1x1, got {out_w}x{out_h}")
    vals = np.asarray(img).astype(np.float64)
    vals = _lerp_axis(vals, out_h, axis=0)
    vals = _lerp_axis(vals, out_w, axis=1)
    return np.clip(np.rint(vals), 0, 255).astype(np.uint8)


def _lerp_axis(vals, n_out, axis):
    n_in = vals.shape[axis]
    src = np.clip((np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5, 0.0, n_in - 1.0)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    shape = [1] * vals.ndim
    shape[axis] = n_out
    frac = frac.reshape(shape)
    return np.take(vals, lo, axis=axis) * (1.0 - frac) + np.take(vals, hi, axis=axis) * frac


def hann_window(h, w):
    """Separable Hann taper; a 1-cell axis contributes no taper."""
    return np.outer(np.hanning(h), np.hanning(w))


def grayscale(img):
    """Luminance in [0, 255] as float64."""
    return np.asarray(img, dtype=np.float64) @ GRAY_WEIGHTS


def build_feature_map(patch, cn):
    """Stack normalized luminance with mean-centered color-name channels.

    Channel 0 is gray/255 - 0.5.  Channels 1..10 are the color-name
    probabilities with their per-channel spatial mean subtracted.  Every
    channel is then multiplied by the separable Hann window.
    """
    patch = np.asarray(patch)
    h, w = patch.shape[:2]
    fmap = np.empty((h, w, NUM_CHANNELS))
    fmap[:, :, 0] = grayscale(patch) / 255.0 - 0.5
    probs = cn.lookup(patch)
    fmap[:, :, 1:] = probs - probs.mean(axis=(0, 1))
    fmap *= hann_window(h, w)[:, :, None]
    return fmap
