"""Deterministic synthetic sequences with exact ground truth.

Renders a rectangular target over a flat or textured background, with
optional linear motion, per-frame scale growth, a global illumination ramp,
per-frame sensor noise, and a distractor rectangle.  Everything is driven by
one seed, so identical specs render identical sequences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import DataError
from .imaging import BoundingBox, save_image


@dataclass
class SynthSpec:
    width: int = 320
    height: int = 240
    num_frames: int = 30
    target_size: tuple = (40, 40)          # (w, h) pixels on frame 1
    target_color: tuple = (205, 90, 40)
    target_pattern: str = "flat"           # "flat", or "inset" for an inner block
    target_color2: tuple = (60, 40, 160)   # inner block color for "inset"
    start: tuple = (60.0, 120.0)           # target center on frame 1
    velocity: tuple = (0.0, 0.0)           # pixels per frame
    scale_per_frame: float = 1.0           # per-side growth factor per frame
    background_color: tuple = (96, 96, 96)
    texture_amount: float = 0.0            # 0 = flat; 1 = strong blotches
    texture_cell: int = 8                  # blotch size in pixels
    illumination_ramp: float = 0.0         # per-frame multiplicative gain slope
    noise_sigma: float = 0.0               # per-frame additive Gaussian noise
    distractor_color: tuple | None = None
    distractor_size: tuple | None = None
    distractor_start: tuple | None = None
    distractor_velocity: tuple = (0.0, 0.0)
    seed: int = 0
    name: str = "synth"

    def groundtruth_box(self, t):
        s = self.scale_per_frame**t
        return BoundingBox(
            self.start[0] + self.velocity[0] * t,
            self.start[1] + self.velocity[1] * t,
            self.target_size[0] * s,
            self.target_size[1] * s,
        )


def load_spec(path):
    """Read a JSON synthesis spec; keys mirror the SynthSpec fields."""
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read synthesis spec {path}: {exc}") from exc
    return spec_from_dict(data)


def spec_from_dict(data):
    valid = {f.name for f in fields(SynthSpec)}
    unknown = set(data) - valid
    if unknown:
        raise DataError(f"unknown synthesis spec keys: {sorted(unknown)}")
    coerced = {
        k: tuple(v) if isinstance(v, list) else v for k, v in data.items()
    }
    return SynthSpec(**coerced)


def _inside_fraction(box, width, height):
    x0, y0, w, h = box.to_topleft()
    ix = max(0.0, min(x0 + w, width) - max(x0, 0.0))
    iy = max(0.0, min(y0 + h, height) - max(y0, 0.0))
    return ix * iy / (w * h)


def _paint_rect(img, box, color):
    x0, y0, w, h = box.to_topleft()
    r0 = max(0, int(round(y0)))
    r1 = min(img.shape[0], int(round(y0 + h)))
    c0 = max(0, int(round(x0)))
    c1 = min(img.shape[1], int(round(x0 + w)))
    if r1 > r0 and c1 > c0:
        img[r0:r1, c0:c1] = color


def _make_background(spec, rng):
    base = np.empty((spec.height, spec.width, 3))
    base[:] = spec.background_color
    if spec.texture_amount > 0:
        cell = max(1, int(spec.texture_cell))
        coarse = rng.uniform(
            -1.0,
            1.0,
            ((spec.height + cell - 1) // cell, (spec.width + cell - 1) // cell, 1),
        )
        blotches = np.repeat(np.repeat(coarse, cell, axis=0), cell, axis=1)
        base += 96.0 * spec.texture_amount * blotches[: spec.height, : spec.width]
    return base


def synth_sequence(spec):
    """Render the spec to an in-memory Sequence with exact ground truth."""
    from .harness import Sequence  # local import to avoid a module cycle

    if spec.num_frames < 2:
        raise DataError("a sequence needs at least 2 frames")
    rng = np.random.default_rng(spec.seed)
    background = _make_background(spec, rng)
    frames = []
    boxes = []
    for t in range(spec.num_frames):
        gt = spec.groundtruth_box(t)
        if _inside_fraction(gt, spec.width, spec.height) < 0.5:
            raise DataError(f"target leaves the frame on frame {t + 1}")
        img = background.copy()
        if spec.distractor_color is not None:
            if spec.distractor_size is None or spec.distractor_start is None:
                raise DataError("distractor needs color, size, and start")
            dbox = BoundingBox(
                spec.distractor_start[0] + spec.distractor_velocity[0] * t,
                spec.distractor_start[1] + spec.distractor_velocity[1] * t,
                spec.distractor_size[0],
                spec.distractor_size[1],
            )
            _paint_rect(img, dbox, spec.distractor_color)
        _paint_rect(img, gt, spec.target_color)
        if spec.target_pattern == "inset":
            _paint_rect(img, gt.scaled(0.5), spec.target_color2)
        elif spec.target_pattern != "flat":
            raise DataError(f"unknown target pattern {spec.target_pattern!r}")
        if spec.illumination_ramp != 0.0:
            img *= 1.0 + spec.illumination_ramp * t
        if spec.noise_sigma > 0:
            img += rng.normal(0.0, spec.noise_sigma, img.shape)
        frames.append(np.clip(np.rint(img), 0, 255).astype(np.uint8))
        boxes.append(gt)
    return Sequence(spec.name, frames, boxes)


def write_sequence(seq, out_dir):
    """Write frames as numbered PNGs plus a groundtruth.txt in x,y,w,h form."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for i in range(len(seq)):
        save_image(seq.frame(i), out / f"{i + 1:08d}.png")
        x, y, w, h = seq.groundtruth[i].to_topleft()
        lines.append(f"{x:.2f},{y:.2f},{w:.2f},{h:.2f}")
    (out / "groundtruth.txt").write_text("\n".join(lines) + "\n")
    return out
