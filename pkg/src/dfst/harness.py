"""Sequence ingestion, tracker execution, metrics, and result emission."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tracker as cft
from .errors import DataError
from .imaging import BoundingBox, load_image, save_image
from .tracker import TrackerConfig

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}


@dataclass
class Sequence:
    """Ordered frames (paths or in-memory arrays) with per-frame ground truth.

    A ground-truth entry of None marks a frame excluded from scoring (the
    occlusion/special markers some datasets use).
    """

    name: str
    frames: list
    groundtruth: list

    def __len__(self):
        return len(self.frames)

    def frame(self, i):
        f = self.frames[i]
        if isinstance(f, np.ndarray):
            return f
        try:
            return load_image(f)
        except Exception as exc:
            raise DataError(f"frame {i + 1}: failed to decode {f}: {exc}") from exc


def _validate_sequence(seq):
    if len(seq) < 2:
        raise DataError(f"sequence needs at least 2 frames, got {len(seq)}")
    if len(seq.groundtruth) != len(seq.frames):
        raise DataError(
            f"count mismatch: {len(seq.frames)} frames vs "
            f"{len(seq.groundtruth)} groundtruth boxes"
        )
    if seq.groundtruth[0] is None:
        raise DataError("first ground-truth box must be valid")


def polygon_to_rect(values):
    """Axis-aligned hull of a 4-corner polygon, in center convention."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (8,) or not np.all(np.isfinite(v)):
        raise DataError("polygon needs 8 finite values")
    xs, ys = v[0::2], v[1::2]
    w = float(xs.max() - xs.min())
    h = float(ys.max() - ys.min())
    if w <= 0 or h <= 0:
        raise DataError("zero-area polygon")
    return BoundingBox(float(xs.min()) + w / 2.0, float(ys.min()) + h / 2.0, w, h)


def _parse_gt_line(line, lineno):
    try:
        vals = [float(p) for p in line.strip().split(",")]
    except ValueError as exc:
        raise DataError(f"groundtruth line {lineno}: unparsable: {line.strip()!r}") from exc
    if len(vals) == 4:
        x, y, w, h = vals
        if any(np.isnan(vals)) or w <= 0 or h <= 0:
            return None
        return BoundingBox.from_topleft(x, y, w, h)
    if len(vals) == 8:
        if any(np.isnan(vals)):
            return None
        xs, ys = vals[0::2], vals[1::2]
        if max(xs) - min(xs) <= 0 or max(ys) - min(ys) <= 0:
            return None
        return polygon_to_rect(vals)
    raise DataError(f"groundtruth line {lineno}: expected 4 or 8 values, got {len(vals)}")


def load_sequence(directory):
    """VOT-style directory: ordered frame images plus a groundtruth.txt."""
    directory = Path(directory)
    gt_path = directory / "groundtruth.txt"
    if not gt_path.exists():
        raise DataError(f"missing groundtruth: {gt_path}")
    frames = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in IMAGE_EXTENSIONS
    )
    lines = [ln for ln in gt_path.read_text().splitlines() if ln.strip()]
    if len(lines) != len(frames):
        raise DataError(
            f"count mismatch: {len(frames)} frames vs {len(lines)} groundtruth lines"
        )
    boxes = [_parse_gt_line(ln, i + 1) for i, ln in enumerate(lines)]
    seq = Sequence(directory.name, list(frames), boxes)
    _validate_sequence(seq)
    return seq


def iou(a, b):
    """Intersection over union of two axis-aligned boxes."""
    ax, ay, aw, ah = a.to_topleft()
    bx, by, bw, bh = b.to_topleft()
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def center_error(a, b):
    """Euclidean distance between box centers, pixels."""
    return float(np.hypot(a.cx - b.cx, a.cy - b.cy))


@dataclass
class RunResult:
    boxes: list
    per_frame_iou: list      # NaN where the ground truth is a special frame
    fps: float               # tracker-only, frames 2..N
    fps_end_to_end: float    # includes decode and bookkeeping
    config_snapshot: dict


@dataclass
class MetricsReport:
    mean_iou: float          # average overlap over scored frames 2..N
    precision_20: float      # fraction of scored frames with center error < 20 px
    failures: int            # scored frames with zero overlap
    frames_evaluated: int
    fps: float | None = None
    fps_end_to_end: float | None = None
    config_snapshot: dict | None = None


def run_tracker(seq, cfg, cn, ranking_dump=None):
    """Initialize on frame 1 with its ground truth, then track frames 2..N.

    Ground truth is only consumed here, for initialization and scoring; the
    tracker itself never sees it.  ``ranking_dump`` optionally names a CSV
    file that receives one per-frame feature-ranking row.
    """
    _validate_sequence(seq)
    t_start = time.perf_counter()
    state = cft.init(seq.frame(0), seq.groundtruth[0], cfg, cn)
    boxes = [state.position]
    rows = []
    track_seconds = 0.0
    for i in range(1, len(seq)):
        frame = seq.frame(i)
        t0 = time.perf_counter()
        state, box = cft.track_step(state, frame)
        track_seconds += time.perf_counter() - t0
        boxes.append(box)
        if ranking_dump is not None:
            rows.append(_ranking_row(i, state))
    total_seconds = time.perf_counter() - t_start
    ious = [
        float("nan") if gt is None else iou(b, gt)
        for b, gt in zip(boxes, seq.groundtruth)
    ]
    steps = len(seq) - 1
    result = RunResult(
        boxes=boxes,
        per_frame_iou=ious,
        fps=steps / track_seconds if track_seconds > 0 else float("inf"),
        fps_end_to_end=len(seq) / total_seconds if total_seconds > 0 else float("inf"),
        config_snapshot=dataclasses.asdict(cfg),
    )
    if ranking_dump is not None:
        _write_ranking_dump(rows, state, ranking_dump)
    return result


def _ranking_row(frame_index, state):
    m = state.last_ranking.metrics
    parts = [str(frame_index)]
    for vec in (m.fisher, m.ttest_p, m.pearson, state.last_ranking.energies):
        parts.extend(f"{v:.6g}" for v in vec)
    parts.extend(str(int(i)) for i in state.selected)
    return ",".join(parts)


def _write_ranking_dump(rows, state, path):
    f = state.last_ranking.energies.size
    header = ["frame"]
    for name in ("fisher", "ttest_p", "pearson", "energy"):
        header.extend(f"{name}_{i}" for i in range(f))
    header.extend(f"selected_{i}" for i in range(len(state.selected)))
    Path(path).write_text("\n".join([",".join(header)] + rows) + "\n")


def compute_metrics(boxes, groundtruth):
    """Score predictions against ground truth over frames 2..N; special
    (None) ground-truth frames are excluded from the averages."""
    if len(boxes) != len(groundtruth):
        raise DataError(
            f"count mismatch: {len(boxes)} predictions vs {len(groundtruth)} groundtruth"
        )
    overlaps = []
    precise = []
    for b, gt in zip(boxes[1:], groundtruth[1:]):
        if gt is None:
            continue
        overlaps.append(iou(b, gt))
        precise.append(center_error(b, gt) < 20.0)
    n = len(overlaps)
    return MetricsReport(
        mean_iou=float(np.mean(overlaps)) if n else 0.0,
        precision_20=float(np.mean(precise)) if n else 0.0,
        failures=int(sum(1 for v in overlaps if v == 0.0)),
        frames_evaluated=n,
    )


def write_results(result, path):
    """One 'x,y,w,h' line per frame, top-left convention, 2 decimal places."""
    boxes = result.boxes if isinstance(result, RunResult) else result
    lines = []
    for b in boxes:
        x, y, w, h = b.to_topleft()
        lines.append(f"{x:.2f},{y:.2f},{w:.2f},{h:.2f}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_results(path):
    """Parse a results file back into boxes."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"results file not found: {path}")
    boxes = []
    for i, line in enumerate(ln for ln in path.read_text().splitlines() if ln.strip()):
        try:
            x, y, w, h = (float(p) for p in line.strip().split(","))
        except ValueError as exc:
            raise DataError(f"results line {i + 1}: unparsable: {line.strip()!r}") from exc
        boxes.append(BoundingBox.from_topleft(x, y, w, h))
    return boxes


def load_groundtruth_file(path):
    """Parse a standalone groundtruth.txt into boxes (None for special frames)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"groundtruth file not found: {path}")
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    return [_parse_gt_line(ln, i + 1) for i, ln in enumerate(lines)]


def write_report(report, path):
    Path(path).write_text(json.dumps(dataclasses.asdict(report), indent=2) + "\n")


def _draw_rect(img, box, color, thickness=2):
    h, w = img.shape[:2]
    x0, y0, bw, bh = box.to_topleft()
    r0, r1 = int(round(y0)), int(round(y0 + bh))
    c0, c1 = int(round(x0)), int(round(x0 + bw))
    for band in (
        (r0, r0 + thickness, c0, c1),          # top
        (r1 - thickness, r1, c0, c1),          # bottom
        (r0, r1, c0, c0 + thickness),          # left
        (r0, r1, c1 - thickness, c1),          # right
    ):
        rr0 = max(0, min(band[0], h))
        rr1 = max(0, min(band[1], h))
        cc0 = max(0, min(band[2], w))
        cc1 = max(0, min(band[3], w))
        if rr1 > rr0 and cc1 > cc0:
            img[rr0:rr1, cc0:cc1] = color


def render_overlay(seq, result, out_dir):
    """Re-encode each frame with the predicted box (red) and the ground-truth
    box (green) drawn as 2-px rectangles."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(len(seq)):
        img = np.ascontiguousarray(seq.frame(i)).copy()
        if seq.groundtruth[i] is not None:
            _draw_rect(img, seq.groundtruth[i], (40, 220, 70))
        _draw_rect(img, result.boxes[i], (230, 50, 40))
        save_image(img, out / f"{i + 1:08d}.png")
    return out


def config_from_dict(data):
    """Build a TrackerConfig from flat key/value pairs, rejecting unknown keys."""
    valid = {f.name for f in dataclasses.fields(TrackerConfig)}
    unknown = set(data) - valid
    if unknown:
        raise DataError(f"unknown config keys: {sorted(unknown)}")
    coerced = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    cfg = TrackerConfig(**coerced)
    cfg.validate()
    return cfg


def load_config_file(path):
    """Read a tracker config from a flat JSON or TOML file."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"config file not found: {path}")
    if path.suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise DataError(f"invalid JSON config: {exc}") from exc
    elif path.suffix == ".toml":
        try:
            import tomllib
        except ImportError:
            import tomli as tomllib
        try:
            data = tomllib.loads(path.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise DataError(f"invalid TOML config: {exc}") from exc
    else:
        raise DataError(f"config must be a .json or .toml file, got {path.suffix!r}")
    if not isinstance(data, dict):
        raise DataError("config file must hold a flat key/value table")
    return config_from_dict(data)
