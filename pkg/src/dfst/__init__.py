"""Correlation-filter visual tracking with per-frame supervised feature
ranking and dictionary-based bounding-box adaptation."""

from .errors import DataError, NumericError
from .imaging import BoundingBox, CNTable, default_cn_table, load_cn_table, load_image
from .harness import (
    MetricsReport,
    RunResult,
    Sequence,
    compute_metrics,
    load_sequence,
    run_tracker,
)
from .synth import SynthSpec, synth_sequence
from .tracker import TrackerConfig, TrackerState, init, track_step

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "CNTable",
    "DataError",
    "MetricsReport",
    "NumericError",
    "RunResult",
    "Sequence",
    "SynthSpec",
    "TrackerConfig",
    "TrackerState",
    "compute_metrics",
    "default_cn_table",
    "init",
    "load_cn_table",
    "load_image",
    "load_sequence",
    "run_tracker",
    "synth_sequence",
    "track_step",
    "__version__",
]
