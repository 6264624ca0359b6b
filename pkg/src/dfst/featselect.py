"""Per-frame supervised feature ranking.

Three class-separation metrics (Fisher ratio, two-sided t-test p-value,
Pearson correlation with the class label) are fused into one score vector,
expanded into a rank-1 affinity graph, and each feature is scored by the
total weight of graph paths of every length passing through it.  High-energy
features are the ones that separate target from background best in the
current frame.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import stdtr

from .errors import DataError, NumericError
from .imaging import BoundingBox

# zero variance but distinct means: a perfectly separable feature ranks first
FISHER_SENTINEL = 1e12


@dataclass
class ClassSamples:
    """Per-cell feature vectors for target (positive) and background rows."""

    positives: np.ndarray  # (N1, F)
    negatives: np.ndarray  # (N2, F)


@dataclass
class MetricScores:
    fisher: np.ndarray
    ttest_p: np.ndarray
    pearson: np.ndarray
    fused: np.ndarray | None = None


@dataclass
class Ranking:
    adjacency: np.ndarray  # (F, F) rank-1 affinity graph
    energies: np.ndarray   # (F,) path energies
    order: np.ndarray      # permutation of 0..F-1, descending energy
    selected: np.ndarray   # first k entries of order
    metrics: MetricScores


def label_samples(fmap, target):
    """Split feature-map cells into target (inside the box) and the
    surrounding ring; the box is given in feature-cell coordinates."""
    h, w = fmap.shape[:2]
    rows = np.arange(h)
    cols = np.arange(w)
    in_rows = (rows >= target.cy - target.h / 2.0) & (rows <= target.cy + target.h / 2.0)
    in_cols = (cols >= target.cx - target.w / 2.0) & (cols <= target.cx + target.w / 2.0)
    mask = (in_rows[:, None] & in_cols[None, :]).ravel()
    flat = fmap.reshape(h * w, -1)
    if not mask.any():
        raise DataError("empty positive set: target does not cover any cell")
    if mask.all():
        raise DataError("empty negative set: target covers the whole map")
    return ClassSamples(flat[mask], flat[~mask])


def _class_stats(samples):
    pos, neg = samples.positives, samples.negatives
    if pos.shape[0] < 2 or neg.shape[0] < 2:
        raise DataError(
            f"need at least 2 samples per class, got {pos.shape[0]} and {neg.shape[0]}"
        )
    return (
        pos.mean(axis=0),
        neg.mean(axis=0),
        pos.var(axis=0, ddof=1),
        neg.var(axis=0, ddof=1),
    )


def fisher_scores(samples):
    """Squared mean gap over summed class variances, per feature."""
    m1, m2, v1, v2 = _class_stats(samples)
    num = np.abs(m1 - m2) ** 2
    den = v1 + v2
    out = np.zeros_like(num)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    out[~ok & (num > 0)] = FISHER_SENTINEL
    return out


def ttest_scores(samples):
    """Two-sided p-values for the per-feature mean-difference t statistic.

    The statistic uses per-class variance terms while the p-value uses the
    pooled n1 + n2 - 2 degrees of freedom.  Zero variance with equal means
    gives p = 1; zero variance with distinct means gives p = 0.
    """
    m1, m2, v1, v2 = _class_stats(samples)
    n1 = samples.positives.shape[0]
    n2 = samples.negatives.shape[0]
    df = n1 + n2 - 2
    se = np.sqrt(v1 / n1 + v2 / n2)
    diff = m1 - m2
    p = np.empty_like(diff)
    degen = se == 0
    p[degen] = np.where(diff[degen] == 0.0, 1.0, 0.0)
    p[~degen] = 2.0 * stdtr(df, -np.abs(diff[~degen] / se[~degen]))
    return p


def pearson_scores(samples):
    """Correlation of each feature with the +1/-1 class label over the pooled
    sample; features with zero pooled variance score 0."""
    x = np.concatenate([samples.positives, samples.negatives], axis=0)
    y = np.concatenate(
        [np.ones(samples.positives.shape[0]), -np.ones(samples.negatives.shape[0])]
    )
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = np.sqrt((xc**2).sum(axis=0))
    sy = np.sqrt((yc**2).sum())
    out = np.zeros(x.shape[1])
    ok = (sx > 0) & (sy > 0)
    out[ok] = (xc.T @ yc)[ok] / (sx[ok] * sy)
    return np.clip(out, -1.0, 1.0)


def fuse_scores(metrics):
    """Average the three metrics on a common higher-is-better [0, 1] scale:
    max-normalized Fisher, inverted p-value, absolute correlation."""
    fisher = np.asarray(metrics.fisher, dtype=np.float64)
    fmax = fisher.max() if fisher.size else 0.0
    fterm = fisher / fmax if fmax > 0 else np.zeros_like(fisher)
    fused = (fterm + (1.0 - np.asarray(metrics.ttest_p)) + np.abs(metrics.pearson)) / 3.0
    metrics.fused = fused
    return fused


def build_adjacency(s):
    """Rank-1 pairwise affinity: entry (i, j) is the joint score s_i * s_j."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise DataError("fused scores must be nonnegative")
    return np.outer(s, s)


def path_energies(adjacency, decay="auto"):
    """Total discounted weight of graph paths of every length through each node.

    With S = (I - r A)^{-1} - I = sum_{l>=1} r^l A^l, the energy of feature i
    is the i-th row sum of S.  ``decay="auto"`` picks r = 0.9 / spectral
    radius, which always keeps the geometric series convergent.
    """
    a = np.asarray(adjacency, dtype=np.float64)
    f = a.shape[0]
    if a.ndim != 2 or a.shape != (f, f) or not np.allclose(a, a.T, atol=1e-10):
        raise DataError("adjacency must be square and symmetric")
    if np.any(a < 0):
        raise DataError("adjacency must be nonnegative")
    rho = float(np.max(np.abs(np.linalg.eigvalsh(a)))) if f else 0.0
    if decay == "auto":
        if rho <= 0.0:
            return np.zeros(f)
        r = 0.9 / rho
    else:
        r = float(decay)
        if r < 0.0 or r * rho >= 1.0:
            raise NumericError(
                f"decay {r} with spectral radius {rho:.6g} makes I - r*A singular "
                "or the path series divergent"
            )
    try:
        s = np.linalg.solve(np.eye(f) - r * a, np.eye(f)) - np.eye(f)
    except np.linalg.LinAlgError as exc:
        raise NumericError("I - r*A is singular") from exc
    return np.maximum(s.sum(axis=1), 0.0)


def select_top_k(energies, k):
    """Indices of the k largest energies, descending; ties go to lower index."""
    energies = np.asarray(energies)
    if not 1 <= k <= energies.size:
        raise DataError(f"k={k} out of range 1..{energies.size}")
    order = np.argsort(-energies, kind="stable")
    return order[:k]


def rank_features(samples, k, decay="auto"):
    """Full ranking pipeline: metrics, fusion, affinity graph, path energies,
    top-k selection."""
    metrics = MetricScores(
        fisher_scores(samples), ttest_scores(samples), pearson_scores(samples)
    )
    fused = fuse_scores(metrics)
    adjacency = build_adjacency(fused)
    energies = path_energies(adjacency, decay)
    order = np.argsort(-energies, kind="stable")
    return Ranking(adjacency, energies, order, order[:k], metrics)
