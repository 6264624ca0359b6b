"""Kernelized correlation-filter tracking with per-frame feature selection.

Each step localizes the target with the previous frame's model, optionally
refines the box through the dictionary-based scale module, then re-ranks the
feature channels on the new frame, refreshes the adaptive projection, and
blends a freshly trained filter into the running model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import featselect, scale
from .errors import DataError, NumericError
from .imaging import (
    CN_CHANNELS,
    BoundingBox,
    CNTable,
    build_feature_map,
    extract_patch,
    resize_bilinear,
)


@dataclass
class TrackerConfig:
    """Pipeline parameters.

    The defaults favor slow model drift (small ``lr_appearance``), a small
    projected feature space, and a tiny candidate grid for box adaptation.
    """

    lr_appearance: float = 0.005   # blend weight of the new appearance/filter
    lr_dim: float = 0.1            # projection history update rate
    num_selected: int = 8          # color channels kept by the per-frame ranking
    compressed_dim: int = 4        # projected color dimensions
    kernel_sigma: float = 0.2
    label_sigma_factor: float = 0.1
    lambda_reg: float = 1e-2
    padding: float | str = "auto"  # search-window margin factor
    microshift: bool = True
    scale_adapt: bool = True
    path_decay: float | str = "auto"
    template_max_side: int = 96
    dict_size: int = 250
    dict_max_iters: int = 200
    dict_sparsity: float = 0.05
    dict_forgetting: float = 0.9   # recency weight of the learned appearance
    dict_update_every: int = 3     # frames between dictionary updates
    patch_side: int = 16
    patch_context: float = 1.3
    scale_factors: tuple = (0.95, 1.0, 1.05)
    shift_offsets: tuple = (-2.0, 0.0, 2.0)
    scale_damping: float = 0.4     # weight of the selected box in the extent blend
    scale_passes: int = 2          # candidate-grid refinements per frame
    rng_seed: int = 0

    def validate(self):
        if not 0.0 < self.lr_appearance <= 1.0:
            raise DataError(f"lr_appearance must be in (0, 1], got {self.lr_appearance}")
        if not 0.0 < self.lr_dim <= 1.0:
            raise DataError(f"lr_dim must be in (0, 1], got {self.lr_dim}")
        if not 1 <= self.compressed_dim <= self.num_selected <= CN_CHANNELS:
            raise DataError(
                "need 1 <= compressed_dim <= num_selected <= "
                f"{CN_CHANNELS}, got {self.compressed_dim} and {self.num_selected}"
            )
        if self.lambda_reg < 1e-4:
            raise DataError("lambda_reg below 1e-4 leaves the filter ill-conditioned")
        if self.kernel_sigma <= 0 or self.label_sigma_factor <= 0:
            raise DataError("kernel_sigma and label_sigma_factor must be positive")
        if self.padding != "auto" and not float(self.padding) > 0:
            raise DataError(f"padding must be 'auto' or positive, got {self.padding}")
        if self.path_decay != "auto" and not float(self.path_decay) > 0:
            raise DataError("path_decay must be 'auto' or positive")
        if self.template_max_side < 8:
            raise DataError("template_max_side must be at least 8")
        if not 0.0 <= self.scale_damping <= 1.0:
            raise DataError("scale_damping must be in [0, 1]")
        if self.dict_size < 1 or self.dict_max_iters < 1 or self.patch_side < 2:
            raise DataError("dictionary parameters out of range")
        if not 0.0 < self.dict_forgetting <= 1.0:
            raise DataError("dict_forgetting must be in (0, 1]")
        if self.dict_update_every < 1 or self.scale_passes < 1:
            raise DataError("dict_update_every and scale_passes must be at least 1")
        if 1.0 not in [float(s) for s in self.scale_factors]:
            raise DataError("scale_factors must contain 1.0")
        if 0.0 not in [float(s) for s in self.shift_offsets]:
            raise DataError("shift_offsets must contain 0")


@dataclass
class ProjectionState:
    """Adaptive projection basis plus its exponentially averaged history.

    The history lives in the full channel space so channel identities stay
    consistent when the selected subset changes between frames; the basis
    maps the currently selected channels (rows) to the compressed dimensions
    (columns).
    """

    full_dim: int
    d2: int
    basis: np.ndarray | None = None     # (D1, D2), orthonormal columns
    weights: np.ndarray | None = None   # (D2,) eigenvalues of the kept directions
    history: np.ndarray | None = None   # (full_dim, full_dim), PSD
    selected: np.ndarray | None = None  # channel indices the basis refers to

    def __post_init__(self):
        if self.history is None:
            self.history = np.zeros((self.full_dim, self.full_dim))


@dataclass
class ResponseMap:
    """Correlation scores over all cyclic displacements of the search window."""

    values: np.ndarray
    peak: tuple                       # (row, col) argmax; ties to smallest row, then col
    subcell_offset: tuple = (0.0, 0.0)

    def displacement(self):
        """Signed (dy, dx) cell displacement of the peak from the map center."""
        h, w = self.values.shape
        return (self.peak[0] - h // 2, self.peak[1] - w // 2)


@dataclass
class TrackerState:
    position: BoundingBox
    model_alpha_hat: np.ndarray      # frequency-domain filter coefficients
    model_appearance: np.ndarray     # learned compressed appearance (H, W, 1+D2)
    projection: ProjectionState
    selected: np.ndarray             # color channels feeding the projection
    template_size: tuple             # (cells_h, cells_w), fixed after init
    target_cells: tuple              # (h, w) target extent on the template grid
    padding: float
    label: np.ndarray                # regression target, fixed per template
    config: TrackerConfig
    cn: CNTable
    dictionary: scale.Dictionary | None = None
    last_ranking: featselect.Ranking | None = None
    frames_tracked: int = 0


def dft2(x):
    """2-D DFT over the first two axes."""
    return np.fft.fft2(x, axes=(0, 1))


def idft2(x):
    return np.fft.ifft2(x, axes=(0, 1))


def gaussian_label(h, w, target_h, target_w, factor):
    """Gaussian regression target peaking at cell (h//2, w//2) with value 1;
    distances are circular and the width scales with the target extent."""
    sigma = factor * np.sqrt(target_h * target_w)
    dy = np.arange(h) - h // 2
    dx = np.arange(w) - w // 2
    dy = np.minimum(np.abs(dy), h - np.abs(dy))
    dx = np.minimum(np.abs(dx), w - np.abs(dx))
    return np.exp(-(dy[:, None] ** 2 + dx[None, :] ** 2) / (2.0 * sigma**2))


def gaussian_kernel_correlation(x, z, sigma):
    """Gaussian kernel between z and every cyclic shift of x, via the FFT.

    The clamp removes the small negative residue the FFT round trip can leave
    in the squared distance, so values stay in (0, 1].
    """
    x = np.asarray(x)
    z = np.asarray(z)
    if x.shape != z.shape:
        raise DataError(f"shape mismatch: {x.shape} vs {z.shape}")
    if x.ndim == 2:
        x = x[:, :, None]
        z = z[:, :, None]
    h, w, c = x.shape
    cross = idft2(np.conj(dft2(x)) * dft2(z)).real.sum(axis=2)
    d2 = (x * x).sum() + (z * z).sum() - 2.0 * cross
    return np.exp(-np.maximum(d2, 0.0) / (sigma * sigma * h * w * c))


def train(features, label, sigma, lambda_reg):
    """Frequency-domain ridge fit of the kernel autocorrelation to the label."""
    kxx = gaussian_kernel_correlation(features, features, sigma)
    return np.fft.fft2(label) / (np.fft.fft2(kxx) + lambda_reg)


def detect(state, features):
    """Correlation response of the learned filter on new features."""
    if features.shape != state.model_appearance.shape:
        raise DataError(
            f"feature shape {features.shape} does not match the model "
            f"{state.model_appearance.shape}"
        )
    kxz = gaussian_kernel_correlation(
        state.model_appearance, features, state.config.kernel_sigma
    )
    values = np.fft.ifft2(np.fft.fft2(kxz) * state.model_alpha_hat).real
    peak = np.unravel_index(int(np.argmax(values)), values.shape)
    return ResponseMap(values, (int(peak[0]), int(peak[1])))


def _quadratic_vertex(lo, mid, hi):
    den = 2.0 * (lo - 2.0 * mid + hi)
    if den == 0.0:
        return 0.0
    return float(np.clip((lo - hi) / den, -0.5, 0.5))


def micro_shift(resp):
    """Sub-cell peak refinement by separable quadratic interpolation through
    the peak and its two axis neighbors; a border peak refines to 0."""
    v = resp.values
    h, w = v.shape
    r, c = resp.peak
    dy = _quadratic_vertex(v[r - 1, c], v[r, c], v[r + 1, c]) if 0 < r < h - 1 else 0.0
    dx = _quadratic_vertex(v[r, c - 1], v[r, c], v[r, c + 1]) if 0 < c < w - 1 else 0.0
    return dy, dx


def compute_covariance(features):
    """Covariance of the per-cell feature vectors, normalized by cell count."""
    h, w, c = features.shape
    if h * w < 2:
        raise DataError("need at least 2 cells for a covariance estimate")
    flat = features.reshape(h * w, c)
    centered = flat - flat.mean(axis=0)
    return (centered.T @ centered) / (h * w)


def update_projection(proj, cov, lr_dim, selected=None):
    """Refresh the projection basis from the covariance blended with history.

    The basis spans the leading eigenvectors of cov + history restricted to
    the selected channels.  The weighted basis outer product is folded back
    into the history block at rate ``lr_dim`` while the rest of the history
    decays by (1 - lr_dim).  New basis columns are sign-aligned with the
    previous ones when the selection is unchanged, keeping the projected
    appearance temporally consistent.
    """
    cov = np.asarray(cov, dtype=np.float64)
    sel = np.arange(proj.full_dim) if selected is None else np.asarray(selected, dtype=np.intp)
    if cov.shape != (sel.size, sel.size):
        raise DataError(
            f"covariance shape {cov.shape} does not match {sel.size} selected channels"
        )
    if not np.all(np.isfinite(cov)):
        raise NumericError("non-finite covariance input")
    blended = cov + proj.history[np.ix_(sel, sel)]
    blended = 0.5 * (blended + blended.T)
    try:
        eigvals, eigvecs = np.linalg.eigh(blended)
    except np.linalg.LinAlgError as exc:
        raise NumericError("eigendecomposition failed") from exc
    basis = eigvecs[:, ::-1][:, : proj.d2]
    weights = np.maximum(eigvals[::-1][: proj.d2], 0.0)
    if (
        proj.basis is not None
        and proj.selected is not None
        and proj.basis.shape == basis.shape
        and np.array_equal(sel, proj.selected)
    ):
        flips = np.sign((basis * proj.basis).sum(axis=0))
        flips[flips == 0] = 1.0
        basis = basis * flips
    proj.history *= 1.0 - lr_dim
    proj.history[np.ix_(sel, sel)] += lr_dim * ((basis * weights) @ basis.T)
    proj.basis = basis
    proj.weights = weights
    proj.selected = sel.copy()
    return proj


def _embed_basis(basis, selected, full_dim):
    """Scatter the basis rows into the full channel space: column j becomes
    the full-space direction of compressed channel j."""
    r = np.zeros((full_dim, basis.shape[1]))
    r[np.asarray(selected, dtype=np.intp)] = basis
    return r


def project_features(features, selected, basis):
    """Carry luminance through unchanged; project the selected color channels
    onto the basis to produce channels 1..D2."""
    sel = np.asarray(selected, dtype=np.intp)
    if np.any(sel == 0):
        raise DataError("channel 0 is carried through; it cannot be projected")
    if np.any(sel < 1) or np.any(sel >= features.shape[2]):
        raise DataError("selected channel index out of range")
    out = np.empty(features.shape[:2] + (1 + basis.shape[1],))
    out[:, :, 0] = features[:, :, 0]
    out[:, :, 1:] = features[:, :, sel] @ basis
    return out


def update_model(state, new_appearance, new_alpha_hat, lr):
    """Blend the new appearance and filter into the model at rate ``lr``."""
    if (
        new_appearance.shape != state.model_appearance.shape
        or new_alpha_hat.shape != state.model_alpha_hat.shape
    ):
        raise DataError("update shapes do not match the stored model")
    state.model_appearance = (1.0 - lr) * state.model_appearance + lr * new_appearance
    state.model_alpha_hat = (1.0 - lr) * state.model_alpha_hat + lr * new_alpha_hat
    return state


def estimate_padding(frame_w, frame_h, box):
    """Search-window margin from the frame-to-target area ratio, clamped to
    [1.5, 3.0]; the window extent is box extent times (1 + factor)."""
    if box.area <= 0:
        raise DataError("box area must be positive")
    factor = 0.5 * np.sqrt((frame_w * frame_h) / box.area)
    return float(np.clip(factor, 1.5, 3.0))


def _clip_box_to_frame(box, frame_w, frame_h):
    x0, y0, w, h = box.to_topleft()
    x0c, x1c = max(x0, 0.0), min(x0 + w, float(frame_w))
    y0c, y1c = max(y0, 0.0), min(y0 + h, float(frame_h))
    if x1c - x0c < 1.0 or y1c - y0c < 1.0:
        raise DataError("box lies outside the frame")
    return BoundingBox.from_topleft(x0c, y0c, x1c - x0c, y1c - y0c)


def _window_features(frame, box, padding, template_size, cn):
    """Padded search window around the box, resampled to the template grid."""
    th, tw = template_size
    window = BoundingBox(box.cx, box.cy, box.w * (1.0 + padding), box.h * (1.0 + padding))
    patch = resize_bilinear(extract_patch(frame, window), tw, th)
    return build_feature_map(patch, cn), window


def _target_cell_box(template_size, padding):
    th, tw = template_size
    return BoundingBox(tw // 2, th // 2, tw / (1.0 + padding), th / (1.0 + padding))


def _rank_and_select(fmap, template_size, padding, cfg):
    """Rank all channels on the current frame; select the top color channels.

    Luminance (channel 0) takes part in the ranking but is always carried
    through the final representation, so the selection pool is channels 1..C.
    """
    samples = featselect.label_samples(fmap, _target_cell_box(template_size, padding))
    ranking = featselect.rank_features(samples, k=cfg.num_selected, decay=cfg.path_decay)
    selected = featselect.select_top_k(ranking.energies[1:], cfg.num_selected) + 1
    return ranking, np.sort(selected)


def init(frame, box, cfg, cn):
    """Build a tracker state from the first frame and its target box."""
    cfg.validate()
    if cn is None:
        raise DataError("a color-name table is required")
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    box = _clip_box_to_frame(box, fw, fh)
    padding = estimate_padding(fw, fh, box) if cfg.padding == "auto" else float(cfg.padding)
    win_w = box.w * (1.0 + padding)
    win_h = box.h * (1.0 + padding)
    shrink = min(1.0, cfg.template_max_side / max(win_w, win_h))
    template_size = (max(1, round(win_h * shrink)), max(1, round(win_w * shrink)))
    target = _target_cell_box(template_size, padding)
    if target.w < 2.0 or target.h < 2.0:
        raise DataError("target too small on the template grid")

    fmap, _ = _window_features(frame, box, padding, template_size, cn)
    ranking, selected = _rank_and_select(fmap, template_size, padding, cfg)
    projection = ProjectionState(full_dim=fmap.shape[2], d2=cfg.compressed_dim)
    update_projection(
        projection, compute_covariance(fmap[:, :, selected]), cfg.lr_dim, selected
    )
    appearance = project_features(fmap, selected, projection.basis)
    label = gaussian_label(*template_size, target.h, target.w, cfg.label_sigma_factor)
    alpha_hat = train(appearance, label, cfg.kernel_sigma, cfg.lambda_reg)

    dictionary = None
    if cfg.scale_adapt:
        # seed with one-pixel jitters of the initial crop so early candidate
        # errors are measured against real appearance, not random atoms
        seeds = [
            scale.patch_vector(frame, box.shifted(dx, dy), cfg.patch_side, cfg.patch_context)
            for dx, dy in ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1), (-1, -1), (1, 1), (-1, 1), (1, -1))
        ]
        dictionary = scale.init_dictionary(
            seeds,
            cfg.dict_size,
            cfg.rng_seed,
            cfg.dict_sparsity,
            cfg.dict_max_iters,
            cfg.dict_forgetting,
        )
        scale.dict_update(dictionary, seeds[0])

    return TrackerState(
        position=box,
        model_alpha_hat=alpha_hat,
        model_appearance=appearance,
        projection=projection,
        selected=selected,
        template_size=template_size,
        target_cells=(target.h, target.w),
        padding=padding,
        label=label,
        config=cfg,
        cn=cn,
        dictionary=dictionary,
        last_ranking=ranking,
    )


def track_step(state, frame):
    """Advance one frame: localize, adapt the box, re-rank, refresh the model.

    Returns the updated state and the final box for this frame.
    """
    cfg = state.config
    frame = np.asarray(frame)
    fh, fw = frame.shape[:2]
    th, tw = state.template_size

    # localize with the previous frame's selection and basis
    fmap, window = _window_features(
        frame, state.position, state.padding, state.template_size, state.cn
    )
    resp = detect(state, project_features(fmap, state.selected, state.projection.basis))
    dy, dx = resp.displacement()
    ody = odx = 0.0
    if cfg.microshift:
        ody, odx = micro_shift(resp)
        resp.subcell_offset = (ody, odx)
    box = BoundingBox(
        state.position.cx + (dx + odx) * (window.w / tw),
        state.position.cy + (dy + ody) * (window.h / th),
        state.position.w,
        state.position.h,
    )

    if cfg.scale_adapt and state.dictionary is not None:
        # refine the proposal through the candidate grid; stop as soon as the
        # unmodified box wins its own grid
        proposal = box
        for _ in range(cfg.scale_passes):
            candidates = scale.generate_candidates(
                proposal, cfg.scale_factors, cfg.shift_offsets
            )
            best = scale.select_box(
                frame, candidates, state.dictionary, cfg.patch_side, cfg.patch_context
            )
            if best == proposal:
                break
            proposal = best
        damp = cfg.scale_damping
        box = BoundingBox(
            proposal.cx,
            proposal.cy,
            (1.0 - damp) * box.w + damp * proposal.w,
            (1.0 - damp) * box.h + damp * proposal.h,
        )

    # keep the window anchored to the frame even when the target drifts out
    box = BoundingBox(
        min(max(box.cx, 0.0), fw - 1.0), min(max(box.cy, 0.0), fh - 1.0), box.w, box.h
    )

    # re-rank on the new frame and refresh projection, filter, and model
    fmap, _ = _window_features(frame, box, state.padding, state.template_size, state.cn)
    ranking, selected = _rank_and_select(fmap, state.template_size, state.padding, cfg)
    r_old = _embed_basis(
        state.projection.basis, state.projection.selected, state.projection.full_dim
    )
    update_projection(
        state.projection, compute_covariance(fmap[:, :, selected]), cfg.lr_dim, selected
    )
    # re-express the stored model in the refreshed basis so old and new
    # compressed channels stay comparable when the selection or basis moves
    r_new = _embed_basis(
        state.projection.basis, state.projection.selected, state.projection.full_dim
    )
    state.model_appearance[:, :, 1:] = state.model_appearance[:, :, 1:] @ (r_old.T @ r_new)
    appearance = project_features(fmap, selected, state.projection.basis)
    alpha_hat = train(appearance, state.label, cfg.kernel_sigma, cfg.lambda_reg)
    update_model(state, appearance, alpha_hat, cfg.lr_appearance)
    state.selected = selected
    state.position = box
    state.last_ranking = ranking
    state.frames_tracked += 1

    if (
        cfg.scale_adapt
        and state.dictionary is not None
        and state.frames_tracked % cfg.dict_update_every == 0
    ):
        scale.dict_update(
            state.dictionary, scale.patch_vector(frame, box, cfg.patch_side, cfg.patch_context)
        )
    return state, box
