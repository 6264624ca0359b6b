"""Bounding-box adaptation by online dictionary learning over target patches.

A fixed-length grayscale view of the target (with some surrounding context,
so the target boundary is visible inside the patch) is sparse-coded against a
dictionary learned online from previously tracked patches.  Candidate boxes
at nearby positions and scales compete by reconstruction error; the box whose
view looks most like what the dictionary has learned wins, which lets the box
follow the target's true extent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DataError
from .imaging import BoundingBox, extract_patch, grayscale, hann_window, resize_bilinear

CODE_MAX_SWEEPS = 1000
CODE_TOL = 1e-6
COLUMN_TOL = 1e-7
# candidate boxes are expanded by this factor before cropping, so that a
# scale change moves the target boundary inside the patch
DEFAULT_CONTEXT = 1.3


@dataclass
class Dictionary:
    """Unit-norm atom matrix with the running statistics of the online learner."""

    atoms: np.ndarray      # (m, K), unit-norm columns
    acc_codes: np.ndarray  # (K, K) accumulated code outer products
    acc_data: np.ndarray   # (m, K) accumulated patch-code outer products
    seen: int = 0
    sparsity: float = 0.05
    max_iters: int = 200
    forgetting: float = 1.0  # per-update accumulator discount; 1 = plain sums
    acc_sqnorm: float = 0.0  # accumulated 0.5*|x|^2, for the surrogate objective
    acc_l1: float = 0.0      # accumulated sparsity*|code|_1
    weight: float = 0.0      # discounted sample mass matching the accumulators
    _gram: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_atoms(self):
        return self.atoms.shape[1]

    def gram(self):
        if self._gram is None:
            self._gram = self.atoms.T @ self.atoms
        return self._gram


def init_dictionary(seed_patches, num_atoms, rng_seed, sparsity=0.05, max_iters=200,
                    forgetting=1.0):
    """Dictionary whose first columns are the (normalized) seed patches,
    filled up to ``num_atoms`` with seeded random unit vectors."""
    seeds = [np.asarray(p, dtype=np.float64) for p in seed_patches]
    seeds = [p for p in seeds if np.linalg.norm(p) > 0]
    if not seeds:
        raise DataError("need at least one nonzero seed patch")
    m = seeds[0].shape[0]
    rng = np.random.default_rng(rng_seed)
    cols = [p / np.linalg.norm(p) for p in seeds[:num_atoms]]
    while len(cols) < num_atoms:
        v = rng.standard_normal(m)
        cols.append(v / np.linalg.norm(v))
    return Dictionary(
        atoms=np.stack(cols, axis=1),
        acc_codes=np.zeros((num_atoms, num_atoms)),
        acc_data=np.zeros((m, num_atoms)),
        sparsity=sparsity,
        max_iters=max_iters,
        forgetting=forgetting,
    )


def patch_vector(frame, box, side=16, context=DEFAULT_CONTEXT):
    """Fixed-length grayscale view of a box: the box grown by ``context`` is
    cropped, resized to side x side, mean-subtracted, Hann-tapered, flattened
    row-major and scaled to unit norm.  The taper keeps the target and its
    boundary dominant over uncorrelated outer-ring background.  An
    all-constant patch maps to the zero vector."""
    patch = resize_bilinear(extract_patch(frame, box.scaled(context)), side, side)
    v = grayscale(patch)
    v -= v.mean()
    v = (v * hann_window(side, side)).ravel()
    norm = np.linalg.norm(v)
    if norm < 1e-12:
        return np.zeros(side * side)
    return v / norm


def sparse_code(x, dictionary):
    """L1-regularized least-squares code of x over the dictionary atoms."""
    x = np.asarray(x, dtype=np.float64)
    if np.linalg.norm(x) > 1.0 + 1e-9:
        raise DataError("patch vector must have norm <= 1")
    codes = np.zeros(dictionary.num_atoms)
    kernels.lasso_cd(
        np.ascontiguousarray(dictionary.gram()),
        np.ascontiguousarray(dictionary.atoms.T @ x),
        dictionary.sparsity,
        CODE_MAX_SWEEPS,
        CODE_TOL,
        codes,
    )
    return codes


def reconstruction_error(x, dictionary):
    """Squared residual of the sparse reconstruction of x."""
    resid = np.asarray(x, dtype=np.float64) - dictionary.atoms @ sparse_code(x, dictionary)
    return float(resid @ resid)


def _surrogate(atoms_t, acc_codes, acc_data_t, acc_sqnorm, acc_l1, seen):
    fit = -float((atoms_t * acc_data_t).sum())
    fit += 0.5 * float(((atoms_t @ atoms_t.T) * acc_codes).sum())
    return (acc_sqnorm + acc_l1 + fit) / seen


def surrogate_objective(dictionary):
    """(Discount-weighted) average lasso objective of the seen samples at the
    current atoms."""
    if dictionary.weight == 0.0:
        return 0.0
    return _surrogate(
        dictionary.atoms.T,
        dictionary.acc_codes,
        dictionary.acc_data.T,
        dictionary.acc_sqnorm,
        dictionary.acc_l1,
        dictionary.weight,
    )


def dict_update(dictionary, x, objective_trace=None):
    """One online learning step: code x, fold it into the accumulators, then
    refit the dictionary columns by block coordinate descent.

    When ``objective_trace`` is a list, the surrogate objective is appended
    after every column sweep (slower; used for verification).  Returns the
    mutated dictionary.
    """
    x = np.asarray(x, dtype=np.float64)
    codes = sparse_code(x, dictionary)
    g = dictionary.forgetting
    if g != 1.0:
        dictionary.acc_codes *= g
        dictionary.acc_data *= g
        dictionary.acc_sqnorm *= g
        dictionary.acc_l1 *= g
        dictionary.weight *= g
    dictionary.acc_codes += np.outer(codes, codes)
    dictionary.acc_data += np.outer(x, codes)
    dictionary.seen += 1
    dictionary.weight += 1.0
    dictionary.acc_sqnorm += 0.5 * float(x @ x)
    dictionary.acc_l1 += dictionary.sparsity * float(np.abs(codes).sum())

    atoms_t = np.ascontiguousarray(dictionary.atoms.T)
    acc_codes = np.ascontiguousarray(dictionary.acc_codes)
    acc_data_t = np.ascontiguousarray(dictionary.acc_data.T)
    if objective_trace is None:
        kernels.column_sweep(atoms_t, acc_codes, acc_data_t, dictionary.max_iters, COLUMN_TOL)
    else:
        for _ in range(dictionary.max_iters):
            before = atoms_t.copy()
            kernels.column_sweep(atoms_t, acc_codes, acc_data_t, 1, 0.0)
            objective_trace.append(
                _surrogate(
                    atoms_t,
                    acc_codes,
                    acc_data_t,
                    dictionary.acc_sqnorm,
                    dictionary.acc_l1,
                    dictionary.weight,
                )
            )
            if np.max(np.abs(atoms_t - before)) < COLUMN_TOL:
                break
    dictionary.atoms = np.ascontiguousarray(atoms_t.T)
    dictionary._gram = None
    return dictionary


@dataclass
class CandidateSet:
    boxes: list    # candidate boxes
    scales: list   # scale factor used for each box
    shifts: list   # (dx, dy) offset used for each box


def generate_candidates(box, scales=(0.95, 1.0, 1.05), shifts=(-2.0, 0.0, 2.0)):
    """Cartesian product of scale factors and x/y shifts around a box; scaled
    boxes keep the center, then get shifted."""
    scales = [float(s) for s in scales]
    shifts = [float(s) for s in shifts]
    if 1.0 not in scales:
        raise DataError("scale factors must contain 1.0")
    if 0.0 not in shifts:
        raise DataError("shift offsets must contain 0")
    boxes, used_scales, used_shifts = [], [], []
    for s in scales:
        for dx in shifts:
            for dy in shifts:
                boxes.append(box.scaled(s).shifted(dx, dy))
                used_scales.append(s)
                used_shifts.append((dx, dy))
    return CandidateSet(boxes, used_scales, used_shifts)


def select_box(frame, candidates, dictionary, side=16, context=DEFAULT_CONTEXT):
    """Candidate with the lowest sparse-reconstruction error.

    Errors within 1e-9 of the minimum tie; ties prefer the scale closest to
    1.0, then the shift closest to 0.
    """
    if not candidates.boxes:
        raise DataError("empty candidate set")
    errors = np.array(
        [
            reconstruction_error(patch_vector(frame, b, side, context), dictionary)
            for b in candidates.boxes
        ]
    )
    best = float(errors.min())
    keys = [
        (abs(s - 1.0), dx * dx + dy * dy, i)
        for i, (s, (dx, dy)) in enumerate(zip(candidates.scales, candidates.shifts))
        if errors[i] <= best + 1e-9
    ]
    return candidates.boxes[min(keys)[2]]
