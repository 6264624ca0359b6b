"""Pure-NumPy fallbacks for the sparse-coding hot loops.

Same contracts as the compiled ``dfst._kernels`` extension; ``dfst.kernels``
selects between the two at import time.  These versions are the readable
reference; the compiled ones exist because a tracking run solves hundreds of
small lasso problems per second.
"""

import numpy as np


def _cd_pass(gram, sparsity, codes, grad, index):
    """One coordinate-descent pass over ``index``; returns the largest change."""
    max_delta = 0.0
    for j in index:
        gjj = gram[j, j]
        if gjj <= 1e-12:
            continue
        rho = grad[j] + gjj * codes[j]
        if rho > sparsity:
            new = (rho - sparsity) / gjj
        elif rho < -sparsity:
            new = (rho + sparsity) / gjj
        else:
            new = 0.0
        delta = new - codes[j]
        if delta != 0.0:
            codes[j] = new
            grad -= delta * gram[j]
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


def lasso_cd(gram, corr, sparsity, max_sweeps, tol, codes):
    """Cyclic coordinate descent for 0.5*a'Ga - c'a + sparsity*|a|_1.

    ``gram`` must be symmetric.  ``codes`` is updated in place; returns the
    number of full sweeps run.  Between full sweeps the descent iterates over
    the active (nonzero) coordinates only; convergence is certified by a full
    sweep whose largest coordinate change stays below ``tol``.
    """
    k = corr.shape[0]
    grad = corr - gram @ codes
    everything = range(k)
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        if _cd_pass(gram, sparsity, codes, grad, everything) < tol:
            break
        active = np.flatnonzero(codes)
        while sweeps < max_sweeps:
            sweeps += 1
            if _cd_pass(gram, sparsity, codes, grad, active) < tol:
                break
    return sweeps


def column_sweep(atoms_t, acc_codes, acc_data_t, max_sweeps, tol):
    """Block coordinate descent over dictionary columns (rows of ``atoms_t``).

    Each visited column is replaced by the exact minimizer of the accumulated
    quadratic surrogate restricted to the unit sphere; columns with no
    accumulated code mass are left untouched.  ``atoms_t`` is updated in
    place; returns the number of sweeps run.
    """
    k = atoms_t.shape[0]
    active = [j for j in range(k) if acc_codes[j, j] > 1e-10]
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for j in active:
            # acc_codes is symmetric, so its j-th column equals its j-th row
            u = (acc_data_t[j] - acc_codes[j] @ atoms_t) / acc_codes[j, j] + atoms_t[j]
            norm = np.sqrt(u @ u)
            if norm <= 1e-12:
                continue
            u /= norm
            change = np.max(np.abs(u - atoms_t[j]))
            atoms_t[j] = u
            if change > max_change:
                max_change = change
        if max_change < tol:
            break
    return sweeps
