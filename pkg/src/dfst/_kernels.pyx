# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled sparse-coding hot loops.

Mirrors ``dfst._kernels_py`` exactly (same update order, same guards); see
that module for the readable reference implementations.
"""

from libc.math cimport fabs, sqrt

import numpy as np


cdef double _cd_pass(double[:, ::1] gram, double sparsity, double[::1] codes,
                     double[::1] grad, Py_ssize_t[::1] index, Py_ssize_t n) noexcept:
    cdef Py_ssize_t i, j, t
    cdef double gjj, rho, new, delta, max_delta = 0.0
    for t in range(n):
        j = index[t]
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
            for i in range(gram.shape[0]):
                grad[i] -= delta * gram[j, i]
            if fabs(delta) > max_delta:
                max_delta = fabs(delta)
    return max_delta


def lasso_cd(double[:, ::1] gram, double[::1] corr, double sparsity,
             int max_sweeps, double tol, double[::1] codes):
    cdef Py_ssize_t k = corr.shape[0]
    cdef double[::1] grad = np.empty(k)
    cdef Py_ssize_t[::1] everything = np.arange(k, dtype=np.intp)
    cdef Py_ssize_t[::1] active = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t i, j, n_active
    cdef int sweeps = 0
    cdef double acc

    for i in range(k):
        acc = corr[i]
        for j in range(k):
            if codes[j] != 0.0:
                acc -= gram[i, j] * codes[j]
        grad[i] = acc

    while sweeps < max_sweeps:
        sweeps += 1
        if _cd_pass(gram, sparsity, codes, grad, everything, k) < tol:
            break
        n_active = 0
        for j in range(k):
            if codes[j] != 0.0:
                active[n_active] = j
                n_active += 1
        while sweeps < max_sweeps:
            sweeps += 1
            if _cd_pass(gram, sparsity, codes, grad, active, n_active) < tol:
                break
    return sweeps


def column_sweep(double[:, ::1] atoms_t, double[:, ::1] acc_codes,
                 double[:, ::1] acc_data_t, int max_sweeps, double tol):
    cdef Py_ssize_t k = atoms_t.shape[0]
    cdef Py_ssize_t m = atoms_t.shape[1]
    cdef double[::1] u = np.empty(m)
    cdef Py_ssize_t[::1] active = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t i, j, p, t, n_active = 0
    cdef int sweeps = 0
    cdef double ajj, a, norm, un, d, change, max_change

    for j in range(k):
        if acc_codes[j, j] > 1e-10:
            active[n_active] = j
            n_active += 1

    while sweeps < max_sweeps:
        sweeps += 1
        max_change = 0.0
        for t in range(n_active):
            j = active[t]
            ajj = acc_codes[j, j]
            for p in range(m):
                u[p] = acc_data_t[j, p]
            # acc_codes column j equals row j by symmetry; skip zero entries
            for i in range(k):
                a = acc_codes[j, i]
                if a != 0.0:
                    for p in range(m):
                        u[p] -= a * atoms_t[i, p]
            norm = 0.0
            for p in range(m):
                u[p] = u[p] / ajj + atoms_t[j, p]
                norm += u[p] * u[p]
            norm = sqrt(norm)
            if norm <= 1e-12:
                continue
            change = 0.0
            for p in range(m):
                un = u[p] / norm
                d = fabs(un - atoms_t[j, p])
                if d > change:
                    change = d
                atoms_t[j, p] = un
            if change > max_change:
                max_change = change
        if max_change < tol:
            break
    return sweeps
