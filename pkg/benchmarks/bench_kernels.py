#!/usr/bin/env python3
"""Benchmark the compiled sparse-coding kernels against the pure-NumPy
fallback, on the problem sizes the tracker actually produces, plus an
end-to-end tracking comparison.

Usage: python benchmarks/bench_kernels.py [--full]
"""

import argparse
import time

import numpy as np

from dfst import _kernels_py
from dfst import kernels as dispatch

try:
    from dfst import _kernels as _compiled
except ImportError:
    _compiled = None


def setup_lasso(seed, m=256, k=250):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((m, k))
    atoms /= np.linalg.norm(atoms, axis=0)
    x = rng.standard_normal(m)
    x /= np.linalg.norm(x)
    return np.ascontiguousarray(atoms.T @ atoms), np.ascontiguousarray(atoms.T @ x)


def bench_lasso(impl, problems, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for gram, corr in problems:
            impl.lasso_cd(gram, corr, 0.05, 1000, 1e-6, np.zeros(corr.shape[0]))
        best = min(best, time.perf_counter() - t0)
    return best / len(problems)


def setup_column(seed, m=256, k=250, samples=30):
    rng = np.random.default_rng(seed)
    atoms = rng.standard_normal((m, k))
    atoms /= np.linalg.norm(atoms, axis=0)
    codes = rng.standard_normal((k, samples)) * (rng.random((k, samples)) < 0.05)
    data = rng.standard_normal((m, samples))
    return (
        np.ascontiguousarray(atoms.T),
        np.ascontiguousarray(codes @ codes.T),
        np.ascontiguousarray((data @ codes.T).T),
    )


def bench_column(impl, problems, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        for atoms_t, acc_codes, acc_data_t in problems:
            impl.column_sweep(atoms_t.copy(), acc_codes, acc_data_t, 200, 1e-7)
        best = min(best, time.perf_counter() - t0)
    return best / len(problems)


def bench_tracking(backend):
    from dfst.harness import run_tracker
    from dfst.imaging import default_cn_table
    from dfst.synth import SynthSpec, synth_sequence
    from dfst.tracker import TrackerConfig

    dispatch.lasso_cd = backend.lasso_cd
    dispatch.column_sweep = backend.column_sweep
    spec = SynthSpec(
        width=320,
        height=240,
        num_frames=30,
        target_size=(40, 40),
        target_color=(230, 120, 40),
        start=(60.0, 120.0),
        velocity=(3.0, 0.0),
        texture_amount=0.3,
        texture_cell=12,
        seed=7,
    )
    seq = synth_sequence(spec)
    return run_tracker(seq, TrackerConfig(), default_cn_table()).fps


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--full", action="store_true", help="include the end-to-end tracking run")
    args = parser.parse_args()

    if _compiled is None:
        print("compiled extension not available; only the pure backend will run")

    lasso_problems = [setup_lasso(seed) for seed in range(8)]
    column_problems = [setup_column(seed) for seed in range(4)]

    print(f"{'kernel':<26} {'pure NumPy':>12} {'compiled':>12} {'speedup':>9}")
    pure = bench_lasso(_kernels_py, lasso_problems)
    comp = bench_lasso(_compiled, lasso_problems) if _compiled else float("nan")
    print(f"{'lasso_cd (K=250, m=256)':<26} {pure * 1e3:>10.2f}ms {comp * 1e3:>10.2f}ms {pure / comp:>8.1f}x")

    pure = bench_column(_kernels_py, column_problems)
    comp = bench_column(_compiled, column_problems) if _compiled else float("nan")
    print(f"{'column_sweep (K=250)':<26} {pure * 1e3:>10.2f}ms {comp * 1e3:>10.2f}ms {pure / comp:>8.1f}x")

    if args.full:
        fps_pure = bench_tracking(_kernels_py)
        fps_comp = bench_tracking(_compiled) if _compiled else float("nan")
        print(
            f"{'tracking (320x240, 30f)':<26} {fps_pure:>9.1f}fps {fps_comp:>9.1f}fps "
            f"{fps_comp / fps_pure:>8.1f}x"
        )


if __name__ == "__main__":
    main()
