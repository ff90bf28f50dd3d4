"""Timing comparison of the compiled and pure-numpy kernel backends.

Runs every hot kernel on representative workloads against both backends and
prints a table of per-call times plus the speedup of the compiled path.  The
compiled functions are warmed up first so one-time compilation cost is not
mixed into the measurement.

Run as ``python3 -m cellfuse.bench`` or through the ``cellfuse bench``
command.  Use ``--repeat`` to adjust how many calls each measurement
averages over.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from cellfuse import backend
from cellfuse.kernels import KERNEL_NAMES, get_impl

__all__ = ["WORKLOADS", "format_table", "main", "run_bench"]


def _texture_levels(rng: np.random.Generator, side: int = 48, n_levels: int = 32):
    levels = rng.integers(1, n_levels + 1, size=(side, side)).astype(np.int64)
    levels[rng.random((side, side)) < 0.15] = 0
    return levels


def _workload_glcm(rng):
    levels = _texture_levels(rng)
    return lambda impl: impl.glcm_counts(levels, 32)


def _workload_gldm(rng):
    levels = _texture_levels(rng)
    return lambda impl: impl.gldm_counts(levels, 32)


def _workload_glrlm(rng):
    levels = _texture_levels(rng)
    return lambda impl: impl.glrlm_counts(levels, 32)


def _workload_glszm(rng):
    levels = _texture_levels(rng)
    return lambda impl: impl.glszm_counts(levels, 32)


def _workload_ngtdm(rng):
    levels = _texture_levels(rng)
    return lambda impl: impl.ngtdm_stats(levels, 32)


def _workload_edge_list(rng):
    centroids = rng.uniform(0.0, 512.0, size=(400, 2))
    return lambda impl: impl.edge_list(centroids, 30.0)


def _workload_conv2d_fwd(rng):
    xp = rng.normal(size=(32, 8, 30, 30))
    w = rng.normal(size=(16, 8, 3, 3))
    return lambda impl: impl.conv2d_fwd(xp, w, 1)


def _workload_conv2d_gx(rng):
    gy = rng.normal(size=(32, 16, 28, 28))
    w = rng.normal(size=(16, 8, 3, 3))
    return lambda impl: impl.conv2d_gx(gy, w, 1, 30, 30)


def _workload_conv2d_gw(rng):
    xp = rng.normal(size=(32, 8, 30, 30))
    gy = rng.normal(size=(32, 16, 28, 28))
    return lambda impl: impl.conv2d_gw(xp, gy, 1, 3, 3)


WORKLOADS = {
    "glcm_counts": _workload_glcm,
    "gldm_counts": _workload_gldm,
    "glrlm_counts": _workload_glrlm,
    "glszm_counts": _workload_glszm,
    "ngtdm_stats": _workload_ngtdm,
    "edge_list": _workload_edge_list,
    "conv2d_fwd": _workload_conv2d_fwd,
    "conv2d_gx": _workload_conv2d_gx,
    "conv2d_gw": _workload_conv2d_gw,
}

assert set(WORKLOADS) == set(KERNEL_NAMES)


def _time_call(call, impl, repeat: int) -> float:
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        call(impl)
        best = min(best, time.perf_counter() - t0)
    return best


def run_bench(repeat: int = 5, seed: int = 0):
    """Measure every kernel on both backends.

    Returns rows of (kernel, numpy seconds, numba seconds or None); the
    numba column is None when numba is unavailable in the environment.
    """
    numpy_impl = get_impl("numpy")
    try:
        numba_impl = get_impl("numba")
    except ImportError:
        numba_impl = None
    rows = []
    for name, make in WORKLOADS.items():
        rng = np.random.default_rng(seed)
        call = make(rng)
        if numba_impl is not None:
            call(numba_impl)  # absorb compilation before timing
        t_numpy = _time_call(call, numpy_impl, repeat)
        t_numba = _time_call(call, numba_impl, repeat) if numba_impl else None
        rows.append((name, t_numpy, t_numba))
    return rows


def format_table(rows) -> str:
    lines = [f"{'kernel':<14} {'numpy':>10} {'numba':>10} {'speedup':>8}"]
    for name, t_numpy, t_numba in rows:
        if t_numba is None:
            lines.append(f"{name:<14} {t_numpy * 1e3:>8.2f}ms {'n/a':>10} {'n/a':>8}")
        else:
            lines.append(
                f"{name:<14} {t_numpy * 1e3:>8.2f}ms {t_numba * 1e3:>8.2f}ms "
                f"{t_numpy / t_numba:>7.1f}x"
            )
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cellfuse.bench",
        description="Compare the compiled and pure-numpy kernel backends.",
    )
    parser.add_argument("--repeat", type=int, default=5,
                        help="calls per measurement; the best time is kept")
    parser.add_argument("--seed", type=int, default=0, help="workload seed")
    args = parser.parse_args(argv)
    if args.repeat < 1:
        parser.error("--repeat must be positive")
    print(f"active backend: {backend.backend_name()}")
    rows = run_bench(repeat=args.repeat, seed=args.seed)
    print(format_table(rows))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
