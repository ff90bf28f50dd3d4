"""Gray-level run-length features (16 values).

Runs of equal quantized level are collected along four directions (0, 45,
90, 135 degrees, unit step); mask gaps break runs.  The 16 statistics are
computed per direction and averaged over the four directions.
"""

from __future__ import annotations

import numpy as np

from cellfuse import kernels
from cellfuse.pathomics.region import (
    N_BINS_DEFAULT,
    NucleusRegion,
    QuantizedRegion,
    quantize,
)

GLRLM_NAMES = (
    "glrlm.gray_level_non_uniformity",
    "glrlm.gray_level_non_uniformity_normalized",
    "glrlm.gray_level_variance",
    "glrlm.high_gray_level_run_emphasis",
    "glrlm.long_run_emphasis",
    "glrlm.long_run_high_gray_level_emphasis",
    "glrlm.long_run_low_gray_level_emphasis",
    "glrlm.low_gray_level_run_emphasis",
    "glrlm.run_entropy",
    "glrlm.run_length_non_uniformity",
    "glrlm.run_length_non_uniformity_normalized",
    "glrlm.run_percentage",
    "glrlm.run_variance",
    "glrlm.short_run_emphasis",
    "glrlm.short_run_high_gray_level_emphasis",
    "glrlm.short_run_low_gray_level_emphasis",
)


def glrlm_features(
    region: NucleusRegion | QuantizedRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    q = region if isinstance(region, QuantizedRegion) else quantize(region, n_bins)
    per_direction = kernels.glrlm_counts(q.levels, q.n_levels)
    feats = [_one_direction(counts, q.n_levels, q.n_pixels) for counts in per_direction]
    return np.mean(feats, axis=0)


def _one_direction(counts: np.ndarray, n_levels: int, n_pixels: int) -> np.ndarray:
    nz = counts.sum()
    p = counts / nz
    lev = np.arange(1, n_levels + 1, dtype=np.float64)[:, None]
    run = np.arange(1, counts.shape[1] + 1, dtype=np.float64)[None, :]
    p_lev = p.sum(axis=1)
    p_run = p.sum(axis=0)
    mu_lev = float((lev[:, 0] * p_lev).sum())
    mu_run = float((run[0] * p_run).sum())
    pos = p[p > 0]
    return np.array(
        [
            float((counts.sum(axis=1) ** 2).sum() / nz),
            float((p_lev**2).sum()),
            float((p * (lev - mu_lev) ** 2).sum()),
            float((p * lev**2).sum()),
            float((p * run**2).sum()),
            float((p * lev**2 * run**2).sum()),
            float((p * run**2 / lev**2).sum()),
            float((p / lev**2).sum()),
            float(-(pos * np.log2(pos)).sum()),
            float((counts.sum(axis=0) ** 2).sum() / nz),
            float((p_run**2).sum()),
            float(nz / n_pixels),
            float((p * (run - mu_run) ** 2).sum()),
            float((p / run**2).sum()),
            float((p * lev**2 / run**2).sum()),
            float((p / (lev**2 * run**2)).sum()),
        ]
    )
