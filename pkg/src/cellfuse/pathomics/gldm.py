"""Gray-level dependence features (14 values).

A pixel's dependence is 1 plus the number of its 8-neighbors (inside the
mask) sharing its quantized level exactly (difference threshold 0).  The
matrix P[i, j] counts pixels of level i+1 with dependence j+1; every in-mask
pixel contributes exactly once, so the matrix never degenerates.
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

GLDM_NAMES = (
    "gldm.dependence_entropy",
    "gldm.dependence_non_uniformity",
    "gldm.dependence_non_uniformity_normalized",
    "gldm.dependence_variance",
    "gldm.gray_level_non_uniformity",
    "gldm.gray_level_variance",
    "gldm.high_gray_level_emphasis",
    "gldm.large_dependence_emphasis",
    "gldm.large_dependence_high_gray_level_emphasis",
    "gldm.large_dependence_low_gray_level_emphasis",
    "gldm.low_gray_level_emphasis",
    "gldm.small_dependence_emphasis",
    "gldm.small_dependence_high_gray_level_emphasis",
    "gldm.small_dependence_low_gray_level_emphasis",
)


def gldm_features(
    region: NucleusRegion | QuantizedRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    q = region if isinstance(region, QuantizedRegion) else quantize(region, n_bins)
    counts = kernels.gldm_counts(q.levels, q.n_levels)
    nz = counts.sum()
    p = counts / nz
    lev = np.arange(1, q.n_levels + 1, dtype=np.float64)[:, None]
    dep = np.arange(1, counts.shape[1] + 1, dtype=np.float64)[None, :]
    p_lev = p.sum(axis=1)
    p_dep = p.sum(axis=0)
    mu_lev = float((lev[:, 0] * p_lev).sum())
    mu_dep = float((dep[0] * p_dep).sum())
    return np.array(
        [
            _entropy2(p),
            float((counts.sum(axis=0) ** 2).sum() / nz),
            float((p_dep**2).sum()),
            float((p * (dep - mu_dep) ** 2).sum()),
            float((counts.sum(axis=1) ** 2).sum() / nz),
            float((p * (lev - mu_lev) ** 2).sum()),
            float((p * lev**2).sum()),
            float((p * dep**2).sum()),
            float((p * lev**2 * dep**2).sum()),
            float((p * dep**2 / lev**2).sum()),
            float((p / lev**2).sum()),
            float((p / dep**2).sum()),
            float((p * lev**2 / dep**2).sum()),
            float((p / (lev**2 * dep**2)).sum()),
        ]
    )


def _entropy2(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0
