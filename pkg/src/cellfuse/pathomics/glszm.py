"""Gray-level size-zone features (16 values).

A zone is a maximal 8-connected set of in-mask pixels sharing one quantized
level; P[i, s] counts zones of level i+1 and size s+1.  A constant N-pixel
region has exactly one zone of size N, so small-area emphasis equals 1/N^2
there.
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

GLSZM_NAMES = (
    "glszm.gray_level_non_uniformity",
    "glszm.gray_level_non_uniformity_normalized",
    "glszm.gray_level_variance",
    "glszm.high_gray_level_zone_emphasis",
    "glszm.large_area_emphasis",
    "glszm.large_area_high_gray_level_emphasis",
    "glszm.large_area_low_gray_level_emphasis",
    "glszm.low_gray_level_zone_emphasis",
    "glszm.size_zone_non_uniformity",
    "glszm.size_zone_non_uniformity_normalized",
    "glszm.small_area_emphasis",
    "glszm.small_area_high_gray_level_emphasis",
    "glszm.small_area_low_gray_level_emphasis",
    "glszm.zone_entropy",
    "glszm.zone_percentage",
    "glszm.zone_variance",
)


def glszm_features(
    region: NucleusRegion | QuantizedRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    q = region if isinstance(region, QuantizedRegion) else quantize(region, n_bins)
    counts = kernels.glszm_counts(q.levels, q.n_levels)
    nz = counts.sum()
    p = counts / nz
    lev = np.arange(1, q.n_levels + 1, dtype=np.float64)[:, None]
    size = np.arange(1, counts.shape[1] + 1, dtype=np.float64)[None, :]
    p_lev = p.sum(axis=1)
    p_size = p.sum(axis=0)
    mu_lev = float((lev[:, 0] * p_lev).sum())
    mu_size = float((size[0] * p_size).sum())
    pos = p[p > 0]
    return np.array(
        [
            float((counts.sum(axis=1) ** 2).sum() / nz),
            float((p_lev**2).sum()),
            float((p * (lev - mu_lev) ** 2).sum()),
            float((p * lev**2).sum()),
            float((p * size**2).sum()),
            float((p * lev**2 * size**2).sum()),
            float((p * size**2 / lev**2).sum()),
            float((p / lev**2).sum()),
            float((counts.sum(axis=0) ** 2).sum() / nz),
            float((p_size**2).sum()),
            float((p / size**2).sum()),
            float((p * lev**2 / size**2).sum()),
            float((p / (lev**2 * size**2)).sum()),
            float(-(pos * np.log2(pos)).sum()),
            float(nz / q.n_pixels),
            float((p * (size - mu_size) ** 2).sum()),
        ]
    )
