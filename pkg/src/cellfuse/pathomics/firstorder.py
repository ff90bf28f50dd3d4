"""First-order intensity statistics (18 values).

Computed on the raw gray values, without quantization: entropy and
uniformity use the empirical distribution of the exact intensity values.
All moments are population moments; a zero-variance region yields skewness
and kurtosis of 0 (kurtosis is otherwise the raw fourth standardized moment,
not excess).  Total energy equals energy because pixels have unit area here.
"""

from __future__ import annotations

import numpy as np

from cellfuse.pathomics.region import NucleusRegion

FIRST_ORDER_NAMES = (
    "firstorder.percentile_10",
    "firstorder.percentile_90",
    "firstorder.energy",
    "firstorder.entropy",
    "firstorder.interquartile_range",
    "firstorder.kurtosis",
    "firstorder.maximum",
    "firstorder.mean_absolute_deviation",
    "firstorder.mean",
    "firstorder.median",
    "firstorder.minimum",
    "firstorder.range",
    "firstorder.robust_mean_absolute_deviation",
    "firstorder.root_mean_squared",
    "firstorder.skewness",
    "firstorder.total_energy",
    "firstorder.uniformity",
    "firstorder.variance",
)


def first_order_features(region: NucleusRegion) -> np.ndarray:
    v = region.intensities
    n = v.size
    mean = v.mean()
    centered = v - mean
    var = (centered**2).mean()
    sd = np.sqrt(var)
    p10 = np.percentile(v, 10)
    p90 = np.percentile(v, 90)
    energy = float((v**2).sum())
    _, counts = np.unique(v, return_counts=True)
    probs = counts / n
    entropy = float(-(probs * np.log2(probs)).sum())
    uniformity = float((probs**2).sum())
    robust = v[(v >= p10) & (v <= p90)]
    # two distinct values leave nothing between P10 and P90; zero spread then
    rmad = 0.0 if robust.size == 0 else float(np.abs(robust - robust.mean()).mean())
    skewness = 0.0 if sd == 0 else float((centered**3).mean() / sd**3)
    kurtosis = 0.0 if sd == 0 else float((centered**4).mean() / var**2)
    return np.array(
        [
            p10,
            p90,
            energy,
            entropy,
            float(np.percentile(v, 75) - np.percentile(v, 25)),
            kurtosis,
            v.max(),
            float(np.abs(centered).mean()),
            mean,
            float(np.percentile(v, 50)),
            v.min(),
            float(v.max() - v.min()),
            rmad,
            float(np.sqrt(energy / n)),
            skewness,
            energy,
            uniformity,
            var,
        ]
    )
