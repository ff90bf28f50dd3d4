"""Neighborhood gray-tone difference features (5 values).

For each in-mask pixel with at least one in-mask 8-neighbor, the absolute
difference between its level and its neighbors' mean level accumulates into
s_i; n_i counts such pixels per level.  p_i = n_i / Nvp.

Degenerate conventions (mirrored by the test oracle): a flat region has all
s_i = 0, so coarseness is capped at 1/1e-6; busyness, complexity, contrast,
and strength fall back to 0 whenever their denominators vanish (single
present level, or no valid pixels at all, as for an isolated single pixel).
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

NGTDM_NAMES = (
    "ngtdm.busyness",
    "ngtdm.coarseness",
    "ngtdm.complexity",
    "ngtdm.contrast",
    "ngtdm.strength",
)

COARSENESS_CAP = 1e6


def ngtdm_features(
    region: NucleusRegion | QuantizedRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    q = region if isinstance(region, QuantizedRegion) else quantize(region, n_bins)
    s, n = kernels.ngtdm_stats(q.levels, q.n_levels)
    nvp = n.sum()
    lev = np.arange(1, q.n_levels + 1, dtype=np.float64)
    p = n / nvp if nvp > 0 else np.zeros_like(n)
    present = np.flatnonzero(p > 0)
    ngp = present.size

    ps = float((p * s).sum())
    coarseness = COARSENESS_CAP if ps == 0 else 1.0 / ps

    if ngp <= 1:
        busyness = 0.0
        contrast = 0.0
        complexity = 0.0 if ngp == 0 else _complexity(present, lev, p, s, nvp)
        strength = 0.0 if ngp == 0 else _strength(present, lev, p, s)
    else:
        ip = lev[present] * p[present]
        busy_den = float(np.abs(ip[:, None] - ip[None, :]).sum())
        busyness = 0.0 if busy_den == 0 else ps / busy_den
        li = lev[present]
        pi = p[present]
        contrast = float(
            (pi[:, None] * pi[None, :] * (li[:, None] - li[None, :]) ** 2).sum()
            / (ngp * (ngp - 1))
            * (s.sum() / nvp)
        )
        complexity = _complexity(present, lev, p, s, nvp)
        strength = _strength(present, lev, p, s)
    return np.array([busyness, coarseness, complexity, contrast, strength])


def _complexity(present, lev, p, s, nvp) -> float:
    li = lev[present]
    pi = p[present]
    si = s[present]
    num = np.abs(li[:, None] - li[None, :]) * (
        (pi[:, None] * si[:, None] + pi[None, :] * si[None, :])
        / (pi[:, None] + pi[None, :])
    )
    return float(num.sum() / nvp)


def _strength(present, lev, p, s) -> float:
    total_s = float(s.sum())
    if total_s == 0:
        return 0.0
    li = lev[present]
    pi = p[present]
    num = (pi[:, None] + pi[None, :]) * (li[:, None] - li[None, :]) ** 2
    return float(num.sum() / total_s)
