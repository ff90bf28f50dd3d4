"""Gray-level co-occurrence features (23 values).

One symmetric co-occurrence matrix is accumulated over all eight unit
offsets (four undirected directions at distance 1) and normalized before any
statistic is taken.  Level indices i, j below are the level values 1..n_bins.

Degenerate conventions, applied identically by the test oracle:

* a region with no neighboring in-mask pixel pairs (e.g. a single pixel)
  takes the constant-region matrix (all mass at level pair (1, 1));
* correlation is 0 when either marginal standard deviation is 0;
* the two informational-measure features are 0 when their normalizers vanish;
* the maximal-correlation coefficient is 0 when fewer than two levels are
  present, and second eigenvalues below 1e-6 are treated as exact zeros
  (numerical guard far above eigensolver noise, far below real signal).
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

GLCM_NAMES = (
    "glcm.autocorrelation",
    "glcm.cluster_prominence",
    "glcm.cluster_shade",
    "glcm.cluster_tendency",
    "glcm.contrast",
    "glcm.correlation",
    "glcm.difference_average",
    "glcm.difference_entropy",
    "glcm.difference_variance",
    "glcm.inverse_difference",
    "glcm.inverse_difference_moment",
    "glcm.inverse_difference_moment_normalized",
    "glcm.inverse_difference_normalized",
    "glcm.imc1",
    "glcm.imc2",
    "glcm.inverse_variance",
    "glcm.joint_average",
    "glcm.joint_energy",
    "glcm.joint_entropy",
    "glcm.maximal_correlation_coefficient",
    "glcm.maximum_probability",
    "glcm.sum_entropy",
    "glcm.sum_squares",
)

_EIG_FLOOR = 1e-6


def _entropy2(p: np.ndarray) -> float:
    p = p[p > 0]
    return float(-(p * np.log2(p)).sum()) if p.size else 0.0


def _mcc(p: np.ndarray, px: np.ndarray) -> float:
    present = np.flatnonzero(px > 0)
    if present.size < 2:
        return 0.0
    sub = p[np.ix_(present, present)]
    marg = px[present]
    # Q(i, j) = sum_k p(i,k) p(j,k) / (px(i) py(k))
    q = (sub / marg[:, None]) @ (sub / marg[None, :]).T
    eig = np.sort(np.real(np.linalg.eigvals(q)))
    second = eig[-2] if eig.size >= 2 else 0.0
    if second < _EIG_FLOOR:
        return 0.0
    return float(np.sqrt(second))


def glcm_features(
    region: NucleusRegion | QuantizedRegion, n_bins: int = N_BINS_DEFAULT
) -> np.ndarray:
    q = region if isinstance(region, QuantizedRegion) else quantize(region, n_bins)
    counts = kernels.glcm_counts(q.levels, q.n_levels)
    total = counts.sum()
    if total == 0:
        counts = np.zeros_like(counts)
        counts[0, 0] = 1.0
        total = 1.0
    return _features(counts / total, q.n_levels)


def _features(p: np.ndarray, n_levels: int) -> np.ndarray:
    ng = n_levels
    lev = np.arange(1, ng + 1, dtype=np.float64)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mu_x = float((lev * px).sum())
    mu_y = float((lev * py).sum())
    sig_x = float(np.sqrt((((lev - mu_x) ** 2) * px).sum()))
    sig_y = float(np.sqrt((((lev - mu_y) ** 2) * py).sum()))
    i_idx = lev[:, None]
    j_idx = lev[None, :]

    # diagonal-band distributions p_{x+y} (k = 2..2Ng) and p_{x-y} (k = 0..Ng-1)
    idx = np.arange(ng)
    p_sum = np.bincount(
        (idx[:, None] + idx[None, :]).ravel(), weights=p.ravel(), minlength=2 * ng - 1
    )
    p_diff = np.bincount(
        np.abs(idx[:, None] - idx[None, :]).ravel(), weights=p.ravel(), minlength=ng
    )
    k_diff = np.arange(0, ng, dtype=np.float64)

    autocorrelation = float((p * i_idx * j_idx).sum())
    cluster_base = i_idx + j_idx - mu_x - mu_y
    cluster_prominence = float((p * cluster_base**4).sum())
    cluster_shade = float((p * cluster_base**3).sum())
    cluster_tendency = float((p * cluster_base**2).sum())
    contrast = float((p * (i_idx - j_idx) ** 2).sum())
    if sig_x * sig_y == 0:
        correlation = 0.0
    else:
        correlation = (autocorrelation - mu_x * mu_y) / (sig_x * sig_y)
    diff_avg = float((k_diff * p_diff).sum())
    diff_entropy = _entropy2(p_diff)
    diff_variance = float(((k_diff - diff_avg) ** 2 * p_diff).sum())
    inv_diff = float((p_diff / (1.0 + k_diff)).sum())
    inv_diff_moment = float((p_diff / (1.0 + k_diff**2)).sum())

    present = int((px > 0).sum())
    ng_present = max(present, 1)
    idmn = float((p_diff / (1.0 + (k_diff / ng_present) ** 2)).sum())
    idn = float((p_diff / (1.0 + k_diff / ng_present)).sum())

    hx = _entropy2(px)
    hxy = _entropy2(p)
    outer = px[:, None] * py[None, :]
    pos = (p > 0) & (outer > 0)
    hxy1 = float(-(p[pos] * np.log2(outer[pos])).sum())
    pos_o = outer > 0
    hxy2 = float(-(outer[pos_o] * np.log2(outer[pos_o])).sum())
    imc1 = 0.0 if hx == 0 else (hxy - hxy1) / hx
    imc2 = float(np.sqrt(max(0.0, 1.0 - np.exp(-2.0 * (hxy2 - hxy)))))

    inverse_variance = float((p_diff[1:] / k_diff[1:] ** 2).sum())
    joint_average = mu_x
    joint_energy = float((p**2).sum())
    mcc = _mcc(p, px)
    maximum_probability = float(p.max())
    sum_entropy = _entropy2(p_sum)
    sum_squares = float((p * (i_idx - mu_x) ** 2).sum())

    # sum-average is intentionally absent: for a symmetric matrix it is
    # identically 2 * joint_average, the one redundant entry in this family
    return np.array(
        [
            autocorrelation,
            cluster_prominence,
            cluster_shade,
            cluster_tendency,
            contrast,
            correlation,
            diff_avg,
            diff_entropy,
            diff_variance,
            inv_diff,
            inv_diff_moment,
            idmn,
            idn,
            imc1,
            imc2,
            inverse_variance,
            joint_average,
            joint_energy,
            hxy,
            mcc,
            maximum_probability,
            sum_entropy,
            sum_squares,
        ]
    )
