"""Pure-numpy kernel implementations.

These are the reference semantics for every hot kernel; the numba backend in
``numba_impl`` must match them to float precision.  Conventions shared by the
texture kernels: ``levels`` is an int64 grid over the region's bounding box
with values 1..n_levels inside the mask and 0 outside; a 0 never pairs with,
neighbors, or extends anything.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

# 8-neighborhood offsets (row, col)
_OFF8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
# one representative per undirected unit direction; symmetric accumulation
# covers the opposite four
_OFF4 = ((0, 1), (1, 1), (1, 0), (1, -1))

_STRUCT8 = np.ones((3, 3), dtype=bool)


def _windows(levels: np.ndarray, dr: int, dc: int):
    """Aligned views (base, neighbor) for the offset (dr, dc)."""
    h, w = levels.shape
    r0, r1 = max(0, -dr), h - max(0, dr)
    c0, c1 = max(0, -dc), w - max(0, dc)
    base = levels[r0:r1, c0:c1]
    nb = levels[r0 + dr : r1 + dr, c0 + dc : c1 + dc]
    return base, nb, (r0, r1, c0, c1)


# ---------------------------------------------------------------------------
# texture matrices


def glcm_counts(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Symmetric gray-level co-occurrence counts over all 8 unit offsets."""
    counts = np.zeros((n_levels, n_levels), dtype=np.float64)
    for dr, dc in _OFF4:
        base, nb, _ = _windows(levels, dr, dc)
        m = (base > 0) & (nb > 0)
        a, b = base[m] - 1, nb[m] - 1
        np.add.at(counts, (a, b), 1.0)
        np.add.at(counts, (b, a), 1.0)
    return counts


def gldm_counts(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Gray-level dependence counts.

    Column j holds the number of pixels with gray level row+1 whose
    dependence (1 + count of equal-level 8-neighbors) equals j+1.
    """
    h, w = levels.shape
    eq = np.zeros((h, w), dtype=np.int64)
    for dr, dc in _OFF8:
        base, nb, (r0, r1, c0, c1) = _windows(levels, dr, dc)
        eq[r0:r1, c0:c1] += (base > 0) & (nb > 0) & (base == nb)
    counts = np.zeros((n_levels, 9), dtype=np.float64)
    mask = levels > 0
    np.add.at(counts, (levels[mask] - 1, eq[mask]), 1.0)
    return counts


def _run_lengths(line: np.ndarray, counts: np.ndarray) -> None:
    """Accumulate runs of equal nonzero values along a 1-D line."""
    n = line.size
    if n == 0:
        return
    change = np.flatnonzero(line[1:] != line[:-1])
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [n - 1]))
    for s, e in zip(starts, ends):
        v = line[s]
        if v > 0:
            counts[v - 1, e - s] += 1.0


def glrlm_counts(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Run-length counts per direction, shape (4, n_levels, max(h, w)).

    Direction order: 0, 45, 90, 135 degrees.  Runs are undirected, so one
    orientation per direction suffices.
    """
    h, w = levels.shape
    out = np.zeros((4, n_levels, max(h, w)), dtype=np.float64)
    for row in levels:
        _run_lengths(row, out[0])
    flipped = np.fliplr(levels)
    for off in range(-(h - 1), w):
        _run_lengths(np.diagonal(flipped, off), out[1])
    for col in levels.T:
        _run_lengths(col, out[2])
    for off in range(-(h - 1), w):
        _run_lengths(np.diagonal(levels, off), out[3])
    return out


def glszm_counts(levels: np.ndarray, n_levels: int) -> np.ndarray:
    """Size-zone counts: column j holds zones of size j+1 (8-connected)."""
    n_pix = int((levels > 0).sum())
    counts = np.zeros((n_levels, max(n_pix, 1)), dtype=np.float64)
    for lev in range(1, n_levels + 1):
        m = levels == lev
        if not m.any():
            continue
        labeled, n_zones = ndimage.label(m, structure=_STRUCT8)
        if n_zones:
            sizes = np.bincount(labeled.ravel())[1:]
            np.add.at(counts[lev - 1], sizes - 1, 1.0)
    return counts


def ngtdm_stats(levels: np.ndarray, n_levels: int):
    """Neighborhood gray-tone difference sums.

    Returns (s, n): for each level, the summed absolute difference between
    the level and the mean of its in-mask 8-neighbors, and the count of
    in-mask pixels at that level having at least one in-mask neighbor.
    """
    h, w = levels.shape
    nb_sum = np.zeros((h, w), dtype=np.float64)
    nb_cnt = np.zeros((h, w), dtype=np.int64)
    for dr, dc in _OFF8:
        base, nb, (r0, r1, c0, c1) = _windows(levels, dr, dc)
        valid = nb > 0
        nb_sum[r0:r1, c0:c1] += np.where(valid, nb, 0)
        nb_cnt[r0:r1, c0:c1] += valid
    s = np.zeros(n_levels, dtype=np.float64)
    n = np.zeros(n_levels, dtype=np.float64)
    use = (levels > 0) & (nb_cnt > 0)
    lev = levels[use] - 1
    diff = np.abs(levels[use] - nb_sum[use] / nb_cnt[use])
    np.add.at(s, lev, diff)
    np.add.at(n, lev, 1.0)
    return s, n


# ---------------------------------------------------------------------------
# graph edges


def edge_list(centroids: np.ndarray, d_c: float):
    """All node pairs (i < j) within Euclidean distance d_c, weighted d_c/d.

    Centroids must be pairwise distinct; zero distances are the caller's
    responsibility (coincident nuclei are merged upstream).
    """
    n = centroids.shape[0]
    if n < 2:
        z = np.zeros(0, dtype=np.int64)
        return z, z.copy(), np.zeros(0, dtype=np.float64)
    ii, jj = np.triu_indices(n, k=1)
    diff = centroids[ii] - centroids[jj]
    d = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2)
    keep = d <= d_c
    return (
        ii[keep].astype(np.int64),
        jj[keep].astype(np.int64),
        d_c / d[keep],
    )


# ---------------------------------------------------------------------------
# 2-D convolution (channels-first, square stride, caller pre-pads)


def conv2d_fwd(xp: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    """Cross-correlate xp[B,C,Hp,Wp] with w[F,C,kh,kw] at the given stride."""
    b, c, hp, wp = xp.shape
    f, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    y = np.zeros((b, f, ho, wo), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride]
            y += np.einsum("bchw,fc->bfhw", xs, w[:, :, u, v], optimize=True)
    return y


def conv2d_gx(gy: np.ndarray, w: np.ndarray, stride: int, hp: int, wp: int) -> np.ndarray:
    """Gradient of conv2d_fwd w.r.t. the (padded) input."""
    b, f, ho, wo = gy.shape
    _, c, kh, kw = w.shape
    gxp = np.zeros((b, c, hp, wp), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            gxp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride] += (
                np.einsum("bfhw,fc->bchw", gy, w[:, :, u, v], optimize=True)
            )
    return gxp


def conv2d_gw(xp: np.ndarray, gy: np.ndarray, stride: int, kh: int, kw: int) -> np.ndarray:
    """Gradient of conv2d_fwd w.r.t. the weights."""
    b, f, ho, wo = gy.shape
    c = xp.shape[1]
    gw = np.zeros((f, c, kh, kw), dtype=np.float64)
    for u in range(kh):
        for v in range(kw):
            xs = xp[:, :, u : u + stride * ho : stride, v : v + stride * wo : stride]
            gw[:, :, u, v] = np.einsum("bfhw,bchw->fc", gy, xs, optimize=True)
    return gw
