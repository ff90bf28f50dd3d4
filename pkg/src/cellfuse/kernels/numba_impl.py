"""Numba-compiled kernel implementations.

Same contracts as ``numpy_impl``; every function here is a serial
``@njit(cache=True)`` loop nest, so results are deterministic run to run and
match the numpy backend to float precision.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def glcm_counts(levels, n_levels):
    h, w = levels.shape
    counts = np.zeros((n_levels, n_levels), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            a = levels[r, c]
            if a == 0:
                continue
            # east, southeast, south, southwest; symmetric fill of the rest
            for k in range(4):
                if k == 0:
                    nr, nc = r, c + 1
                elif k == 1:
                    nr, nc = r + 1, c + 1
                elif k == 2:
                    nr, nc = r + 1, c
                else:
                    nr, nc = r + 1, c - 1
                if 0 <= nr < h and 0 <= nc < w:
                    b = levels[nr, nc]
                    if b > 0:
                        counts[a - 1, b - 1] += 1.0
                        counts[b - 1, a - 1] += 1.0
    return counts


@njit(cache=True)
def gldm_counts(levels, n_levels):
    h, w = levels.shape
    counts = np.zeros((n_levels, 9), dtype=np.float64)
    for r in range(h):
        for c in range(w):
            a = levels[r, c]
            if a == 0:
                continue
            eq = 0
            for dr in range(-1, 2):
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and levels[nr, nc] == a:
                        eq += 1
            counts[a - 1, eq] += 1.0
    return counts


@njit(cache=True)
def _runs_line(levels, r0, c0, dr, dc, counts):
    h, w = levels.shape
    r, c = r0, c0
    cur = 0
    length = 0
    while 0 <= r < h and 0 <= c < w:
        v = levels[r, c]
        if v == cur:
            length += 1
        else:
            if cur > 0:
                counts[cur - 1, length - 1] += 1.0
            cur = v
            length = 1
        r += dr
        c += dc
    if cur > 0:
        counts[cur - 1, length - 1] += 1.0


@njit(cache=True)
def glrlm_counts(levels, n_levels):
    h, w = levels.shape
    m = max(h, w)
    out = np.zeros((4, n_levels, m), dtype=np.float64)
    # 0 degrees: rows, direction (0, 1)
    for r in range(h):
        _runs_line(levels, r, 0, 0, 1, out[0])
    # 45 degrees: direction (-1, 1), starting from the left column and
    # bottom row
    for r in range(h):
        _runs_line(levels, r, 0, -1, 1, out[1])
    for c in range(1, w):
        _runs_line(levels, h - 1, c, -1, 1, out[1])
    # 90 degrees: columns, direction (1, 0)
    for c in range(w):
        _runs_line(levels, 0, c, 1, 0, out[2])
    # 135 degrees: direction (1, 1), starting from the top row and left column
    for c in range(w):
        _runs_line(levels, 0, c, 1, 1, out[3])
    for r in range(1, h):
        _runs_line(levels, r, 0, 1, 1, out[3])
    return out


@njit(cache=True)
def glszm_counts(levels, n_levels):
    h, w = levels.shape
    n_pix = 0
    for r in range(h):
        for c in range(w):
            if levels[r, c] > 0:
                n_pix += 1
    counts = np.zeros((n_levels, max(n_pix, 1)), dtype=np.float64)
    visited = np.zeros((h, w), dtype=np.uint8)
    stack = np.empty((h * w, 2), dtype=np.int64)
    for r in range(h):
        for c in range(w):
            if levels[r, c] == 0 or visited[r, c]:
                continue
            lev = levels[r, c]
            visited[r, c] = 1
            stack[0, 0] = r
            stack[0, 1] = c
            top = 1
            size = 0
            while top > 0:
                top -= 1
                cr = stack[top, 0]
                cc = stack[top, 1]
                size += 1
                for dr in range(-1, 2):
                    for dc in range(-1, 2):
                        if dr == 0 and dc == 0:
                            continue
                        nr, nc = cr + dr, cc + dc
                        if (
                            0 <= nr < h
                            and 0 <= nc < w
                            and not visited[nr, nc]
                            and levels[nr, nc] == lev
                        ):
                            visited[nr, nc] = 1
                            stack[top, 0] = nr
                            stack[top, 1] = nc
                            top += 1
            counts[lev - 1, size - 1] += 1.0
    return counts


@njit(cache=True)
def ngtdm_stats(levels, n_levels):
    h, w = levels.shape
    s = np.zeros(n_levels, dtype=np.float64)
    n = np.zeros(n_levels, dtype=np.float64)
    for r in range(h):
        for c in range(w):
            a = levels[r, c]
            if a == 0:
                continue
            total = 0.0
            cnt = 0
            for dr in range(-1, 2):
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    nr, nc = r + dr, c + dc
                    if 0 <= nr < h and 0 <= nc < w and levels[nr, nc] > 0:
                        total += levels[nr, nc]
                        cnt += 1
            if cnt > 0:
                s[a - 1] += abs(a - total / cnt)
                n[a - 1] += 1.0
    return s, n


@njit(cache=True)
def edge_list(centroids, d_c):
    n = centroids.shape[0]
    cnt = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = centroids[i, 0] - centroids[j, 0]
            dy = centroids[i, 1] - centroids[j, 1]
            if np.sqrt(dx * dx + dy * dy) <= d_c:
                cnt += 1
    ii = np.empty(cnt, dtype=np.int64)
    jj = np.empty(cnt, dtype=np.int64)
    ww = np.empty(cnt, dtype=np.float64)
    k = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = centroids[i, 0] - centroids[j, 0]
            dy = centroids[i, 1] - centroids[j, 1]
            d = np.sqrt(dx * dx + dy * dy)
            if d <= d_c:
                ii[k] = i
                jj[k] = j
                ww[k] = d_c / d
                k += 1
    return ii, jj, ww


@njit(cache=True)
def conv2d_fwd(xp, w, stride):
    b, c, hp, wp = xp.shape
    f, _, kh, kw = w.shape
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    y = np.zeros((b, f, ho, wo), dtype=np.float64)
    for bi in range(b):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    acc = 0.0
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                acc += (
                                    xp[bi, ci, i * stride + u, j * stride + v]
                                    * w[fi, ci, u, v]
                                )
                    y[bi, fi, i, j] = acc
    return y


@njit(cache=True)
def conv2d_gx(gy, w, stride, hp, wp):
    b, f, ho, wo = gy.shape
    _, c, kh, kw = w.shape
    gxp = np.zeros((b, c, hp, wp), dtype=np.float64)
    for bi in range(b):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    g = gy[bi, fi, i, j]
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                gxp[bi, ci, i * stride + u, j * stride + v] += (
                                    g * w[fi, ci, u, v]
                                )
    return gxp


@njit(cache=True)
def conv2d_gw(xp, gy, stride, kh, kw):
    b, f, ho, wo = gy.shape
    c = xp.shape[1]
    gw = np.zeros((f, c, kh, kw), dtype=np.float64)
    for bi in range(b):
        for fi in range(f):
            for i in range(ho):
                for j in range(wo):
                    g = gy[bi, fi, i, j]
                    for ci in range(c):
                        for u in range(kh):
                            for v in range(kw):
                                gw[fi, ci, u, v] += (
                                    g * xp[bi, ci, i * stride + u, j * stride + v]
                                )
    return gw
