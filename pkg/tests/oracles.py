"""Independent reference implementations used as test oracles.

Everything here is written from the literal definitions, favoring clarity
over speed, and deliberately shares no code with the package internals it
checks.
"""

from __future__ import annotations

import math
from collections import Counter

import numpy as np


def numeric_grad(forward, param, h: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar-valued closure w.r.t. param.

    ``forward()`` must be deterministic; ``param`` is a Tensor whose .data is
    perturbed in place one element at a time.
    """
    flat = param.data.reshape(-1)
    out = np.zeros_like(flat)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        f_plus = float(forward().data)
        flat[i] = keep - h
        f_minus = float(forward().data)
        flat[i] = keep
        out[i] = (f_plus - f_minus) / (2.0 * h)
    return out.reshape(param.data.shape)


def rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Max elementwise relative error with a small absolute floor."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-6)
    return float((np.abs(a - n) / denom).max()) if a.size else 0.0


# ---------------------------------------------------------------------------
# ranking metrics


def auc_pairs(labels, scores) -> float:
    """AUC by literal pair counting: wins + half-ties over all pos/neg pairs."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    if not pos or not neg:
        raise ValueError("AUC needs both classes")
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------------------
# texture features from literal definitions (dict-based, python floats)


def quantize_ref(values, n_bins):
    """Uniform quantization of raw values to 1..n_bins (constant -> 1)."""
    values = list(values)
    lo, hi = min(values), max(values)
    if lo == hi:
        return [1 for _ in values]
    out = []
    for v in values:
        q = int((v - lo) / (hi - lo) * n_bins) + 1
        out.append(min(q, n_bins))
    return out


def grid_of(pixels, levels):
    """Bounding-box grid with level values, 0 outside the mask."""
    rows = [p[0] for p in pixels]
    cols = [p[1] for p in pixels]
    r0, c0 = min(rows), min(cols)
    h = max(rows) - r0 + 1
    w = max(cols) - c0 + 1
    g = [[0] * w for _ in range(h)]
    for (r, c), lev in zip(pixels, levels):
        g[r - r0][c - c0] = lev
    return g


def _in(g, r, c):
    return 0 <= r < len(g) and 0 <= c < len(g[0]) and g[r][c] > 0


NEIGH8 = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def glcm_ref(g, n_levels):
    """Symmetric co-occurrence matrix over all 8 unit offsets, normalized.

    A region with no neighboring pairs degenerates to all mass at (1, 1).
    """
    counts = Counter()
    h, w = len(g), len(g[0])
    for r in range(h):
        for c in range(w):
            if g[r][c] == 0:
                continue
            for dr, dc in NEIGH8:
                if _in(g, r + dr, c + dc):
                    counts[(g[r][c], g[r + dr][c + dc])] += 1
    total = sum(counts.values())
    p = [[0.0] * n_levels for _ in range(n_levels)]
    if total == 0:
        p[0][0] = 1.0
        return p
    for (a, b), n in counts.items():
        p[a - 1][b - 1] = n / total
    return p


def gldm_ref(g, n_levels):
    """(level, dependence) counts; dependence = 1 + equal 8-neighbors."""
    counts = Counter()
    h, w = len(g), len(g[0])
    for r in range(h):
        for c in range(w):
            if g[r][c] == 0:
                continue
            dep = 1
            for dr, dc in NEIGH8:
                if _in(g, r + dr, c + dc) and g[r + dr][c + dc] == g[r][c]:
                    dep += 1
            counts[(g[r][c], dep)] += 1
    return counts


def glrlm_ref(g, n_levels):
    """Per-direction run-length counts; directions E, NE, S, SE."""
    h, w = len(g), len(g[0])
    out = []
    for dr, dc in [(0, 1), (-1, 1), (1, 0), (1, 1)]:
        counts = Counter()
        starts = []
        for r in range(h):
            for c in range(w):
                pr, pc = r - dr, c - dc
                if not (0 <= pr < h and 0 <= pc < w):
                    starts.append((r, c))
        for r0, c0 in starts:
            r, c = r0, c0
            run_level, run_len = 0, 0
            while 0 <= r < h and 0 <= c < w:
                v = g[r][c]
                if v == run_level:
                    run_len += 1
                else:
                    if run_level > 0:
                        counts[(run_level, run_len)] += 1
                    run_level, run_len = v, 1
                r += dr
                c += dc
            if run_level > 0:
                counts[(run_level, run_len)] += 1
        out.append(counts)
    return out


def glszm_ref(g, n_levels):
    """(level, zone size) counts for 8-connected equal-level zones."""
    h, w = len(g), len(g[0])
    seen = [[False] * w for _ in range(h)]
    counts = Counter()
    for r in range(h):
        for c in range(w):
            if g[r][c] == 0 or seen[r][c]:
                continue
            lev = g[r][c]
            frontier = [(r, c)]
            seen[r][c] = True
            size = 0
            while frontier:
                cr, cc = frontier.pop()
                size += 1
                for dr, dc in NEIGH8:
                    nr, nc = cr + dr, cc + dc
                    if (
                        0 <= nr < h
                        and 0 <= nc < w
                        and not seen[nr][nc]
                        and g[nr][nc] == lev
                    ):
                        seen[nr][nc] = True
                        frontier.append((nr, nc))
            counts[(lev, size)] += 1
    return counts


def ngtdm_ref(g, n_levels):
    """Literal neighborhood gray-tone difference table: p_i, s_i, Ngp, Nvp."""
    h, w = len(g), len(g[0])
    s = [0.0] * n_levels
    n = [0] * n_levels
    for r in range(h):
        for c in range(w):
            if g[r][c] == 0:
                continue
            nb = [
                g[r + dr][c + dc]
                for dr, dc in NEIGH8
                if _in(g, r + dr, c + dc)
            ]
            if nb:
                s[g[r][c] - 1] += abs(g[r][c] - sum(nb) / len(nb))
                n[g[r][c] - 1] += 1
    return s, n


# ---------------------------------------------------------------------------
# first-order statistics from literal definitions


def first_order_ref(values):
    """The 18 first-order statistics as a name -> value dict."""
    x = sorted(float(v) for v in values)
    n = len(x)
    mean = sum(x) / n
    var = sum((v - mean) ** 2 for v in x) / n
    sd = math.sqrt(var)
    p10 = float(np.percentile(x, 10))
    p25 = float(np.percentile(x, 25))
    p75 = float(np.percentile(x, 75))
    p90 = float(np.percentile(x, 90))
    median = float(np.percentile(x, 50))
    energy = sum(v * v for v in x)
    counts = Counter(values)
    probs = [c / n for c in counts.values()]
    entropy = -sum(p * math.log2(p) for p in probs if p > 0)
    uniformity = sum(p * p for p in probs)
    mad = sum(abs(v - mean) for v in x) / n
    robust = [v for v in x if p10 <= v <= p90]
    if robust:
        rmean = sum(robust) / len(robust)
        rmad = sum(abs(v - rmean) for v in robust) / len(robust)
    else:
        rmad = 0.0
    skew = 0.0 if sd == 0 else (sum((v - mean) ** 3 for v in x) / n) / sd**3
    kurt = 0.0 if sd == 0 else (sum((v - mean) ** 4 for v in x) / n) / var**2
    return {
        "10th percentile": p10,
        "90th percentile": p90,
        "energy": energy,
        "entropy": entropy,
        "interquartile range": p75 - p25,
        "kurtosis": kurt,
        "maximum": x[-1],
        "mean absolute deviation": mad,
        "mean": mean,
        "median": median,
        "minimum": x[0],
        "range": x[-1] - x[0],
        "robust mean absolute deviation": rmad,
        "root mean squared": math.sqrt(energy / n),
        "skewness": skew,
        "total energy": energy,
        "uniformity": uniformity,
        "variance": var,
    }


# ---------------------------------------------------------------------------
# named texture features from literal definitions


def _entropy_ref(probs):
    return -sum(p * math.log2(p) for p in probs if p > 0)


def glcm_features_ref(g, n_levels):
    """The 23 co-occurrence features in package order."""
    p = glcm_ref(g, n_levels)
    ng = n_levels
    px = [sum(p[i][j] for j in range(ng)) for i in range(ng)]
    py = [sum(p[i][j] for i in range(ng)) for j in range(ng)]
    mu_x = sum((i + 1) * px[i] for i in range(ng))
    mu_y = sum((j + 1) * py[j] for j in range(ng))
    sig_x = math.sqrt(sum((i + 1 - mu_x) ** 2 * px[i] for i in range(ng)))
    sig_y = math.sqrt(sum((j + 1 - mu_y) ** 2 * py[j] for j in range(ng)))
    p_sum = [0.0] * (2 * ng - 1)
    p_diff = [0.0] * ng
    for i in range(ng):
        for j in range(ng):
            p_sum[i + j] += p[i][j]
            p_diff[abs(i - j)] += p[i][j]

    autocorr = sum(
        p[i][j] * (i + 1) * (j + 1) for i in range(ng) for j in range(ng)
    )
    clus = lambda power: sum(
        p[i][j] * ((i + 1) + (j + 1) - mu_x - mu_y) ** power
        for i in range(ng)
        for j in range(ng)
    )
    contrast = sum(
        p[i][j] * (i - j) ** 2 for i in range(ng) for j in range(ng)
    )
    corr = 0.0 if sig_x * sig_y == 0 else (autocorr - mu_x * mu_y) / (sig_x * sig_y)
    diff_avg = sum(k * p_diff[k] for k in range(ng))
    diff_ent = _entropy_ref(p_diff)
    diff_var = sum((k - diff_avg) ** 2 * p_diff[k] for k in range(ng))
    inv_diff = sum(p_diff[k] / (1 + k) for k in range(ng))
    inv_diff_mom = sum(p_diff[k] / (1 + k * k) for k in range(ng))
    n_present = max(sum(1 for v in px if v > 0), 1)
    idmn = sum(p_diff[k] / (1 + (k / n_present) ** 2) for k in range(ng))
    idn = sum(p_diff[k] / (1 + k / n_present) for k in range(ng))
    hx = _entropy_ref(px)
    hy = _entropy_ref(py)
    hxy = _entropy_ref([p[i][j] for i in range(ng) for j in range(ng)])
    hxy1 = -sum(
        p[i][j] * math.log2(px[i] * py[j])
        for i in range(ng)
        for j in range(ng)
        if p[i][j] > 0 and px[i] * py[j] > 0
    )
    hxy2 = -sum(
        px[i] * py[j] * math.log2(px[i] * py[j])
        for i in range(ng)
        for j in range(ng)
        if px[i] * py[j] > 0
    )
    denom = max(hx, hy)
    imc1 = 0.0 if denom == 0 else (hxy - hxy1) / denom
    imc2 = math.sqrt(max(0.0, 1.0 - math.exp(-2.0 * (hxy2 - hxy))))
    inv_var = sum(p_diff[k] / (k * k) for k in range(1, ng))
    joint_energy = sum(p[i][j] ** 2 for i in range(ng) for j in range(ng))
    mcc = _mcc_ref(p, px, ng)
    max_prob = max(max(row) for row in p)
    sum_ent = _entropy_ref(p_sum)
    sum_sq = sum(
        p[i][j] * (i + 1 - mu_x) ** 2 for i in range(ng) for j in range(ng)
    )
    return [
        autocorr, clus(4), clus(3), clus(2), contrast, corr, diff_avg,
        diff_ent, diff_var, inv_diff, inv_diff_mom, idmn, idn, imc1, imc2,
        inv_var, mu_x, joint_energy, hxy, mcc, max_prob, sum_ent, sum_sq,
    ]


def _mcc_ref(p, px, ng):
    present = [i for i in range(ng) if px[i] > 0]
    if len(present) < 2:
        return 0.0
    m = len(present)
    q = [[0.0] * m for _ in range(m)]
    for a, i in enumerate(present):
        for b, j in enumerate(present):
            q[a][b] = sum(
                p[i][k] * p[j][k] / (px[i] * px[k]) for k in present
            )
    eig = sorted(np.real(np.linalg.eigvals(np.array(q))))
    second = eig[-2]
    return 0.0 if second < 1e-6 else math.sqrt(second)


def gldm_features_ref(g, n_levels):
    """The 14 dependence features in package order."""
    counts = gldm_ref(g, n_levels)
    nz = sum(counts.values())
    items = [(i, j, c / nz) for (i, j), c in counts.items()]
    p_lev = Counter()
    p_dep = Counter()
    for i, j, p in items:
        p_lev[i] += p
        p_dep[j] += p
    mu_lev = sum(i * p for i, p in p_lev.items())
    mu_dep = sum(j * p for j, p in p_dep.items())
    return [
        _entropy_ref([p for _, _, p in items]),
        sum(v * v for v in _group(counts, 1).values()) / nz,
        sum(p * p for p in p_dep.values()),
        sum(p * (j - mu_dep) ** 2 for _, j, p in items),
        sum(v * v for v in _group(counts, 0).values()) / nz,
        sum(p * (i - mu_lev) ** 2 for i, _, p in items),
        sum(p * i * i for i, _, p in items),
        sum(p * j * j for _, j, p in items),
        sum(p * i * i * j * j for i, j, p in items),
        sum(p * j * j / (i * i) for i, j, p in items),
        sum(p / (i * i) for i, _, p in items),
        sum(p / (j * j) for _, j, p in items),
        sum(p * i * i / (j * j) for i, j, p in items),
        sum(p / (i * i * j * j) for i, j, p in items),
    ]


def _group(counts, axis):
    out = Counter()
    for key, c in counts.items():
        out[key[axis]] += c
    return out


def _rlm_one(counts, n_pixels):
    nz = sum(counts.values())
    items = [(i, r, c / nz) for (i, r), c in counts.items()]
    p_lev = _group(counts, 0)
    p_run = _group(counts, 1)
    mu_lev = sum(i * c / nz for i, c in p_lev.items())
    mu_run = sum(r * c / nz for r, c in p_run.items())
    return [
        sum(v * v for v in p_lev.values()) / nz,
        sum((v / nz) ** 2 for v in p_lev.values()),
        sum(p * (i - mu_lev) ** 2 for i, _, p in items),
        sum(p * i * i for i, _, p in items),
        sum(p * r * r for _, r, p in items),
        sum(p * i * i * r * r for i, r, p in items),
        sum(p * r * r / (i * i) for i, r, p in items),
        sum(p / (i * i) for i, _, p in items),
        _entropy_ref([p for _, _, p in items]),
        sum(v * v for v in p_run.values()) / nz,
        sum((v / nz) ** 2 for v in p_run.values()),
        nz / n_pixels,
        sum(p * (r - mu_run) ** 2 for _, r, p in items),
        sum(p / (r * r) for _, r, p in items),
        sum(p * i * i / (r * r) for i, r, p in items),
        sum(p / (i * i * r * r) for i, r, p in items),
    ]


def glrlm_features_ref(g, n_levels, n_pixels):
    """The 16 run-length features, averaged over the four directions."""
    per_dir = [_rlm_one(c, n_pixels) for c in glrlm_ref(g, n_levels)]
    return [sum(col) / 4.0 for col in zip(*per_dir)]


def glszm_features_ref(g, n_levels, n_pixels):
    """The 16 size-zone features in package order."""
    counts = glszm_ref(g, n_levels)
    nz = sum(counts.values())
    items = [(i, s, c / nz) for (i, s), c in counts.items()]
    p_lev = _group(counts, 0)
    p_size = _group(counts, 1)
    mu_lev = sum(i * c / nz for i, c in p_lev.items())
    mu_size = sum(s * c / nz for s, c in p_size.items())
    return [
        sum(v * v for v in p_lev.values()) / nz,
        sum((v / nz) ** 2 for v in p_lev.values()),
        sum(p * (i - mu_lev) ** 2 for i, _, p in items),
        sum(p * i * i for i, _, p in items),
        sum(p * s * s for _, s, p in items),
        sum(p * i * i * s * s for i, s, p in items),
        sum(p * s * s / (i * i) for i, s, p in items),
        sum(p / (i * i) for i, _, p in items),
        sum(v * v for v in p_size.values()) / nz,
        sum((v / nz) ** 2 for v in p_size.values()),
        sum(p / (s * s) for _, s, p in items),
        sum(p * i * i / (s * s) for i, s, p in items),
        sum(p / (i * i * s * s) for i, s, p in items),
        _entropy_ref([p for _, _, p in items]),
        nz / n_pixels,
        sum(p * (s - mu_size) ** 2 for _, s, p in items),
    ]


def ngtdm_features_ref(g, n_levels):
    """The 5 neighborhood-tone features in package order."""
    s, n = ngtdm_ref(g, n_levels)
    nvp = sum(n)
    p = [c / nvp if nvp > 0 else 0.0 for c in n]
    present = [i for i in range(n_levels) if p[i] > 0]
    ngp = len(present)
    ps = sum(p[i] * s[i] for i in range(n_levels))
    coarseness = 1e6 if ps == 0 else 1.0 / ps
    if ngp <= 1:
        busyness = 0.0
        contrast = 0.0
    else:
        den = sum(
            abs((i + 1) * p[i] - (j + 1) * p[j]) for i in present for j in present
        )
        busyness = 0.0 if den == 0 else ps / den
        contrast = (
            sum(p[i] * p[j] * (i - j) ** 2 for i in present for j in present)
            / (ngp * (ngp - 1))
        ) * (sum(s) / nvp)
    if ngp == 0:
        complexity = 0.0
        strength = 0.0
    else:
        complexity = (
            sum(
                abs(i - j) * (p[i] * s[i] + p[j] * s[j]) / (p[i] + p[j])
                for i in present
                for j in present
            )
            / nvp
        )
        total_s = sum(s)
        strength = (
            0.0
            if total_s == 0
            else sum(
                (p[i] + p[j]) * (i - j) ** 2 for i in present for j in present
            )
            / total_s
        )
    return [busyness, coarseness, complexity, contrast, strength]


# ---------------------------------------------------------------------------
# dense graph-layer references


def gcn_ref(adj, h, w):
    """ReLU(D^-1/2 (A+I) D^-1/2 H W) via explicit dense matrices."""
    n = adj.shape[0]
    a_hat = np.asarray(adj, dtype=float) + np.eye(n)
    d_inv = np.diag(1.0 / np.sqrt(a_hat.sum(axis=1)))
    z = d_inv @ a_hat @ d_inv @ np.asarray(h, dtype=float) @ np.asarray(w, dtype=float)
    return np.maximum(z, 0.0)


def _gelu_np(z):
    return z * 0.5 * (1.0 + erf_vec(z / math.sqrt(2.0)))


def erf_vec(z):
    from scipy.special import erf

    return erf(z)


def gin_ref(adj, h, w1, b1, w2, b2, eps=0.0):
    """MLP((1+eps) h + A h) with a gelu hidden layer, no outer activation."""
    agg = (1.0 + eps) * np.asarray(h, dtype=float) + np.asarray(adj, dtype=float) @ h
    return _gelu_np(agg @ w1 + b1) @ w2 + b2


def topk_ref(h, p, ratio):
    """Kept indices and gated rows per the score-projection definition."""
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    y = h @ p / math.sqrt((p * p).sum())
    k = math.ceil(ratio * h.shape[0])
    order = sorted(range(h.shape[0]), key=lambda i: (-y[i], i))
    kept = sorted(order[:k])
    return kept, h[kept] * np.tanh(y[kept])[:, None]
