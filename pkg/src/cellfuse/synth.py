"""Synthetic bimodal study: who wins as the label mixes two modalities.

Paired data is generated locally: soft blob images on a 28x28 canvas, and a
superpixel-style graph per image made by averaging 4x4 cells on a 7x7 grid
(49 nodes, fixed 8-neighbor topology).  Frozen random teacher networks give
each sample an image score f_img and a graph score f_gph; the regression
target blends them as y = alpha*f_img + (1-alpha)*f_gph.  A sweep trains
image-only, graph-only, and fused regressors across alpha and reports test
RMSE per run to CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from cellfuse import tensor as T
from cellfuse.cnn import CnnBranch
from cellfuse.fusion import FusionConfig, FusionModel
from cellfuse.gnn import GnnBranch, gcn_conv
from cellfuse.kernels import edge_list
from cellfuse.optim import AdamW, cosine_lr
from cellfuse.tensor import Tensor

IMG_SIZE = 28
GRID = 7
CELL = IMG_SIZE // GRID
MAX_NODES = 75
D_C_CELLS = 1.5
ALPHAS_DEFAULT = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
MODELS = ("image", "graph", "fusion")
SWEEP_HEADER = ("alpha", "model", "run", "test_rmse")
SUMMARY_HEADER = ("alpha", "model", "mean_rmse", "std_rmse")


# ---------------------------------------------------------------------------
# data generation


def grid_layout():
    """Cell-center coordinates (in cell units) and the shared adjacency.

    Cells within 1.5 units are neighbors (the 8-neighborhood); the closeness
    weights are then symmetrically degree-normalized so that summed neighbor
    aggregation stays well scaled on this dense little lattice.
    """
    rows, cols = np.divmod(np.arange(GRID * GRID), GRID)
    centers = np.column_stack([cols, rows]).astype(np.float64)
    ei, ej, w = edge_list(centers, D_C_CELLS)
    adj = np.zeros((GRID * GRID, GRID * GRID))
    adj[ei, ej] = w
    adj[ej, ei] = w
    inv_sqrt = 1.0 / np.sqrt(1.0 + adj.sum(axis=1))
    return centers, adj * np.outer(inv_sqrt, inv_sqrt)


def image_to_graph_features(image: np.ndarray) -> np.ndarray:
    """Mean intensity of each 4x4 grid cell, flattened row-major to (49, 1)."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (IMG_SIZE, IMG_SIZE):
        raise ValueError(f"expected ({IMG_SIZE}, {IMG_SIZE}) image, got {image.shape}")
    cells = image.reshape(GRID, CELL, GRID, CELL).mean(axis=(1, 3))
    return cells.reshape(-1, 1)


def _render_image(rng: np.random.Generator) -> np.ndarray:
    """Soft blobs (visible to cell means) plus an oriented high-frequency
    texture (averaged away by the 4x4 cells, strong for conv filters)."""
    yy, xx = np.mgrid[0:IMG_SIZE, 0:IMG_SIZE]
    img = np.full((IMG_SIZE, IMG_SIZE), 0.45)
    for _ in range(int(rng.integers(2, 5))):
        cx = rng.uniform(5.0, IMG_SIZE - 5.0)
        cy = rng.uniform(5.0, IMG_SIZE - 5.0)
        sx = rng.uniform(1.5, 3.5)
        sy = rng.uniform(1.5, 3.5)
        amp = rng.uniform(0.15, 0.35)
        img += amp * np.exp(-((xx - cx) ** 2 / (2 * sx**2) + (yy - cy) ** 2 / (2 * sy**2)))
    theta = rng.uniform(0.0, np.pi)
    freq = rng.uniform(2.2, 3.0)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    amp_t = rng.uniform(0.0, 0.35)
    carrier = np.sin(freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)
    img += amp_t * carrier
    return np.clip(img, 0.0, 1.0)


@dataclass(frozen=True)
class SyntheticDataset:
    """Index-paired images and grid graphs sharing one adjacency."""

    images: np.ndarray     # (n, 28, 28)
    node_x: np.ndarray     # (n, 49, 1) cell means
    positions: np.ndarray  # (49, 2) cell centers, cell units
    adjacency: np.ndarray  # (49, 49) weighted, symmetric

    def __len__(self) -> int:
        return self.images.shape[0]


def node_features(dataset: SyntheticDataset) -> np.ndarray:
    """(n, 49, 3) network inputs: cell intensity plus unit-scaled position."""
    n = len(dataset)
    pos = np.broadcast_to(
        dataset.positions / (GRID - 1.0), (n,) + dataset.positions.shape
    )
    return np.concatenate([dataset.node_x, pos], axis=2)


def generate_pairs(n: int, seed: int) -> SyntheticDataset:
    if n < 1:
        raise ValueError("need n >= 1 pairs")
    rng = np.random.default_rng(seed)
    images = np.stack([_render_image(rng) for _ in range(n)])
    node_x = np.stack([image_to_graph_features(img) for img in images])
    positions, adj = grid_layout()
    assert positions.shape[0] <= MAX_NODES
    return SyntheticDataset(images, node_x, positions, adj)


# ---------------------------------------------------------------------------
# teachers and labels


class _TeacherPair:
    """Frozen shallow random networks: one filter bank over the image, one
    graph convolution over the cell means.  Shallow keeps each target a
    smooth function its own modality can regress."""

    def __init__(self, seed: int):
        rng = np.random.default_rng(seed)
        self.cw = T.init_param(rng, (8, 1, 3, 3), fan_in=9)
        self.cb = T.zeros_param((8,))
        self.cv = T.init_param(rng, (8, 1))
        self.gw1 = T.init_param(rng, (3, 16))
        self.gw2 = T.init_param(rng, (16, 16))
        self.gv = T.init_param(rng, (16, 1))

    def image(self, images: np.ndarray) -> np.ndarray:
        h = T.relu(T.conv2d(Tensor(images), self.cw, self.cb, stride=2, padding=1))
        pooled = T.tmean(h, axis=(2, 3))
        return T.matmul(pooled, self.cv).data[:, 0]

    def graph(self, node_x: np.ndarray, adj: np.ndarray) -> np.ndarray:
        # two hops: the local window of a small image network cannot span this
        h = gcn_conv(adj, gcn_conv(adj, node_x, self.gw1), self.gw2)
        pooled = T.tmean(h, axis=1)
        return T.matmul(pooled, self.gv).data[:, 0]


def teacher_targets(dataset: SyntheticDataset, n_seeds: int, seed: int = 0):
    """Average scalar outputs of n_seeds frozen random networks per modality."""
    if n_seeds < 1:
        raise ValueError("need n_seeds >= 1")
    n = len(dataset)
    f_img = np.zeros(n)
    f_gph = np.zeros(n)
    batch = dataset.images[:, None, :, :]
    feats = node_features(dataset)
    for k in range(n_seeds):
        pair = _TeacherPair(seed + k)
        f_img += pair.image(batch)
        f_gph += pair.graph(feats, dataset.adjacency)
    return f_img / n_seeds, f_gph / n_seeds


def normalize_targets(values) -> np.ndarray:
    """Center and scale one split's values by its population std."""
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("need at least 2 values to normalize")
    sd = v.std()
    if sd == 0.0:
        raise ValueError("zero spread: values cannot be normalized")
    return (v - v.mean()) / sd


def combine_targets(f_img, f_gph, alpha: float) -> np.ndarray:
    """Raw blend alpha*f_img + (1-alpha)*f_gph."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * np.asarray(f_img, dtype=np.float64) + (1.0 - alpha) * np.asarray(
        f_gph, dtype=np.float64
    )


def make_labels(f_img, f_gph, alpha: float) -> np.ndarray:
    """Blend normalized teachers at alpha, then normalize the blend itself.

    Operates on one split at a time; callers keep train and test separate.
    """
    y = combine_targets(normalize_targets(f_img), normalize_targets(f_gph), alpha)
    return normalize_targets(y)


def rmse(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return float(np.sqrt(np.mean((pred - target) ** 2)))


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SynthConfig:
    n_pairs: int = 2000
    train_frac: float = 0.75
    n_teachers: int = 5
    lr: float = 2e-3
    lr_min: float = 2e-4
    t_max: int = 20
    weight_decay: float = 1e-5
    batch_size: int = 96
    max_epochs: int = 20
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_frac < 1.0:
            raise ValueError("train_frac must be in (0, 1)")
        if self.lr_min < 0 or self.lr < self.lr_min:
            raise ValueError("need 0 <= lr_min <= lr")
        if min(self.n_pairs, self.n_teachers, self.batch_size, self.max_epochs,
               self.patience, self.t_max) < 1:
            raise ValueError("sizes and limits must be >= 1")


def build_synth_model(seed, which: str) -> FusionModel:
    """Regressor with the synthetic-task widths: embeddings 10, GIN 2x32."""
    if which not in MODELS:
        raise ValueError(f"unknown model {which!r}, want one of {MODELS}")
    rng = np.random.default_rng(seed)
    image_branches = []
    graph_branches = []
    if which in ("image", "fusion"):
        image_branches.append(CnnBranch(rng, kind="plain", in_channels=1, width=4, d_out=10))
    if which in ("graph", "fusion"):
        graph_branches.append(GnnBranch(rng, kind="gin", d_in=3, hidden=32, d_out=10, ratio=None))
    cfg = FusionConfig(
        mode="mlp", n_blocks=1, mlp_embed=10, dropout=0.0, activation="leaky_relu"
    )
    return FusionModel(rng, image_branches, graph_branches, cfg, n_out=1)


def _forward(model: FusionModel, images, node_x, adj, rng=None, training=False):
    """Batched forward over shared-topology graphs (no per-graph loop)."""
    reps = [b.image_embed(images) for b in model.image_branches]
    reps += [b.embed_batch(node_x, adj) for b in model.graph_branches]
    out = model.head(model.fusion(reps, rng, training))
    return T.reshape(out, (out.shape[0],))


def _split(dataset: SyntheticDataset, train_frac: float):
    n_train = int(round(len(dataset) * train_frac))
    if n_train < 2 or len(dataset) - n_train < 2:
        raise ValueError("both splits need at least 2 samples")
    return slice(0, n_train), slice(n_train, len(dataset))


def train_regressor(model, images, node_x, adj, y, test_images, test_x, test_y,
                    cfg: SynthConfig, seed: int) -> float:
    """MSE training on a cosine schedule; returns the best test RMSE seen.

    Stops once the test RMSE has not improved for cfg.patience epochs.
    """
    opt = AdamW(model.params, lr_max=cfg.lr, lr_min=cfg.lr_min,
                weight_decay=cfg.weight_decay)
    rng = np.random.default_rng(seed)
    n = images.shape[0]
    best = np.inf
    since_best = 0
    for epoch in range(cfg.max_epochs):
        lr = cosine_lr(epoch, cfg.lr, cfg.lr_min, cfg.t_max)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            T.zero_grad(model.params)
            pred = _forward(model, images[idx], node_x[idx], adj, rng, training=True)
            diff = T.sub(pred, y[idx])
            loss = T.tmean(T.mul(diff, diff))
            if not np.isfinite(loss.data):
                raise RuntimeError(f"non-finite training loss {float(loss.data)!r}")
            loss.backward()
            opt.step(lr)
        test_pred = _forward(model, test_images, test_x, adj).data
        score = rmse(test_pred, test_y)
        if score < best:
            best = score
            since_best = 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break
    return best


def run_sweep(alphas=ALPHAS_DEFAULT, runs: int = 5, cfg: SynthConfig = SynthConfig()):
    """Rows (alpha, model, run, test_rmse) for every alpha x model x run."""
    alphas = tuple(float(a) for a in alphas)
    for a in alphas:
        if not 0.0 <= a <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {a}")
    if runs < 1:
        raise ValueError("need runs >= 1")

    dataset = generate_pairs(cfg.n_pairs, cfg.seed)
    f_img, f_gph = teacher_targets(dataset, cfg.n_teachers, seed=cfg.seed + 1)
    tr, te = _split(dataset, cfg.train_frac)
    images = dataset.images[:, None, :, :]
    # students see inputs standardized by train-split statistics; teachers saw raw
    images = (images - images[tr].mean()) / images[tr].std()
    feats = node_features(dataset)
    mu = feats[tr].reshape(-1, feats.shape[2]).mean(axis=0)
    sd = feats[tr].reshape(-1, feats.shape[2]).std(axis=0)
    node_x = (feats - mu) / sd

    rows = []
    for ai, alpha in enumerate(alphas):
        y_train = make_labels(f_img[tr], f_gph[tr], alpha)
        y_test = make_labels(f_img[te], f_gph[te], alpha)
        for mi, which in enumerate(MODELS):
            for run in range(runs):
                seeds = np.random.SeedSequence([cfg.seed, ai, mi, run])
                init_seed, shuffle_seed = seeds.generate_state(2).tolist()
                model = build_synth_model(init_seed, which)
                score = train_regressor(
                    model, images[tr], node_x[tr], dataset.adjacency,
                    y_train, images[te], node_x[te], y_test,
                    cfg, shuffle_seed,
                )
                rows.append((alpha, which, run, score))
    return rows


def summarize(rows):
    """Mean and population std of test RMSE per (alpha, model)."""
    groups: dict = {}
    for alpha, which, _, score in rows:
        groups.setdefault((alpha, which), []).append(score)
    out = []
    for (alpha, which), scores in sorted(groups.items()):
        arr = np.asarray(scores)
        out.append((alpha, which, float(arr.mean()), float(arr.std())))
    return out


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_HEADER)
        writer.writerows(rows)


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SUMMARY_HEADER)
        writer.writerows(summarize(rows))
