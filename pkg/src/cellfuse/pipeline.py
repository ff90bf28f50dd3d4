"""Training loop, evaluation metrics, and dataset plumbing.

Ties the branches together: paired image/graph samples, seeded mini-batch
training with AdamW and a cosine schedule, early stopping on validation
loss, and the metric stack (accuracy, rank-based AUC, patient-level AUC
from mean patch probabilities).  Also owns the on-disk formats around a
run: dataset manifests, the metrics CSV, and text checkpoints.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from cellfuse import tensor as T
from cellfuse.cellgraph import (
    CellGraph,
    GraphFormatError,
    PatchBundle,
    parse_bundle,
    parse_graph,
)
from cellfuse.cnn import CnnBranch
from cellfuse.fusion import FusionConfig, FusionModel
from cellfuse.gnn import GnnBranch
from cellfuse.optim import AdamW, cosine_lr

SPLITS = ("train", "val", "test")
METRICS_HEADER = ("run", "seed", "acc", "auc", "auc_patient")
CKPT_MAGIC = "CKPT v1"
_VALUES_PER_LINE = 8


class MetricUndefinedError(ValueError):
    """The requested metric has no value on this data."""


class CheckpointError(ValueError):
    """Raised when checkpoint text cannot be parsed or applied."""


def _fmt(v: float) -> str:
    return repr(float(v))


# ---------------------------------------------------------------------------
# samples


@dataclass(frozen=True)
class Sample:
    """A patch bundle paired with the cell graph built from it."""

    bundle: PatchBundle
    graph: CellGraph

    def __post_init__(self):
        if self.bundle.patch_id != self.graph.patch_id:
            raise ValueError(
                f"patch id mismatch: bundle {self.bundle.patch_id!r}, "
                f"graph {self.graph.patch_id!r}"
            )
        if self.bundle.patient_id != self.graph.patient_id:
            raise ValueError(
                f"patient id mismatch for patch {self.bundle.patch_id!r}"
            )
        if self.bundle.label != self.graph.label:
            raise ValueError(
                f"label mismatch for patch {self.bundle.patch_id!r}: "
                f"bundle {self.bundle.label}, graph {self.graph.label}"
            )

    @property
    def patch_id(self) -> str:
        return self.bundle.patch_id

    @property
    def patient_id(self) -> str:
        return self.bundle.patient_id

    @property
    def label(self) -> int:
        return self.bundle.label


@dataclass(frozen=True)
class TrainConfig:
    lr_max: float = 5e-4
    lr_min: float = 5e-6
    t_max: int = 10
    weight_decay: float = 1e-5
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 8
    seed: int = 0

    def __post_init__(self):
        if self.lr_min < 0 or self.lr_max < self.lr_min:
            raise ValueError("need 0 <= lr_min <= lr_max")
        if self.t_max < 1:
            raise ValueError("t_max must be >= 1")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs, patience must be >= 1")


# ---------------------------------------------------------------------------
# feature standardization and augmentation


class Standardizer:
    """Per-feature affine map fitted on training-set node features.

    Images are not handled here; they are rescaled by a fixed /255 so the
    map stays a pure node-feature statistic.
    """

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        if self.mean.shape != self.std.shape or self.mean.ndim != 1:
            raise ValueError("mean and std must be 1-D with equal shapes")
        if np.any(self.std <= 0):
            raise ValueError("std entries must be positive")

    @classmethod
    def fit(cls, graphs) -> "Standardizer":
        graphs = list(graphs)
        if not graphs:
            raise ValueError("cannot fit a standardizer on zero graphs")
        x = np.concatenate([g.x for g in graphs], axis=0)
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        std = np.where(std > 0.0, std, 1.0)
        return cls(mean, std)

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.mean.shape[0]:
            raise ValueError(
                f"feature width {x.shape[-1]} does not match fitted width "
                f"{self.mean.shape[0]}"
            )
        return (x - self.mean) / self.std


class _GraphView:
    """Feature-substituted stand-in for a CellGraph during embedding."""

    __slots__ = ("x", "_adj")

    def __init__(self, x: np.ndarray, adj: np.ndarray):
        self.x = x
        self._adj = adj

    def dense_adjacency(self) -> np.ndarray:
        return self._adj


def augment(image, features, rng):
    """Seeded flips on the image plus location jitter on node features.

    Draw order is fixed (horizontal flip, vertical flip, jitter matrix) so a
    given generator state always produces the same augmentation.  Jitter is
    uniform in [-5, 5] per axis and touches only the two location columns.
    """
    rng = np.random.default_rng(rng) if isinstance(rng, (int, np.integer)) else rng
    img = np.asarray(image, dtype=np.float64)
    feats = np.array(features, dtype=np.float64, copy=True)
    if feats.ndim != 2 or feats.shape[1] < 2:
        raise ValueError("features must be (N, F) with the location pair first")
    if rng.random() < 0.5:
        img = img[:, ::-1]
    if rng.random() < 0.5:
        img = img[::-1, :]
    feats[:, :2] += rng.uniform(-5.0, 5.0, (feats.shape[0], 2))
    return np.ascontiguousarray(img), feats


def _make_batch(samples, standardizer: Standardizer, rng=None, training=False):
    images, views = [], []
    for s in samples:
        image = s.bundle.image
        feats = s.graph.x
        if training:
            image, feats = augment(image, feats, rng)
        images.append(image / 255.0)
        views.append(_GraphView(standardizer.apply(feats), s.graph.dense_adjacency()))
    batch = np.stack(images)[:, None, :, :]
    labels = np.array([s.label for s in samples], dtype=np.int64)
    return batch, views, labels


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainResult:
    history: dict
    best_epoch: int
    best_val_loss: float
    epochs_run: int
    standardizer: Standardizer


def _dataset_loss(model, samples, standardizer, batch_size) -> float:
    total, seen = 0.0, 0
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        batch, views, labels = _make_batch(chunk, standardizer)
        loss = T.cross_entropy(model.forward(batch, views), labels)
        total += float(loss.data) * len(chunk)
        seen += len(chunk)
    return total / seen


def train(
    model,
    train_samples,
    val_samples,
    cfg: TrainConfig,
    standardizer: Standardizer | None = None,
) -> TrainResult:
    """Seeded mini-batch cross-entropy training with early stopping.

    Validation loss is checked once per epoch; the best parameters are
    restored before returning, and no run goes past best_epoch + patience.
    """
    train_samples = list(train_samples)
    val_samples = list(val_samples)
    if not train_samples or not val_samples:
        raise ValueError("train and val splits must both be non-empty")
    if standardizer is None:
        standardizer = Standardizer.fit([s.graph for s in train_samples])

    opt = AdamW(
        model.params,
        lr_max=cfg.lr_max,
        lr_min=cfg.lr_min,
        t_max=cfg.t_max,
        weight_decay=cfg.weight_decay,
    )
    rng = np.random.default_rng(cfg.seed)
    history = {"train_loss": [], "val_loss": [], "lr": []}
    best_val = np.inf
    best_epoch = -1
    best_state = {k: p.data.copy() for k, p in model.named_params().items()}
    since_best = 0
    epochs_run = 0

    for epoch in range(cfg.max_epochs):
        lr = cosine_lr(epoch, cfg.lr_max, cfg.lr_min, cfg.t_max)
        order = rng.permutation(len(train_samples))
        total, seen = 0.0, 0
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            chunk = [train_samples[i] for i in idx]
            batch, views, labels = _make_batch(
                chunk, standardizer, rng=rng, training=True
            )
            T.zero_grad(model.params)
            logits = model.forward(batch, views, rng=rng, training=True)
            loss = T.cross_entropy(logits, labels)
            if not np.isfinite(loss.data):
                raise RuntimeError(
                    f"non-finite training loss {float(loss.data)!r} at epoch "
                    f"{epoch}, batch {start // cfg.batch_size}"
                )
            loss.backward()
            opt.step(lr)
            total += float(loss.data) * len(chunk)
            seen += len(chunk)

        val_loss = _dataset_loss(model, val_samples, standardizer, cfg.batch_size)
        history["train_loss"].append(total / seen)
        history["val_loss"].append(val_loss)
        history["lr"].append(lr)
        epochs_run = epoch + 1

        if val_loss < best_val:
            best_val = val_loss
            best_epoch = epoch
            since_best = 0
            best_state = {k: p.data.copy() for k, p in model.named_params().items()}
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    for name, p in model.named_params().items():
        p.data[...] = best_state[name]
    return TrainResult(history, best_epoch, float(best_val), epochs_run, standardizer)


# ---------------------------------------------------------------------------
# metrics


def auc(scores, labels) -> float:
    """Probability that a positive outranks a negative, ties worth half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.ndim != 1 or scores.shape != labels.shape:
        raise ValueError("scores and labels must be matching 1-D sequences")
    if scores.size == 0:
        raise MetricUndefinedError("AUC is undefined on empty input")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricUndefinedError(
            f"AUC needs both classes, got {n_pos} positive / {n_neg} negative"
        )
    ranks = rankdata(scores)
    stat = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(stat / (n_pos * n_neg))


def majority_vote(patch_labels) -> int:
    """Modal patch label; an exact tie resolves to the positive class."""
    labels = list(patch_labels)
    if not labels:
        raise ValueError("majority_vote needs at least one label")
    if any(v not in (0, 1) for v in labels):
        raise ValueError("labels must be 0 or 1")
    ones = sum(labels)
    return 1 if 2 * ones >= len(labels) else 0


def patient_score(patch_probs) -> float:
    """Mean positive-class probability over a patient's patches."""
    probs = np.asarray(list(patch_probs), dtype=np.float64)
    if probs.size == 0:
        raise ValueError("patient_score needs at least one probability")
    return float(probs.mean())


@dataclass
class EvalReport:
    acc: float
    auc: float | None
    auc_patient: float | None
    patient_table: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def predict_probs(model, samples, standardizer, batch_size: int = 32):
    """Positive-class probability and argmax prediction per sample."""
    probs, preds = [], []
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        batch, views, _ = _make_batch(chunk, standardizer)
        logits = model.forward(batch, views)
        probs.append(T.softmax(logits).data[:, 1])
        preds.append(np.argmax(logits.data, axis=1))
    return np.concatenate(probs), np.concatenate(preds)


def evaluate(model, samples, standardizer, batch_size: int = 32) -> EvalReport:
    samples = list(samples)
    if not samples:
        raise ValueError("evaluate needs at least one sample")
    probs, preds = predict_probs(model, samples, standardizer, batch_size)
    labels = np.array([s.label for s in samples], dtype=np.int64)
    acc = float((preds == labels).mean())

    notes = []
    try:
        auc_img = auc(probs, labels)
    except MetricUndefinedError as err:
        auc_img = None
        notes.append(f"auc: {err}")

    by_patient: dict = {}
    for s, p in zip(samples, probs):
        by_patient.setdefault(s.patient_id, ([], []))
        by_patient[s.patient_id][0].append(float(p))
        by_patient[s.patient_id][1].append(s.label)
    table = [
        (pid, patient_score(ps), majority_vote(ls))
        for pid, (ps, ls) in sorted(by_patient.items())
    ]
    try:
        auc_pat = auc([row[1] for row in table], [row[2] for row in table])
    except MetricUndefinedError as err:
        auc_pat = None
        notes.append(f"auc_patient: {err}")

    return EvalReport(acc, auc_img, auc_pat, table, notes)


# ---------------------------------------------------------------------------
# manifests and metrics files


def read_manifest(path) -> dict:
    """Parse `<bundle> <graph> <split>` lines into per-split Sample lists.

    Paths are taken relative to the manifest's own directory.  Blank lines
    and lines starting with # are skipped.
    """
    base = os.path.dirname(os.path.abspath(path))
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    out = {split: [] for split in SPLITS}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise GraphFormatError(
                f"line {lineno}: expected '<bundle> <graph> <split>', got "
                f"{len(parts)} fields"
            )
        bundle_path, graph_path, split = parts
        if split not in SPLITS:
            raise GraphFormatError(
                f"line {lineno}: unknown split {split!r} (want train/val/test)"
            )
        try:
            with open(os.path.join(base, bundle_path), encoding="utf-8") as fh:
                bundle = parse_bundle(fh.read())
            with open(os.path.join(base, graph_path), encoding="utf-8") as fh:
                graph = parse_graph(fh.read())
        except OSError as err:
            raise GraphFormatError(f"line {lineno}: {err}") from err
        except GraphFormatError as err:
            raise GraphFormatError(
                f"line {lineno}: while reading pair: {err}"
            ) from err
        try:
            sample = Sample(bundle, graph)
        except ValueError as err:
            raise GraphFormatError(f"line {lineno}: {err}") from err
        out[split].append(sample)
    return out


def write_metrics(path, rows) -> None:
    """CSV with header run,seed,acc,auc,auc_patient; None becomes empty."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        for row in rows:
            row = list(row)
            if len(row) != len(METRICS_HEADER):
                raise ValueError(
                    f"metrics row needs {len(METRICS_HEADER)} fields, got {len(row)}"
                )
            writer.writerow(["" if v is None else v for v in row])


# ---------------------------------------------------------------------------
# checkpoints


def _param_dict(model) -> dict:
    return model.named_params() if hasattr(model, "named_params") else dict(model)


def save_checkpoint(path, model, meta: dict | None = None) -> None:
    """Versioned text container of named parameter arrays, exact round-trip."""
    params = _param_dict(model)
    out = [CKPT_MAGIC]
    for key, value in (meta or {}).items():
        key, value = str(key), str(value)
        if not key or any(ch.isspace() for ch in key):
            raise CheckpointError(f"meta key {key!r} must be non-empty, no spaces")
        if "\n" in value:
            raise CheckpointError(f"meta value for {key!r} must be single-line")
        out.append(f"META {key} {value}")
    out.append(f"ARRAYS {len(params)}")
    for name, p in params.items():
        if any(ch.isspace() for ch in name):
            raise CheckpointError(f"array name {name!r} must not contain spaces")
        a = np.asarray(p.data if hasattr(p, "data") else p, dtype=np.float64)
        dims = " ".join(str(d) for d in a.shape)
        out.append(f"ARRAY {name} {a.ndim}{' ' + dims if dims else ''}")
        flat = a.reshape(-1)
        for start in range(0, flat.size, _VALUES_PER_LINE):
            out.append(" ".join(_fmt(v) for v in flat[start : start + _VALUES_PER_LINE]))
    out.append("END")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def read_checkpoint(path):
    """Return (meta, {name: array}) from a checkpoint file."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()

    def fail(lineno, msg):
        raise CheckpointError(f"line {lineno}: {msg}")

    pos = 0
    if pos >= len(lines) or lines[pos] != CKPT_MAGIC:
        fail(1, f"expected header {CKPT_MAGIC!r}")
    pos += 1
    meta = {}
    while pos < len(lines) and lines[pos].startswith("META "):
        parts = lines[pos].split(" ", 2)
        if len(parts) < 3:
            fail(pos + 1, "META needs a key and a value")
        meta[parts[1]] = parts[2]
        pos += 1
    if pos >= len(lines) or not lines[pos].startswith("ARRAYS "):
        fail(pos + 1, "expected ARRAYS count")
    try:
        n_arrays = int(lines[pos].split()[1])
    except (IndexError, ValueError):
        fail(pos + 1, "bad ARRAYS count")
    pos += 1

    arrays = {}
    for _ in range(n_arrays):
        if pos >= len(lines) or not lines[pos].startswith("ARRAY "):
            fail(pos + 1, "expected ARRAY header")
        toks = lines[pos].split()
        if len(toks) < 3:
            fail(pos + 1, "ARRAY needs a name and rank")
        name = toks[1]
        if name in arrays:
            fail(pos + 1, f"duplicate array {name!r}")
        try:
            ndim = int(toks[2])
            shape = tuple(int(t) for t in toks[3:])
        except ValueError:
            fail(pos + 1, "ARRAY dims must be integers")
        if len(shape) != ndim or any(d < 0 for d in shape):
            fail(pos + 1, f"rank {ndim} does not match dims {shape}")
        header_line = pos + 1
        pos += 1
        count = int(np.prod(shape, dtype=np.int64)) if shape else 1
        values = []
        while len(values) < count:
            if pos >= len(lines):
                fail(
                    header_line,
                    f"array {name!r} truncated: {len(values)} of {count} values",
                )
            for tok in lines[pos].split():
                try:
                    values.append(float(tok))
                except ValueError:
                    fail(pos + 1, f"bad float {tok!r}")
            pos += 1
        if len(values) != count:
            fail(pos, f"array {name!r} has {len(values)} values, expected {count}")
        arrays[name] = np.array(values, dtype=np.float64).reshape(shape)
    if pos >= len(lines) or lines[pos] != "END":
        fail(pos + 1, "expected END")
    if any(line.strip() for line in lines[pos + 1 :]):
        fail(pos + 2, "trailing content after END")
    return meta, arrays


def load_checkpoint(path, model) -> dict:
    """Load arrays into a model's named parameters; returns the meta dict."""
    meta, arrays = read_checkpoint(path)
    params = _param_dict(model)
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(
            f"parameter names do not match model: missing {missing}, extra {extra}"
        )
    for name, p in params.items():
        if arrays[name].shape != p.data.shape:
            raise CheckpointError(
                f"shape mismatch for {name!r}: file {arrays[name].shape}, "
                f"model {p.data.shape}"
            )
    for name, p in params.items():
        p.data[...] = arrays[name]
    return meta


# ---------------------------------------------------------------------------
# model assembly


def build_model(
    seed: int,
    mode: str = "mlp",
    cnn_kind: str = "residual",
    gnn_kind: str = "gin",
    cnn_width: int = 8,
    d_image: int = 64,
    gnn_hidden: int = 128,
    d_graph: int = 16,
    ratio: float | None = 0.5,
    d_in_graph: int = 94,
    n_blocks: int = 1,
    alignment: str = "minimization",
    predefined_dim: int = 192,
    mlp_embed: int = 128,
    heads: int = 4,
    dropout: float = 0.1,
    activation: str = "relu",
    n_out: int = 2,
) -> FusionModel:
    """One image branch + one graph branch fused under the given config."""
    rng = np.random.default_rng(seed)
    image = CnnBranch(rng, kind=cnn_kind, in_channels=1, width=cnn_width, d_out=d_image)
    graph = GnnBranch(
        rng, kind=gnn_kind, d_in=d_in_graph, hidden=gnn_hidden, d_out=d_graph, ratio=ratio
    )
    cfg = FusionConfig(
        mode=mode,
        n_blocks=n_blocks,
        alignment=alignment,
        predefined_dim=predefined_dim,
        mlp_embed=mlp_embed,
        heads=heads,
        dropout=dropout,
        activation=activation,
    )
    return FusionModel(rng, [image], [graph], cfg, n_out=n_out)
