"""Central finite-difference verification of the autodiff substrate.

Every differentiable operation, the composite building blocks, and the full
two-branch model are checked: analytic gradients from ``backward`` are
compared against central differences ``(L(x+h) - L(x-h)) / 2h`` elementwise
over every input and parameter tensor.

Checks are registered by name in ``CHECKS``.  Each one is a function
``build(rng) -> (loss_fn, leaves)`` where ``loss_fn()`` rebuilds the graph
from the leaves' current data and returns a scalar tensor; leaves are the
tensors whose gradients get verified.  Inputs are drawn away from the
non-smooth points of kinked activations (and score ties of the pooling op),
where the derivative is either undefined or unreachable by a symmetric
difference.

``broken_linear_check`` is a negative control with a deliberately wrong
derivative; it is excluded from ``CHECKS`` and exists so the harness itself
can be shown to catch bad gradients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cellfuse import tensor as T
from cellfuse.cnn import CnnBranch, dense_block, residual_block
from cellfuse.fusion import FusionConfig, FusionModel, MlpBlock, TransBlock
from cellfuse.gnn import GinMlp, GnnBranch, gcn_conv, gin_conv, topk_pool

__all__ = [
    "CheckResult",
    "CHECKS",
    "DEFAULT_SEEDS",
    "DEFAULT_TOL",
    "broken_linear_check",
    "fd_max_rel_err",
    "format_report",
    "run_suite",
]

DEFAULT_TOL = 1e-4
DEFAULT_SEEDS = tuple(range(20))
_H = 1e-6


def fd_max_rel_err(loss_fn, leaves, h: float = _H) -> float:
    """Worst relative disagreement between backward() and central differences."""
    loss = loss_fn()
    if loss.data.size != 1:
        raise ValueError("loss_fn must return a scalar tensor")
    T.zero_grad(leaves)
    loss.backward()
    grads = [np.array(leaf.grad, copy=True) for leaf in leaves]
    worst = 0.0
    for leaf, grad in zip(leaves, grads):
        flat = leaf.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            up = float(loss_fn().data)
            flat[i] = saved - h
            down = float(loss_fn().data)
            flat[i] = saved
            fd = (up - down) / (2.0 * h)
            ad = gflat[i]
            # the 1e-3 floor keeps roundoff on near-zero gradients (FD noise
            # is ~1e-9 at this h) from registering as relative disagreement
            rel = abs(ad - fd) / max(abs(ad), abs(fd), 1e-3)
            worst = max(worst, rel)
    return worst


# ---------------------------------------------------------------------------
# input construction helpers


def _leaf(rng, *shape) -> T.Tensor:
    return T.Tensor(rng.normal(size=shape), requires_grad=True)


def _kink_free(rng, *shape, margin: float = 0.1) -> T.Tensor:
    """Values bounded away from zero, so sign-kinked ops stay one-sided."""
    mag = rng.uniform(margin, 1.0, size=shape)
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return T.Tensor(mag * sign, requires_grad=True)


def _probe(rng, shape) -> np.ndarray:
    """Fixed random projection that turns an op output into a scalar."""
    return rng.normal(size=shape)


def _graph_adj(rng, n: int) -> np.ndarray:
    """Connected weighted symmetric adjacency with zero diagonal."""
    adj = np.zeros((n, n))
    for i in range(1, n):
        j = int(rng.integers(0, i))
        adj[i, j] = adj[j, i] = rng.uniform(1.0, 2.0)
    extra = rng.random((n, n)) < 0.3
    for i in range(n):
        for j in range(i + 1, n):
            if extra[i, j] and adj[i, j] == 0.0:
                adj[i, j] = adj[j, i] = rng.uniform(1.0, 2.0)
    return adj


class _ArrayGraph:
    """Minimal stand-in exposing the interface the model's forward expects."""

    def __init__(self, x: np.ndarray, adj: np.ndarray):
        self.x = x
        self._adj = adj

    def dense_adjacency(self) -> np.ndarray:
        return self._adj


# ---------------------------------------------------------------------------
# elementwise and shape ops


def _check_add(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 3)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.add(a, b), w)), [a, b]


def _check_sub(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 1)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.sub(a, b), w)), [a, b]


def _check_mul(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 3)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.mul(a, b), w)), [a, b]


def _check_neg(rng):
    a = _leaf(rng, 2, 3)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.neg(a), w)), [a]


def _check_pow_scalar(rng):
    base = T.Tensor(rng.uniform(0.5, 1.5, size=(2, 3)), requires_grad=True)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.pow_scalar(base, 1.7), w)), [base]


def _check_matmul(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 3, 4)
    w = _probe(rng, (2, 4))
    return lambda: T.tsum(T.mul(T.matmul(a, b), w)), [a, b]


def _check_matmul_batched(rng):
    a, b = _leaf(rng, 2, 3, 4), _leaf(rng, 2, 4, 2)
    w = _probe(rng, (2, 3, 2))
    return lambda: T.tsum(T.mul(T.matmul(a, b), w)), [a, b]


def _check_reshape(rng):
    a = _leaf(rng, 2, 6)
    w = _probe(rng, (3, 4))
    return lambda: T.tsum(T.mul(T.reshape(a, (3, 4)), w)), [a]


def _check_transpose(rng):
    a = _leaf(rng, 2, 3, 4)
    w = _probe(rng, (4, 2, 3))
    return lambda: T.tsum(T.mul(T.transpose(a, (2, 0, 1)), w)), [a]


def _check_concat(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 2)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.concat([a, b], axis=1), w)), [a, b]


def _check_stack(rng):
    a, b = _leaf(rng, 2, 3), _leaf(rng, 2, 3)
    w = _probe(rng, (2, 2, 3))
    return lambda: T.tsum(T.mul(T.stack([a, b], axis=0), w)), [a, b]


def _check_sum_axis(rng):
    a = _leaf(rng, 3, 4)
    w = _probe(rng, (4,))
    return lambda: T.tsum(T.mul(T.tsum(a, axis=0), w)), [a]


def _check_mean_axis(rng):
    a = _leaf(rng, 3, 4)
    w = _probe(rng, (3, 1))
    return lambda: T.tsum(T.mul(T.tmean(a, axis=1, keepdims=True), w)), [a]


def _check_gather_rows(rng):
    a = _leaf(rng, 4, 3)
    index = np.array([0, 2, 1, 2])
    w = _probe(rng, (4, 3))
    return lambda: T.tsum(T.mul(T.gather_rows(a, index), w)), [a]


def _check_linear(rng):
    x, w, b = _leaf(rng, 3, 4), _leaf(rng, 4, 2), _leaf(rng, 2)
    probe = _probe(rng, (3, 2))
    return lambda: T.tsum(T.mul(T.linear(x, w, b), probe)), [x, w, b]


# ---------------------------------------------------------------------------
# activations, normalization, losses


def _check_relu(rng):
    x = _kink_free(rng, 2, 5)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.relu(x), w)), [x]


def _check_leaky_relu(rng):
    x = _kink_free(rng, 2, 5)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.leaky_relu(x, 0.01), w)), [x]


def _check_gelu(rng):
    x = _leaf(rng, 2, 5)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.gelu(x), w)), [x]


def _check_tanh(rng):
    x = _leaf(rng, 2, 5)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.tanh(x), w)), [x]


def _check_reglu(rng):
    x = _kink_free(rng, 2, 6)
    w = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(T.reglu(x), w)), [x]


def _check_layer_norm(rng):
    x, g, b = _leaf(rng, 2, 5), _leaf(rng, 5), _leaf(rng, 5)
    w = _probe(rng, (2, 5))
    return lambda: T.tsum(T.mul(T.layer_norm(x, g, b), w)), [x, g, b]


def _check_dropout(rng):
    x = _leaf(rng, 3, 4)
    w = _probe(rng, (3, 4))
    seed = int(rng.integers(1 << 31))

    def loss():
        kept = T.dropout(x, 0.4, np.random.default_rng(seed), training=True)
        return T.tsum(T.mul(kept, w))

    return loss, [x]


def _check_softmax(rng):
    x = _leaf(rng, 3, 4)
    w = _probe(rng, (3, 4))
    return lambda: T.tsum(T.mul(T.softmax(x), w)), [x]


def _check_cross_entropy(rng):
    logits = _leaf(rng, 3, 3)
    labels = np.array([0, 2, 1])
    return lambda: T.cross_entropy(logits, labels), [logits]


def _check_mse_loss(rng):
    pred = _leaf(rng, 5)
    target = rng.normal(size=5)
    return lambda: T.mse_loss(pred, target), [pred]


# ---------------------------------------------------------------------------
# convolution


def _conv_inputs(rng, stride, padding):
    x = _leaf(rng, 1, 2, 5, 5)
    w = _leaf(rng, 3, 2, 3, 3)
    b = _leaf(rng, 3)
    out = T.conv2d(T.Tensor(x.data), T.Tensor(w.data), T.Tensor(b.data),
                   stride=stride, padding=padding)
    probe = _probe(rng, out.data.shape)
    return x, w, b, probe


def _check_conv2d(rng):
    x, w, b, probe = _conv_inputs(rng, 1, 0)
    return lambda: T.tsum(T.mul(T.conv2d(x, w, b, stride=1, padding=0), probe)), [x, w, b]


def _check_conv2d_strided(rng):
    x, w, b, probe = _conv_inputs(rng, 2, 1)
    return lambda: T.tsum(T.mul(T.conv2d(x, w, b, stride=2, padding=1), probe)), [x, w, b]


# ---------------------------------------------------------------------------
# graph ops


def _redraw(rng, make, ok, tries: int = 80):
    """Redraw a construction until its margin predicate holds."""
    for _ in range(tries):
        built = make(rng)
        if ok(built):
            return built
    raise RuntimeError("could not draw well-conditioned check inputs")


def _check_gcn_conv(rng):
    def make(r):
        adj = _graph_adj(r, 4)
        h = _leaf(r, 4, 3)
        w = _leaf(r, 3, 2)
        return adj, h, w

    def ok(built):
        adj, h, w = built
        from cellfuse.gnn import normalized_adjacency

        pre = normalized_adjacency(adj) @ h.data @ w.data
        return float(np.abs(pre).min()) > 1e-3

    adj, h, w = _redraw(rng, make, ok)
    probe = _probe(rng, (4, 2))
    return lambda: T.tsum(T.mul(gcn_conv(adj, h, w), probe)), [h, w]


def _check_gin_conv(rng):
    adj = _graph_adj(rng, 4)
    h = _leaf(rng, 4, 3)
    mlp = GinMlp(rng, 3, 2)
    probe = _probe(rng, (4, 2))
    loss = lambda: T.tsum(T.mul(gin_conv(adj, h, mlp, eps=0.3), probe))
    return loss, [h] + mlp.params


def _check_topk_pool(rng):
    def make(r):
        adj = _graph_adj(r, 4)
        h = T.Tensor(r.normal(size=(4, 3)) * np.array([[1.0], [2.0], [3.0], [4.0]]),
                     requires_grad=True)
        p = _leaf(r, 3)
        return adj, h, p

    def ok(built):
        adj, h, p = built
        scores = np.sort(h.data @ p.data / np.linalg.norm(p.data))
        return float(np.diff(scores).min()) > 1e-2

    adj, h, p = _redraw(rng, make, ok)
    probe = _probe(rng, (2, 3))

    def loss():
        kept, _, _ = topk_pool(h, adj, p, ratio=0.5)
        return T.tsum(T.mul(kept, probe))

    return loss, [h, p]


# ---------------------------------------------------------------------------
# composite blocks and branches


def _min_preact(tensors) -> float:
    return min(float(np.abs(t.data).min()) for t in tensors)


def _check_residual_block(rng):
    def make(r):
        h = T.Tensor(r.normal(size=(1, 2, 5, 5)))
        w = _leaf(r, 2, 2, 3, 3)
        b = _leaf(r, 2)
        return h, w, b

    def ok(built):
        h, w, b = built
        pre = T.conv2d(T.Tensor(h.data), T.Tensor(w.data), T.Tensor(b.data),
                       stride=1, padding=1)
        post = pre.data + h.data
        return min(float(np.abs(pre.data).min()), float(np.abs(post).min())) > 1e-3

    h, w, b = _redraw(rng, make, ok)
    probe = _probe(rng, (1, 2, 5, 5))
    return lambda: T.tsum(T.mul(residual_block(h, w, b), probe)), [w, b]


def _check_dense_block(rng):
    def make(r):
        h = T.Tensor(r.normal(size=(1, 2, 5, 5)))
        w = _leaf(r, 2, 2, 3, 3)
        b = _leaf(r, 2)
        return h, w, b

    def ok(built):
        h, w, b = built
        pre = T.conv2d(T.Tensor(h.data), T.Tensor(w.data), T.Tensor(b.data),
                       stride=1, padding=1)
        return float(np.abs(pre.data).min()) > 1e-3

    h, w, b = _redraw(rng, make, ok)
    probe = _probe(rng, (1, 2, 5, 5))
    return lambda: T.tsum(T.mul(dense_block([h], w, b), probe)), [w, b]


def _plain_cnn_margin(branch: CnnBranch, x: np.ndarray) -> float:
    """Smallest |pre-activation| across a plain backbone's rectified layers."""
    if branch.kind != "plain":
        raise ValueError("margin helper only covers the plain backbone")
    h = T.Tensor(np.asarray(x, dtype=np.float64))
    pre1 = T.conv2d(h, branch.stem[0], branch.stem[1], stride=2, padding=1)
    pre2 = T.conv2d(T.relu(pre1), branch.conv2[0], branch.conv2[1], stride=2, padding=1)
    return min(float(np.abs(pre1.data).min()), float(np.abs(pre2.data).min()))


def _gnn_margin(branch: GnnBranch, x: np.ndarray, adj: np.ndarray) -> float:
    """Smallest rectifier pre-activation / pooling score gap along embed_arrays."""
    from cellfuse.gnn import normalized_adjacency

    h = T.Tensor(np.asarray(x, dtype=np.float64))
    margin = np.inf
    for layer in range(2):
        if branch.kind == "gcn":
            pre = normalized_adjacency(adj) @ (h.data @ branch.conv_w[layer].data)
        else:
            pre = gin_conv(adj, h, branch.mlps[layer]).data
        margin = min(margin, float(np.abs(pre).min()))
        h = branch._conv(layer, adj, h)
        if branch.pool_p is not None:
            p = branch.pool_p[layer]
            scores = h.data @ p.data / np.linalg.norm(p.data)
            gaps = np.diff(np.sort(scores))
            if gaps.size:
                margin = min(margin, float(gaps.min()))
            h, adj, _ = topk_pool(h, adj, p, branch.ratio)
    return margin


def _check_cnn_embed(rng):
    def make(r):
        branch = CnnBranch(r, kind="plain", in_channels=1, width=2, d_out=3)
        x = r.normal(size=(2, 1, 8, 8))
        return branch, x

    def ok(built):
        branch, x = built
        return _plain_cnn_margin(branch, x) > 1e-3

    branch, x = _redraw(rng, make, ok)
    probe = _probe(rng, (2, 3))
    return lambda: T.tsum(T.mul(branch.image_embed(x), probe)), branch.params


def _check_gnn_embed(rng):
    def make(r):
        branch = GnnBranch(r, kind="gin", d_in=3, hidden=4, d_out=3, ratio=0.5)
        adj = _graph_adj(r, 4)
        x = r.normal(size=(4, 3))
        return branch, adj, x

    def ok(built):
        branch, adj, x = built
        return _gnn_margin(branch, x, adj) > 1e-3

    branch, adj, x = _redraw(rng, make, ok)
    probe = _probe(rng, (3,))
    return lambda: T.tsum(T.mul(branch.embed_arrays(x, adj), probe)), branch.params


def _check_mlp_block(rng):
    def make(r):
        block = MlpBlock(r, 4, 3, p_drop=0.3, activation="relu")
        x = T.Tensor(r.normal(size=(2, 4)))
        return block, x

    def ok(built):
        block, x = built
        pre = T.linear(T.Tensor(x.data), T.Tensor(block.w.data), T.Tensor(block.b.data))
        return float(np.abs(pre.data).min()) > 1e-3

    block, x = _redraw(rng, make, ok)
    probe = _probe(rng, (2, 3))
    seed = int(rng.integers(1 << 31))

    def loss():
        out = block(x, rng=np.random.default_rng(seed), training=True)
        return T.tsum(T.mul(out, probe))

    return loss, list(block.named_params().values())


def _trans_gate_margin(block: TransBlock, x: T.Tensor) -> float:
    h1 = T.add(x, block.attn(T.layer_norm(x, block.ln1_g, block.ln1_b)))
    ff_pre = T.linear(T.layer_norm(h1, block.ln2_g, block.ln2_b), block.ff_w, block.ff_b)
    gate = ff_pre.data[..., ff_pre.data.shape[-1] // 2 :]
    return float(np.abs(gate).min())


def _check_trans_block(rng):
    def make(r):
        block = TransBlock(r, d=4, heads=2, p_drop=0.2)
        x = T.Tensor(r.normal(size=(1, 3, 4)))
        return block, x

    def ok(built):
        block, x = built
        return _trans_gate_margin(block, x) > 1e-3

    block, x = _redraw(rng, make, ok)
    probe = _probe(rng, (1, 3, 4))
    seed = int(rng.integers(1 << 31))

    def loss():
        out = block(x, rng=np.random.default_rng(seed), training=True)
        return T.tsum(T.mul(out, probe))

    return loss, list(block.named_params().values())


# ---------------------------------------------------------------------------
# full model, both fusion schemes


def _tiny_model(rng, mode: str) -> FusionModel:
    image = CnnBranch(rng, kind="plain", in_channels=1, width=2, d_out=3)
    graph = GnnBranch(rng, kind="gin", d_in=5, hidden=4, d_out=3, ratio=0.5)
    cfg = FusionConfig(mode=mode, n_blocks=1, alignment="minimization",
                       mlp_embed=4, heads=1, dropout=0.0, activation="relu")
    return FusionModel(rng, [image], [graph], cfg, n_out=2)


def _branch_reps(model: FusionModel, images, graphs):
    rep_i = model.image_branches[0].image_embed(images)
    rep_g = T.stack([model.graph_branches[0].graph_embed(g) for g in graphs], axis=0)
    return rep_i, rep_g


def _model_margin(model: FusionModel, images, graphs) -> float:
    """Smallest rectifier / pooling margin along the full forward pass."""
    margin = _plain_cnn_margin(model.image_branches[0], images)
    branch = model.graph_branches[0]
    for g in graphs:
        margin = min(margin, _gnn_margin(branch, g.x, g.dense_adjacency()))
    rep_i, rep_g = _branch_reps(model, images, graphs)
    if model.cfg.mode == "mlp":
        h = T.concat([rep_i, rep_g], axis=-1)
        for block in model.fusion.blocks:
            pre = T.linear(h, block.w, block.b)
            margin = min(margin, float(np.abs(pre.data).min()))
            h = block(h, rng=None, training=False)
    else:
        tokens = [align(rep) for align, rep in zip(model.fusion.aligns, (rep_i, rep_g))]
        h = T.stack(tokens, axis=1)
        for block in model.fusion.blocks:
            margin = min(margin, _trans_gate_margin(block, h))
            h = block(h, rng=None, training=False)
    return margin


def _check_fusion_model(rng, mode: str):
    def make(r):
        model = _tiny_model(r, mode)
        images = r.normal(size=(2, 1, 8, 8))
        graphs = [_ArrayGraph(r.normal(size=(3, 5)), _graph_adj(r, 3)) for _ in range(2)]
        return model, images, graphs

    def ok(built):
        model, images, graphs = built
        return _model_margin(model, images, graphs) > 1e-3

    model, images, graphs = _redraw(rng, make, ok)
    labels = np.array([0, 1])

    def loss():
        logits = model.forward(images, graphs, rng=None, training=False)
        return T.cross_entropy(logits, labels)

    return loss, model.params


def _check_fusion_model_mlp(rng):
    return _check_fusion_model(rng, "mlp")


def _check_fusion_model_transformer(rng):
    return _check_fusion_model(rng, "transformer")


# ---------------------------------------------------------------------------
# registry and driver


CHECKS = {
    "add": _check_add,
    "sub": _check_sub,
    "mul": _check_mul,
    "neg": _check_neg,
    "pow_scalar": _check_pow_scalar,
    "matmul": _check_matmul,
    "matmul_batched": _check_matmul_batched,
    "reshape": _check_reshape,
    "transpose": _check_transpose,
    "concat": _check_concat,
    "stack": _check_stack,
    "sum_axis": _check_sum_axis,
    "mean_axis": _check_mean_axis,
    "gather_rows": _check_gather_rows,
    "linear": _check_linear,
    "relu": _check_relu,
    "leaky_relu": _check_leaky_relu,
    "gelu": _check_gelu,
    "tanh": _check_tanh,
    "reglu": _check_reglu,
    "layer_norm": _check_layer_norm,
    "dropout": _check_dropout,
    "softmax": _check_softmax,
    "cross_entropy": _check_cross_entropy,
    "mse_loss": _check_mse_loss,
    "conv2d": _check_conv2d,
    "conv2d_strided": _check_conv2d_strided,
    "gcn_conv": _check_gcn_conv,
    "gin_conv": _check_gin_conv,
    "topk_pool": _check_topk_pool,
    "residual_block": _check_residual_block,
    "dense_block": _check_dense_block,
    "cnn_embed": _check_cnn_embed,
    "gnn_embed": _check_gnn_embed,
    "mlp_block": _check_mlp_block,
    "trans_block": _check_trans_block,
    "fusion_model_mlp": _check_fusion_model_mlp,
    "fusion_model_transformer": _check_fusion_model_transformer,
}


def broken_linear_check(rng):
    """Negative control: a linear map whose weight gradient is doubled.

    Wrong on purpose.  Run it through the harness to confirm that an
    incorrect derivative is reported as a failure.
    """
    x = rng.normal(size=(3, 4))
    w = _leaf(rng, 4, 2)
    probe = _probe(rng, (3, 2))

    def loss():
        out_data = x @ w.data

        def backward(g):
            T._accumulate(w, 2.0 * (x.T @ g))

        out = T._node(out_data, (w,), backward)
        return T.tsum(T.mul(out, probe))

    return loss, [w]


@dataclass(frozen=True)
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_err < self.tol


def run_suite(seeds=DEFAULT_SEEDS, checks=None, tol: float = DEFAULT_TOL):
    """Run every check across the seeds; returns one result per check."""
    if checks is None:
        checks = CHECKS
    results = []
    for name, build in checks.items():
        worst = 0.0
        for seed in seeds:
            rng = np.random.default_rng(seed)
            loss_fn, leaves = build(rng)
            worst = max(worst, fd_max_rel_err(loss_fn, leaves))
        results.append(CheckResult(name, worst, tol))
    return results


def format_report(results) -> str:
    width = max(len(r.name) for r in results)
    lines = [
        f"{r.name:<{width}}  max_rel_err {r.max_rel_err:.3e}  tol {r.tol:.0e}  "
        + ("PASS" if r.passed else "FAIL")
        for r in results
    ]
    n_fail = sum(not r.passed for r in results)
    lines.append(
        f"{len(results)} checks, {len(results) - n_fail} passed, {n_fail} failed"
    )
    return "\n".join(lines)
