"""Graph branch: GCN and GIN convolutions, TopK pooling, mean readout.

Edge weights participate everywhere they appear: the GCN normalizes the
weighted self-looped adjacency, the GIN aggregates weighted neighbor sums,
and pooling induces the weighted subgraph on the kept nodes.  The adjacency
itself is a constant of the forward pass; gradients flow through node
features and every learnable parameter, not through graph structure.
"""

from __future__ import annotations

import numpy as np

from cellfuse import tensor as T
from cellfuse.tensor import Tensor

D_GRAPH_DEFAULT = 16
HIDDEN_DEFAULT = 128
RATIO_DEFAULT = 0.5


def normalized_adjacency(adj: np.ndarray) -> np.ndarray:
    """Symmetric renormalization with unit self-loops."""
    adj = np.asarray(adj, dtype=np.float64)
    n = adj.shape[0]
    a_hat = adj + np.eye(n)
    inv_sqrt = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_conv(adj: np.ndarray, h, weight) -> Tensor:
    """ReLU of the renormalized-adjacency graph convolution.

    Node features may be (N, F) or a fixed-topology batch (B, N, F).
    """
    h = h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float64))
    if h.shape[-1] != weight.shape[0]:
        raise ValueError(
            f"width mismatch: features {h.shape[-1]}, weight expects {weight.shape[0]}"
        )
    a_hat = Tensor(normalized_adjacency(adj))
    return T.relu(T.matmul(T.matmul(a_hat, h), weight))


def gin_conv(adj: np.ndarray, h, mlp, eps: float = 0.0) -> Tensor:
    """MLP((1 + eps) * h_i + sum_j w_ij h_j); the MLP is any callable."""
    h = h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float64))
    a = Tensor(np.asarray(adj, dtype=np.float64))
    if a.shape[-1] != h.shape[-2]:
        raise ValueError(
            f"width mismatch: adjacency {a.shape}, features {h.shape}"
        )
    agg = T.add(T.mul(h, 1.0 + eps), T.matmul(a, h))
    return mlp(agg)


def topk_pool(h, adj: np.ndarray, p, ratio: float):
    """Keep the ceil(ratio * N) highest-scoring nodes, tanh-gated.

    Scores are the projection of each node's features on p, normalized by
    ||p||; score ties keep the lower node index.  Returns the gated kept
    features, the induced adjacency, and the kept indices.
    """
    if not 0.0 < ratio <= 1.0:
        raise ValueError(f"pooling ratio must be in (0, 1], got {ratio}")
    h = h if isinstance(h, Tensor) else Tensor(np.asarray(h, dtype=np.float64))
    n = h.shape[0]
    if n == 0:
        raise ValueError("cannot pool an empty graph")
    norm_sq = T.tsum(T.mul(p, p))
    if norm_sq.data == 0.0:
        raise ValueError("projection vector must be nonzero")
    scores = T.mul(
        T.matmul(h, T.reshape(p, (-1, 1))), T.pow_scalar(norm_sq, -0.5)
    )
    y = scores.data[:, 0]
    k = int(np.ceil(ratio * n))
    order = np.argsort(-y, kind="stable")
    kept = np.sort(order[:k])
    gated = T.mul(h, T.tanh(scores))
    h_out = T.gather_rows(gated, kept)
    adj_out = np.asarray(adj, dtype=np.float64)[np.ix_(kept, kept)]
    return h_out, adj_out, kept


class GinMlp:
    """One-hidden-layer MLP (gelu) used inside a GIN layer."""

    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int):
        self.w1 = T.init_param(rng, (d_in, d_out))
        self.b1 = T.zeros_param((d_out,))
        self.w2 = T.init_param(rng, (d_out, d_out))
        self.b2 = T.zeros_param((d_out,))

    def __call__(self, x) -> Tensor:
        return T.linear(T.gelu(T.linear(x, self.w1, self.b1)), self.w2, self.b2)

    @property
    def params(self):
        return [self.w1, self.b1, self.w2, self.b2]


class GnnBranch:
    """Two graph convolutions, each followed by TopK pooling, then readout.

    conv -> pool -> conv -> pool -> mean over kept nodes -> alignment linear.
    ratio=None drops the pooling stages entirely, which also unlocks the
    fixed-topology batched path (embed_batch).
    """

    def __init__(
        self,
        rng: np.random.Generator,
        kind: str = "gcn",
        d_in: int = 94,
        hidden: int = HIDDEN_DEFAULT,
        d_out: int = D_GRAPH_DEFAULT,
        ratio: float | None = RATIO_DEFAULT,
    ):
        if kind not in ("gcn", "gin"):
            raise ValueError(f"unknown GNN kind {kind!r}")
        if ratio is not None and not 0.0 < ratio <= 1.0:
            raise ValueError(f"pooling ratio must be in (0, 1], got {ratio}")
        self.kind = kind
        self.d_in = d_in
        self.hidden = hidden
        self.d_out = d_out
        self.ratio = ratio
        if kind == "gcn":
            self.conv_w = [
                T.init_param(rng, (d_in, hidden)),
                T.init_param(rng, (hidden, hidden)),
            ]
            self.mlps = None
        else:
            self.mlps = [GinMlp(rng, d_in, hidden), GinMlp(rng, hidden, hidden)]
            self.conv_w = None
        if ratio is None:
            self.pool_p = None
        else:
            self.pool_p = [
                T.init_param(rng, (hidden,)),
                T.init_param(rng, (hidden,)),
            ]
        self.align_w = T.init_param(rng, (hidden, d_out))
        self.align_b = T.zeros_param((d_out,))

    def named_params(self):
        out = {}
        if self.kind == "gcn":
            for i, w in enumerate(self.conv_w):
                out[f"conv{i}.w"] = w
        else:
            for i, mlp in enumerate(self.mlps):
                out[f"conv{i}.w1"] = mlp.w1
                out[f"conv{i}.b1"] = mlp.b1
                out[f"conv{i}.w2"] = mlp.w2
                out[f"conv{i}.b2"] = mlp.b2
        if self.pool_p is not None:
            for i, p in enumerate(self.pool_p):
                out[f"pool{i}.p"] = p
        out["align.w"] = self.align_w
        out["align.b"] = self.align_b
        return out

    @property
    def params(self):
        return list(self.named_params().values())

    def _conv(self, layer: int, adj: np.ndarray, h) -> Tensor:
        if self.kind == "gcn":
            return gcn_conv(adj, h, self.conv_w[layer])
        return T.relu(gin_conv(adj, h, self.mlps[layer]))

    def embed_arrays(self, x, adj: np.ndarray) -> Tensor:
        """H_G for raw (features, adjacency); x may be a Tensor for grad flow."""
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        if h.shape[0] < 1:
            raise ValueError("cannot embed an empty graph")
        if h.shape[1] != self.d_in:
            raise ValueError(
                f"width mismatch: graph features {h.shape[1]}, branch expects {self.d_in}"
            )
        h = self._conv(0, adj, h)
        if self.pool_p is not None:
            h, adj, _ = topk_pool(h, adj, self.pool_p[0], self.ratio)
        h = self._conv(1, adj, h)
        if self.pool_p is not None:
            h, adj, _ = topk_pool(h, adj, self.pool_p[1], self.ratio)
        pooled = T.tmean(h, axis=0, keepdims=True)
        out = T.linear(pooled, self.align_w, self.align_b)
        return T.reshape(out, (self.d_out,))

    def embed_batch(self, x, adj: np.ndarray) -> Tensor:
        """(B, N, F) batch sharing one adjacency; needs the no-pooling mode."""
        if self.pool_p is not None:
            raise ValueError("batched embedding requires ratio=None (no pooling)")
        h = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        if h.ndim != 3 or h.shape[-1] != self.d_in:
            raise ValueError(
                f"expected (B, N, {self.d_in}) batch, got {h.shape}"
            )
        h = self._conv(0, adj, h)
        h = self._conv(1, adj, h)
        pooled = T.tmean(h, axis=1)
        return T.linear(pooled, self.align_w, self.align_b)

    def graph_embed(self, graph) -> Tensor:
        return self.embed_arrays(graph.x, graph.dense_adjacency())


def graph_embed(graph, branch: GnnBranch) -> Tensor:
    return branch.graph_embed(graph)
