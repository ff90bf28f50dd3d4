"""Learnable fusion of image and graph embeddings, plus the prediction head.

Two schemes.  The MLP scheme concatenates branch outputs at their native
widths and pushes them through Dropout(activation(Linear)) blocks.  The
transformer scheme first aligns every branch to a common width d, stacks the
results as tokens, applies PreNorm residual blocks (attention, then a ReGLU
feed-forward), and mean-pools the tokens.  Either way a final linear head
maps the fused vector to logits (2 classes) or a scalar (regression).

All forwards accept a single vector per branch or a batch with one leading
axis; dropout is live only in training mode with an explicit rng.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from cellfuse import tensor as T
from cellfuse.tensor import Tensor

MLP_EMBED_DEFAULT = 128
TRANS_EMBED_DEFAULT = 192
HEADS_DEFAULT = 4
DROPOUT_DEFAULT = 0.1

ALIGN_STRATEGIES = ("minimization", "maximization", "predefined")
_ACTIVATIONS = {"relu": T.relu, "leaky_relu": T.leaky_relu}


@dataclass(frozen=True)
class FusionConfig:
    mode: str = "mlp"  # {mlp, transformer}
    n_blocks: int = 1
    alignment: str = "minimization"
    predefined_dim: int = TRANS_EMBED_DEFAULT
    mlp_embed: int = MLP_EMBED_DEFAULT
    heads: int = HEADS_DEFAULT
    dropout: float = DROPOUT_DEFAULT
    activation: str = "relu"

    def __post_init__(self):
        if self.mode not in ("mlp", "transformer"):
            raise ValueError(f"unknown fusion mode {self.mode!r}")
        if self.n_blocks < 1:
            raise ValueError("n_blocks must be positive")
        if self.alignment not in ALIGN_STRATEGIES:
            raise ValueError(f"unknown alignment strategy {self.alignment!r}")
        if self.predefined_dim < 1:
            raise ValueError("predefined alignment width must be positive")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")


def choose_alignment_dim(dims, strategy: str, predefined: int | None = None) -> int:
    if not dims:
        raise ValueError("alignment needs at least one input width")
    if strategy == "minimization":
        return int(min(dims))
    if strategy == "maximization":
        return int(max(dims))
    if strategy == "predefined":
        if predefined is None or predefined < 1:
            raise ValueError("predefined alignment needs a positive width")
        return int(predefined)
    raise ValueError(f"unknown alignment strategy {strategy!r}")


class AlignLayer:
    """Learnable linear map to the common fusion width."""

    def __init__(self, rng, d_in: int, d_out: int):
        self.w = T.init_param(rng, (d_in, d_out))
        self.b = T.zeros_param((d_out,))

    def __call__(self, h) -> Tensor:
        return T.linear(h, self.w, self.b)

    def named_params(self):
        return {"w": self.w, "b": self.b}


class MlpBlock:
    """Dropout(activation(Linear(H)))."""

    def __init__(self, rng, d_in: int, d_out: int, p_drop: float, activation: str):
        self.w = T.init_param(rng, (d_in, d_out))
        self.b = T.zeros_param((d_out,))
        self.p_drop = p_drop
        self.act = _ACTIVATIONS[activation]

    def __call__(self, h, rng=None, training: bool = False) -> Tensor:
        out = self.act(T.linear(h, self.w, self.b))
        return T.dropout(out, self.p_drop, rng, training)

    def named_params(self):
        return {"w": self.w, "b": self.b}


class Mhsa:
    """Multi-head self-attention over (..., T, d) token stacks."""

    def __init__(self, rng, d: int, heads: int):
        if d % heads != 0:
            raise ValueError(f"width {d} not divisible by {heads} heads")
        self.d = d
        self.heads = heads
        self.d_head = d // heads
        self.wq = T.init_param(rng, (d, d))
        self.wk = T.init_param(rng, (d, d))
        self.wv = T.init_param(rng, (d, d))
        self.wo = T.init_param(rng, (d, d))
        self.bq = T.zeros_param((d,))
        self.bk = T.zeros_param((d,))
        self.bv = T.zeros_param((d,))
        self.bo = T.zeros_param((d,))

    def _split(self, t, batch, n_tok):
        # (B, T, d) -> (B, heads, T, d_head)
        t = T.reshape(t, (batch, n_tok, self.heads, self.d_head))
        return T.transpose(t, (0, 2, 1, 3))

    def __call__(self, h) -> Tensor:
        single = h.ndim == 2
        if single:
            h = T.reshape(h, (1,) + h.shape)
        batch, n_tok, d = h.shape
        if d != self.d:
            raise ValueError(f"token width {d} does not match attention width {self.d}")
        q = self._split(T.linear(h, self.wq, self.bq), batch, n_tok)
        k = self._split(T.linear(h, self.wk, self.bk), batch, n_tok)
        v = self._split(T.linear(h, self.wv, self.bv), batch, n_tok)
        scores = T.mul(
            T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(self.d_head)
        )
        attn = T.softmax(scores)
        mixed = T.matmul(attn, v)  # (B, heads, T, d_head)
        mixed = T.transpose(mixed, (0, 2, 1, 3))
        mixed = T.reshape(mixed, (batch, n_tok, self.d))
        out = T.linear(mixed, self.wo, self.bo)
        if single:
            out = T.reshape(out, (n_tok, self.d))
        return out

    def named_params(self):
        return {
            "wq": self.wq, "bq": self.bq,
            "wk": self.wk, "bk": self.bk,
            "wv": self.wv, "bv": self.bv,
            "wo": self.wo, "bo": self.bo,
        }


class TransBlock:
    """PreNorm residual pair: attention, then a ReGLU feed-forward.

    H1 = H + MHSA(LN(H)); out = H1 + Dropout(ReGLU(Linear_{d->2d}(LN(H1)))).
    """

    def __init__(self, rng, d: int, heads: int, p_drop: float):
        self.attn = Mhsa(rng, d, heads)
        self.ln1_g = Tensor(np.ones(d), requires_grad=True)
        self.ln1_b = T.zeros_param((d,))
        self.ln2_g = Tensor(np.ones(d), requires_grad=True)
        self.ln2_b = T.zeros_param((d,))
        self.ff_w = T.init_param(rng, (d, 2 * d))
        self.ff_b = T.zeros_param((2 * d,))
        self.p_drop = p_drop

    def __call__(self, h, rng=None, training: bool = False) -> Tensor:
        h1 = T.add(h, self.attn(T.layer_norm(h, self.ln1_g, self.ln1_b)))
        ff = T.reglu(T.linear(T.layer_norm(h1, self.ln2_g, self.ln2_b), self.ff_w, self.ff_b))
        return T.add(h1, T.dropout(ff, self.p_drop, rng, training))

    def named_params(self):
        out = {f"attn.{k}": v for k, v in self.attn.named_params().items()}
        out.update(
            {
                "ln1.g": self.ln1_g, "ln1.b": self.ln1_b,
                "ln2.g": self.ln2_g, "ln2.b": self.ln2_b,
                "ff.w": self.ff_w, "ff.b": self.ff_b,
            }
        )
        return out


def _as_batched(t):
    """Promote a 1-D representation vector to a (1, d) batch."""
    if t.ndim == 1:
        return T.reshape(t, (1, t.shape[0])), True
    return t, False


class MlpFusion:
    """Eq.-style concat fusion: H_c = concat(inputs), then MLP blocks."""

    def __init__(self, rng, input_dims, cfg: FusionConfig):
        if not input_dims:
            raise ValueError("fusion needs at least one input representation")
        self.input_dims = tuple(int(d) for d in input_dims)
        self.cfg = cfg
        self.blocks = []
        d = sum(self.input_dims)
        self.concat_dim = d
        for _ in range(cfg.n_blocks):
            self.blocks.append(MlpBlock(rng, d, cfg.mlp_embed, cfg.dropout, cfg.activation))
            d = cfg.mlp_embed
        self.out_dim = d

    def __call__(self, reps, rng=None, training: bool = False) -> Tensor:
        if len(reps) != len(self.input_dims):
            raise ValueError(
                f"expected {len(self.input_dims)} representations, got {len(reps)}"
            )
        pairs = [_as_batched(r) for r in reps]
        single = all(was for _, was in pairs)
        reps = [r for r, _ in pairs]
        h = reps[0] if len(reps) == 1 else T.concat(reps, axis=-1)
        for block in self.blocks:
            h = block(h, rng, training)
        return T.reshape(h, (self.out_dim,)) if single else h

    def named_params(self):
        out = {}
        for i, block in enumerate(self.blocks):
            for k, v in block.named_params().items():
                out[f"block{i}.{k}"] = v
        return out


class TransformerFusion:
    """Align -> stack tokens -> TransBlocks -> mean pool."""

    def __init__(self, rng, input_dims, cfg: FusionConfig):
        if not input_dims:
            raise ValueError("fusion needs at least one input representation")
        self.input_dims = tuple(int(d) for d in input_dims)
        self.cfg = cfg
        self.d = choose_alignment_dim(
            self.input_dims, cfg.alignment, cfg.predefined_dim
        )
        if self.d % cfg.heads != 0:
            raise ValueError(
                f"aligned width {self.d} not divisible by {cfg.heads} heads"
            )
        self.aligns = [AlignLayer(rng, din, self.d) for din in self.input_dims]
        self.blocks = [
            TransBlock(rng, self.d, cfg.heads, cfg.dropout)
            for _ in range(cfg.n_blocks)
        ]
        self.out_dim = self.d

    def __call__(self, reps, rng=None, training: bool = False) -> Tensor:
        if len(reps) != len(self.input_dims):
            raise ValueError(
                f"expected {len(self.input_dims)} representations, got {len(reps)}"
            )
        pairs = [_as_batched(r) for r in reps]
        single = all(was for _, was in pairs)
        tokens = [align(r) for align, (r, _) in zip(self.aligns, pairs)]
        h = T.stack(tokens, axis=1)  # (B, k, d)
        for block in self.blocks:
            h = block(h, rng, training)
        pooled = T.tmean(h, axis=1)  # (B, d)
        return T.reshape(pooled, (self.d,)) if single else pooled

    def named_params(self):
        out = {}
        for i, align in enumerate(self.aligns):
            for k, v in align.named_params().items():
                out[f"align{i}.{k}"] = v
        for i, block in enumerate(self.blocks):
            for k, v in block.named_params().items():
                out[f"block{i}.{k}"] = v
        return out


def mlp_fuse(image_reps, graph_reps, fusion: MlpFusion, rng=None, training=False):
    return fusion(list(image_reps) + list(graph_reps), rng, training)


def transformer_fuse(image_reps, graph_reps, fusion: TransformerFusion, rng=None, training=False):
    return fusion(list(image_reps) + list(graph_reps), rng, training)


class PredictHead:
    """ŷ = Linear(H_o): two logits for classification, one for regression."""

    def __init__(self, rng, d_in: int, n_out: int = 2):
        if n_out < 1:
            raise ValueError("head needs at least one output")
        self.w = T.init_param(rng, (d_in, n_out))
        self.b = T.zeros_param((n_out,))
        self.d_in = d_in

    def __call__(self, h) -> Tensor:
        if h.shape[-1] != self.d_in:
            raise ValueError(
                f"width mismatch: fused {h.shape[-1]}, head expects {self.d_in}"
            )
        return T.linear(h, self.w, self.b)

    def named_params(self):
        return {"w": self.w, "b": self.b}


def predict(h_o, head: PredictHead) -> Tensor:
    return head(h_o)


class FusionModel:
    """One or more image branches + graph branches, fused, with a head."""

    def __init__(self, rng, image_branches, graph_branches, cfg: FusionConfig, n_out: int = 2):
        self.image_branches = list(image_branches)
        self.graph_branches = list(graph_branches)
        if not self.image_branches and not self.graph_branches:
            raise ValueError("model needs at least one branch")
        dims = [b.d_out for b in self.image_branches] + [
            b.d_out for b in self.graph_branches
        ]
        self.cfg = cfg
        if cfg.mode == "mlp":
            self.fusion = MlpFusion(rng, dims, cfg)
        else:
            self.fusion = TransformerFusion(rng, dims, cfg)
        self.head = PredictHead(rng, self.fusion.out_dim, n_out)

    def forward(self, images, graphs, rng=None, training: bool = False) -> Tensor:
        """images: (B,C,H,W) array or None; graphs: list of CellGraph or None."""
        reps = []
        for branch in self.image_branches:
            reps.append(branch.image_embed(images))
        for branch in self.graph_branches:
            embeds = [branch.graph_embed(g) for g in graphs]
            reps.append(T.stack(embeds, axis=0))
        fused = self.fusion(reps, rng, training)
        return self.head(fused)

    def named_params(self):
        out = {}
        for i, b in enumerate(self.image_branches):
            for k, v in b.named_params().items():
                out[f"image{i}.{k}"] = v
        for i, b in enumerate(self.graph_branches):
            for k, v in b.named_params().items():
                out[f"graph{i}.{k}"] = v
        for k, v in self.fusion.named_params().items():
            out[f"fusion.{k}"] = v
        for k, v in self.head.named_params().items():
            out[f"head.{k}"] = v
        return out

    @property
    def params(self):
        return list(self.named_params().values())
