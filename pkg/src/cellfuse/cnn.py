"""Image branch: small convolutional encoders built from three block styles.

Every backbone ends in global average pooling and a fully-connected map to
d_I, and none of them uses batch statistics, so a sample's embedding never
depends on what else shares its batch.  Downsampling is stride-2 convolution
rather than pooling layers.
"""

from __future__ import annotations

import numpy as np

from cellfuse import tensor as T
from cellfuse.tensor import Tensor

D_IMAGE_DEFAULT = 64
KINDS = ("plain", "residual", "dense")


def _conv_param(rng, f, c, k):
    w = T.init_param(rng, (f, c, k, k), fan_in=c * k * k)
    b = T.zeros_param((f,))
    return w, b


def residual_block(h, w, b) -> Tensor:
    """ReLU(Conv(H) + H); the convolution must preserve the feature shape."""
    f, c, kh, kw = w.shape
    if f != c:
        raise ValueError(
            f"residual conv must preserve channels, got {c} -> {f}"
        )
    if kh != kw or kh % 2 == 0:
        raise ValueError("residual conv needs a square odd kernel")
    y = T.conv2d(h, w, b, stride=1, padding=kh // 2)
    return T.relu(T.add(y, h))


def dense_block(h_list, w, b) -> Tensor:
    """ReLU(Conv(concat of all previous feature maps along channels))."""
    if not h_list:
        raise ValueError("dense block needs at least one input")
    spatial = h_list[0].shape[2:]
    for h in h_list[1:]:
        if h.shape[2:] != spatial:
            raise ValueError(
                f"dense block inputs must share spatial extent, got {h.shape[2:]} vs {spatial}"
            )
    hc = h_list[0] if len(h_list) == 1 else T.concat(h_list, axis=1)
    kh = w.shape[2]
    return T.relu(T.conv2d(hc, w, b, stride=1, padding=kh // 2))


class CnnBranch:
    """plain / residual / dense backbone -> global average pool -> linear."""

    def __init__(
        self,
        rng: np.random.Generator,
        kind: str = "plain",
        in_channels: int = 1,
        width: int = 8,
        d_out: int = D_IMAGE_DEFAULT,
    ):
        if kind not in KINDS:
            raise ValueError(f"unknown CNN kind {kind!r}, expected one of {KINDS}")
        self.kind = kind
        self.in_channels = in_channels
        self.width = width
        self.d_out = d_out
        w = width
        if kind == "plain":
            self.stem = _conv_param(rng, w, in_channels, 3)
            self.conv2 = _conv_param(rng, 2 * w, w, 3)
            feat = 2 * w
        elif kind == "residual":
            self.stem = _conv_param(rng, w, in_channels, 3)
            self.block1 = _conv_param(rng, w, w, 3)
            self.block2 = _conv_param(rng, w, w, 3)
            feat = w
        else:
            self.stem = _conv_param(rng, w, in_channels, 3)
            self.block1 = _conv_param(rng, w, w, 3)
            self.block2 = _conv_param(rng, w, 2 * w, 3)
            feat = 3 * w
        self.fc_w = T.init_param(rng, (feat, d_out))
        self.fc_b = T.zeros_param((d_out,))

    def named_params(self):
        out = {"fc.w": self.fc_w, "fc.b": self.fc_b}
        out["stem.w"], out["stem.b"] = self.stem
        if self.kind == "plain":
            out["conv2.w"], out["conv2.b"] = self.conv2
        else:
            out["block1.w"], out["block1.b"] = self.block1
            out["block2.w"], out["block2.b"] = self.block2
        return out

    @property
    def params(self):
        return list(self.named_params().values())

    def _backbone(self, x: Tensor) -> Tensor:
        h = T.relu(T.conv2d(x, self.stem[0], self.stem[1], stride=2, padding=1))
        if self.kind == "plain":
            h = T.relu(T.conv2d(h, self.conv2[0], self.conv2[1], stride=2, padding=1))
        elif self.kind == "residual":
            h = residual_block(h, *self.block1)
            h = residual_block(h, *self.block2)
        else:
            h1 = h
            h2 = dense_block([h1], *self.block1)
            h3 = dense_block([h1, h2], *self.block2)
            h = T.concat([h1, h2, h3], axis=1)
        return h

    def image_embed(self, x) -> Tensor:
        """H_I for one (C,H,W) image or a (B,C,H,W) batch."""
        t = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
        single = t.ndim == 3
        if single:
            t = T.reshape(t, (1,) + t.shape)
        if t.ndim != 4 or t.shape[1] != self.in_channels:
            raise ValueError(
                f"expected (B,{self.in_channels},H,W) input, got {t.shape}"
            )
        h = self._backbone(t)
        pooled = T.tmean(h, axis=(2, 3))
        out = T.linear(pooled, self.fc_w, self.fc_b)
        if single:
            out = T.reshape(out, (self.d_out,))
        return out


def image_embed(x, branch: CnnBranch) -> Tensor:
    return branch.image_embed(x)
