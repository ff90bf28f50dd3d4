"""Reverse-mode automatic differentiation over float64 numpy arrays.

A ``Tensor`` wraps an ``np.ndarray`` (always float64) and, when produced by
one of the ops below, remembers its inputs and a backward closure.  Calling
``backward()`` on a scalar loss walks the recorded graph in reverse
topological order and accumulates ``d loss / d leaf`` into each leaf's
``.grad`` buffer.  Gradients accumulate across calls until ``zero_grad``.

Design constraints the ops obey:

* ops never mutate their inputs' ``.data``;
* an output's gradient buffer always matches its data shape (broadcasting
  is undone by summation when gradients flow back);
* graph recording is skipped entirely when no input participates in
  differentiation, or inside a ``no_grad()`` block.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np
from scipy.special import erf

from cellfuse import kernels

__all__ = [
    "Tensor",
    "no_grad",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "reshape",
    "transpose",
    "concat",
    "stack",
    "tsum",
    "tmean",
    "gather_rows",
    "linear",
    "relu",
    "leaky_relu",
    "gelu",
    "reglu",
    "tanh",
    "layer_norm",
    "dropout",
    "softmax",
    "cross_entropy",
    "mse_loss",
    "conv2d",
    "zero_grad",
    "init_param",
    "zeros_param",
]

_GRAD_ENABLED = True

_INV_SQRT2 = 1.0 / np.sqrt(2.0)
_INV_SQRT2PI = 1.0 / np.sqrt(2.0 * np.pi)


@contextmanager
def no_grad():
    """Disable graph recording inside the block (forward values unchanged)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """Float64 array with an optional gradient buffer and graph linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = np.zeros_like(self.data) if self.requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- bookkeeping --------------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def _live(self) -> bool:
        """Whether gradient flows through this node."""
        return self.requires_grad or self._backward is not None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _scalar_err(self)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every participating leaf's .grad.

        ``self`` must hold exactly one element.  Calling backward twice on
        the same recorded graph adds the gradients twice; use ``zero_grad``
        between optimization steps.
        """
        if self.data.size != 1:
            raise ValueError(
                f"backward() requires a scalar, got shape {self.data.shape}"
            )
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, emitted = stack.pop()
            if emitted:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in seen and parent._live():
                    stack.append((parent, False))
        # non-leaf grads are scratch space for this walk; only leaves keep
        # accumulating across calls
        for node in order:
            if node._backward is not None:
                node.grad = None
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) != 1 else shape[0])

    def transpose(self, axes=None):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)

    def __repr__(self) -> str:
        grad = "grad" if self.requires_grad else "nograd"
        return f"Tensor(shape={self.data.shape}, {grad})"


def _scalar_err(t: Tensor):
    raise ValueError(f"item() requires a single-element tensor, got {t.shape}")


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t._live():
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p._live() for p in parents):
        out._parents = parents
        out._backward = backward
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to `shape`, undoing numpy broadcasting."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# arithmetic


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _node(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))

    return _node(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _node(a.data * b.data, (a, b), backward)


def neg(a) -> Tensor:
    a = _wrap(a)

    def backward(g):
        _accumulate(a, -g)

    return _node(-a.data, (a,), backward)


def pow_scalar(a, exponent: float) -> Tensor:
    """Elementwise a**exponent for a fixed (non-learnable) exponent."""
    a = _wrap(a)

    def backward(g):
        _accumulate(a, g * exponent * a.data ** (exponent - 1.0))

    return _node(a.data**exponent, (a,), backward)


def matmul(a, b) -> Tensor:
    """Matrix product with numpy stack broadcasting; operands must be >= 2-D."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have at least 2 dimensions")

    def backward(g):
        _accumulate(a, _unbroadcast(g @ np.swapaxes(b.data, -1, -2), a.data.shape))
        _accumulate(b, _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.data.shape))

    return _node(a.data @ b.data, (a, b), backward)


# ---------------------------------------------------------------------------
# shape ops


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    in_shape = a.data.shape

    def backward(g):
        _accumulate(a, g.reshape(in_shape))

    return _node(a.data.reshape(shape), (a,), backward)


def transpose(a, axes=None) -> Tensor:
    a = _wrap(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    inverse = np.argsort(axes)

    def backward(g):
        _accumulate(a, np.transpose(g, inverse))

    return _node(np.transpose(a.data, axes), (a,), backward)


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [_wrap(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in ts]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(ts, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    return _node(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), backward)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [_wrap(t) for t in tensors]

    def backward(g):
        for i, t in enumerate(ts):
            _accumulate(t, np.take(g, i, axis=axis))

    return _node(np.stack([t.data for t in ts], axis=axis), tuple(ts), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    in_shape = a.data.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, in_shape).copy())

    return _node(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _wrap(a)
    in_shape = a.data.shape
    count = a.data.size if axis is None else np.prod(
        [in_shape[ax] for ax in (axis if isinstance(axis, tuple) else (axis,))]
    )

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g / count, in_shape).copy())

    return _node(a.data.mean(axis=axis, keepdims=keepdims), (a,), backward)


def gather_rows(a, index) -> Tensor:
    """Select rows along axis 0; the backward pass scatter-adds them back."""
    a = _wrap(a)
    index = np.asarray(index, dtype=np.int64)
    if index.ndim != 1:
        raise ValueError("gather_rows expects a 1-D index")

    def backward(g):
        ga = np.zeros_like(a.data)
        np.add.at(ga, index, g)
        _accumulate(a, ga)

    return _node(a.data[index], (a,), backward)


# ---------------------------------------------------------------------------
# neural-net ops


def linear(x, w, b) -> Tensor:
    """Affine map over the last axis: x[..., in] @ w[in, out] + b[out]."""
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    n_in, n_out = w.data.shape

    def backward(g):
        g2 = g.reshape(-1, n_out)
        _accumulate(x, (g @ w.data.T).reshape(x.data.shape))
        _accumulate(w, x.data.reshape(-1, n_in).T @ g2)
        _accumulate(b, g2.sum(axis=0))

    return _node(x.data @ w.data + b.data, (x, w, b), backward)


def relu(x) -> Tensor:
    x = _wrap(x)
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _node(np.where(mask, x.data, 0.0), (x,), backward)


def leaky_relu(x, alpha: float = 0.01) -> Tensor:
    x = _wrap(x)
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * np.where(mask, 1.0, alpha))

    return _node(np.where(mask, x.data, alpha * x.data), (x,), backward)


def gelu(x) -> Tensor:
    """Exact Gaussian-error-linear unit: x * Phi(x) with the true normal CDF."""
    x = _wrap(x)
    cdf = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))

    def backward(g):
        pdf = _INV_SQRT2PI * np.exp(-0.5 * x.data * x.data)
        _accumulate(x, g * (cdf + x.data * pdf))

    return _node(x.data * cdf, (x,), backward)


def reglu(x) -> Tensor:
    """Gated linear unit with a ReLU gate.

    Splits the last axis in half into (a, b) and returns a * relu(b), so the
    output width is half the input width.
    """
    x = _wrap(x)
    d = x.data.shape[-1]
    if d % 2 != 0:
        raise ValueError(f"reglu needs an even last axis, got {d}")
    h = d // 2
    a_part = x.data[..., :h]
    b_part = x.data[..., h:]
    gate = np.where(b_part > 0, b_part, 0.0)

    def backward(g):
        gx = np.empty_like(x.data)
        gx[..., :h] = g * gate
        gx[..., h:] = g * a_part * (b_part > 0)
        _accumulate(x, gx)

    return _node(a_part * gate, (x,), backward)


def tanh(x) -> Tensor:
    x = _wrap(x)
    t = np.tanh(x.data)

    def backward(g):
        _accumulate(x, g * (1.0 - t * t))

    return _node(t, (x,), backward)


def layer_norm(x, gain, shift, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale+shift.

    Uses the population variance (divide by d) with ``eps`` added under the
    square root.
    """
    x, gain, shift = _wrap(x), _wrap(gain), _wrap(shift)
    d = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def backward(g):
        dxhat = g * gain.data
        corr = dxhat.sum(axis=-1, keepdims=True) + xhat * (dxhat * xhat).sum(
            axis=-1, keepdims=True
        )
        _accumulate(x, inv * (dxhat - corr / d))
        g2 = (g * xhat).reshape(-1, d)
        _accumulate(gain, g2.sum(axis=0))
        _accumulate(shift, g.reshape(-1, d).sum(axis=0))

    return _node(xhat * gain.data + shift.data, (x, gain, shift), backward)


def dropout(x, p: float, rng, training: bool) -> Tensor:
    """Inverted dropout: zero entries with probability p, scale by 1/(1-p).

    ``rng`` is an ``np.random.Generator`` or an int seed; the mask is fully
    determined by it.  Identity when not training or p == 0.
    """
    x = _wrap(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:

        def backward_id(g):
            _accumulate(x, g)

        return _node(x.data, (x,), backward_id)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    scale = 1.0 / (1.0 - p)
    mask = (rng.random(x.data.shape) >= p) * scale

    def backward(g):
        _accumulate(x, g * mask)

    return _node(x.data * mask, (x,), backward)


def softmax(x) -> Tensor:
    """Numerically stable softmax over the last axis."""
    x = _wrap(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def backward(g):
        _accumulate(x, s * (g - (g * s).sum(axis=-1, keepdims=True)))

    return _node(s, (x,), backward)


def cross_entropy(logits, labels) -> Tensor:
    """Mean negative log-likelihood of integer labels under logits[B, C].

    Computed via log-sum-exp, never materializing probabilities in the
    forward value.
    """
    logits = _wrap(logits)
    if logits.ndim != 2:
        raise ValueError(f"cross_entropy expects [batch, classes], got {logits.shape}")
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ValueError("labels must be a 1-D array matching the batch size")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    n, c = logits.data.shape
    if n == 0:
        raise ValueError("cross_entropy requires a non-empty batch")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError(f"labels must lie in [0, {c})")
    m = logits.data.max(axis=-1, keepdims=True)
    e = np.exp(logits.data - m)
    lse = m[:, 0] + np.log(e.sum(axis=-1))
    picked = logits.data[np.arange(n), labels]
    value = (lse - picked).mean()

    def backward(g):
        p = e / e.sum(axis=-1, keepdims=True)
        p[np.arange(n), labels] -= 1.0
        _accumulate(logits, p * (g / n))

    return _node(value, (logits,), backward)


def mse_loss(pred, target) -> Tensor:
    """Mean of squared differences over all elements (scalar)."""
    pred, target = _wrap(pred), _wrap(target)
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"mse_loss shape mismatch: {pred.data.shape} vs {target.data.shape}"
        )
    diff = pred.data - target.data
    n = diff.size

    def backward(g):
        scaled = (2.0 / n) * diff * g
        _accumulate(pred, scaled)
        _accumulate(target, -scaled)

    return _node((diff * diff).mean(), (pred, target), backward)


def conv2d(x, w, b, stride: int = 1, padding: int = 0) -> Tensor:
    """2-D cross-correlation: x[B,C,H,W] * w[F,C,kh,kw] + b[F].

    Square stride and symmetric zero padding; the inner loops run on the
    active kernel backend.
    """
    x, w, b = _wrap(x), _wrap(w), _wrap(b)
    if x.ndim != 4 or w.ndim != 4:
        raise ValueError("conv2d expects x[B,C,H,W] and w[F,C,kh,kw]")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError("conv2d channel mismatch between input and weights")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    f, _, kh, kw = w.data.shape
    if padding:
        xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    else:
        xp = x.data
    hp, wp = xp.shape[2], xp.shape[3]
    if hp < kh or wp < kw:
        raise ValueError("kernel larger than padded input")
    y = kernels.conv2d_fwd(xp, w.data, stride) + b.data.reshape(1, f, 1, 1)

    def backward(g):
        g = np.ascontiguousarray(g)
        gxp = kernels.conv2d_gx(g, w.data, stride, hp, wp)
        if padding:
            gxp = gxp[:, :, padding:-padding, padding:-padding]
        _accumulate(x, gxp)
        _accumulate(w, kernels.conv2d_gw(xp, g, stride, kh, kw))
        _accumulate(b, g.sum(axis=(0, 2, 3)))

    return _node(y, (x, w, b), backward)


# ---------------------------------------------------------------------------
# parameters


def init_param(rng: np.random.Generator, shape, fan_in: int | None = None,
               scale: float | None = None) -> Tensor:
    """Gaussian-initialized trainable tensor.

    Default scale is He-style sqrt(2 / fan_in), with fan_in inferred from the
    shape (product of all but the last axis) when not given.
    """
    shape = tuple(shape)
    if scale is None:
        if fan_in is None:
            fan_in = int(np.prod(shape[:-1])) if len(shape) > 1 else shape[0]
        scale = np.sqrt(2.0 / max(fan_in, 1))
    return Tensor(rng.normal(0.0, scale, size=shape), requires_grad=True)


def zeros_param(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=True)


def zero_grad(params: Iterable[Tensor]) -> None:
    """Reset the gradient buffer of every tensor in ``params``."""
    for p in params:
        p.zero_grad()
