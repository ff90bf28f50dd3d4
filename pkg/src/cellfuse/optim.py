"""AdamW with decoupled weight decay, plus the cosine learning-rate schedule.

The optimizer takes an explicit learning rate on every ``step`` call; the
training loops compute it per epoch with ``cosine_lr`` so schedule and update
rule stay independently testable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from cellfuse.tensor import Tensor

__all__ = ["OptimizerState", "AdamW", "cosine_lr"]


@dataclass
class OptimizerState:
    """Per-parameter moments and the step counter, plus the run's bounds."""

    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step_count: int = 0
    lr_max: float = 5e-4
    lr_min: float = 5e-6
    weight_decay: float = 1e-5
    t_max: int = 10


class AdamW:
    """Adam with decoupled weight decay.

    Decay is applied directly to the parameter (``p -= lr * wd * p``), never
    through the moment estimates, and both the decay and the Adam move read
    the pre-step parameter value.
    """

    def __init__(
        self,
        params,
        lr_max: float = 5e-4,
        lr_min: float = 5e-6,
        t_max: int = 10,
        weight_decay: float = 1e-5,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
    ):
        self.params: list[Tensor] = list(params)
        for p in self.params:
            if not p.requires_grad:
                raise ValueError("AdamW got a tensor that does not require grad")
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.state = OptimizerState(
            m=[np.zeros_like(p.data) for p in self.params],
            v=[np.zeros_like(p.data) for p in self.params],
            lr_max=lr_max,
            lr_min=lr_min,
            weight_decay=weight_decay,
            t_max=t_max,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self, lr: float) -> None:
        """One update from the current ``.grad`` buffers at learning rate lr."""
        st = self.state
        st.step_count += 1
        t = st.step_count
        bc1 = 1.0 - self.beta1**t
        bc2 = 1.0 - self.beta2**t
        for p, m, v in zip(self.params, st.m, st.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p.data -= lr * (update + st.weight_decay * p.data)


def cosine_lr(epoch: int, lr_max: float, lr_min: float, t_max: int) -> float:
    """Cosine annealing from lr_max at epoch 0 to lr_min at epoch t_max.

    Past t_max the rate stays at lr_min (no restarts).
    """
    if t_max <= 0:
        raise ValueError("t_max must be positive")
    t = min(max(epoch, 0), t_max)
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + np.cos(np.pi * t / t_max))
