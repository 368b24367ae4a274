from dataclasses import dataclass, field

import numpy as np

from mataformer.lib.tensor import Tensor


@dataclass
class ParamGroup:
    """ParamGroup is a named set of parameters sharing a learning-rate multiplier"""

    #: name reported in training history, e.g. ``backbone`` or ``predictor``
    name: str = field(kw_only=True)
    #: parameters updated by this group
    params: list[Tensor] = field(kw_only=True)
    #: multiplier applied to the scheduled base learning rate
    lr_scale: float = field(kw_only=True, default=1.0)
    #: current learning rate, set by ``AdamW.set_lr``
    lr: float = field(kw_only=True, default=0.0)


class AdamW:
    """AdamW with decoupled weight decay over several parameter groups.

    Weight decay only touches matrices (ndim >= 2); gains, biases and the
    per-head priors are left undecayed.
    """

    def __init__(
        self,
        groups: list[ParamGroup],
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        self.groups = groups
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.state: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def set_lr(self, base_lr: float) -> None:
        for group in self.groups:
            group.lr = base_lr * group.lr_scale

    def learning_rates(self) -> dict[str, float]:
        return {group.name: group.lr for group in self.groups}

    def zero_grad(self) -> None:
        for group in self.groups:
            for p in group.params:
                p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        beta1, beta2 = self.betas
        bias1 = 1.0 - beta1**self.step_count
        bias2 = 1.0 - beta2**self.step_count

        for group in self.groups:
            lr = group.lr
            for p in group.params:
                if p.grad is None:
                    continue
                grad = p.grad
                first, second = self.state.get(
                    id(p), (np.zeros_like(p.data), np.zeros_like(p.data))
                )
                first = beta1 * first + (1.0 - beta1) * grad
                second = beta2 * second + (1.0 - beta2) * grad * grad
                self.state[id(p)] = (first, second)

                if p.data.ndim >= 2 and self.weight_decay > 0:
                    p.data = p.data - lr * self.weight_decay * p.data
                step_size = lr * np.sqrt(bias2) / bias1
                p.data = p.data - step_size * first / (np.sqrt(second) + self.eps)
