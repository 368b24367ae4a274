from typing import Any, Iterator, Optional

import numpy as np

from mataformer.errors import ShapeError
from mataformer.lib.tensor.functional import rmsnorm
from mataformer.lib.tensor.tensor import Tensor


def parameter(data: np.ndarray) -> Tensor:
    """parameter wraps an array as a trainable leaf tensor"""
    return Tensor(data, requires_grad=True)


class Module:
    """Module discovers its parameters and sub-modules from instance attributes.

    Trainable tensors, nested modules and lists of modules assigned in
    ``__init__`` are found in attribute order, so parameter names are stable
    (``blocks.0.attn.wq.weight``) and usable as checkpoint keys.
    """

    def __call__(self, *args: Any, **kwargs: Any) -> Any:
        return self.forward(*args, **kwargs)

    def forward(self, *args: Any, **kwargs: Any) -> Any:
        raise NotImplementedError

    def named_children(self) -> Iterator[tuple[str, "Module"]]:
        for name, value in vars(self).items():
            match value:
                case Module():
                    yield name, value
                case list() | tuple():
                    for i, item in enumerate(value):
                        if isinstance(item, Module):
                            yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + name, value
        for name, child in self.named_children():
            yield from child.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise KeyError(f"state mismatch, missing={missing} unexpected={unexpected}")
        for name, p in own.items():
            value = np.asarray(state[name])
            if value.shape != p.data.shape:
                raise ShapeError(name, p.data.shape, value.shape)
            p.data = value.astype(p.data.dtype, copy=True)


class Linear(Module):
    """Linear computes x @ weight (+ bias); weight is stored as [in, out]"""

    def __init__(
        self,
        in_features: int,
        out_features: int,
        rng: np.random.Generator,
        bias: bool = True,
        zero: bool = False,
        dtype=np.float64,
    ):
        self.in_features = in_features
        self.out_features = out_features
        if zero:
            w = np.zeros((in_features, out_features), dtype=dtype)
        else:
            w = rng.normal(0.0, 1.0 / np.sqrt(in_features), (in_features, out_features))
        self.weight = parameter(w.astype(dtype))
        self.bias: Optional[Tensor] = (
            parameter(np.zeros(out_features, dtype=dtype)) if bias else None
        )

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.in_features:
            raise ShapeError("linear input", self.in_features, x.shape[-1])
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


class RMSNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-6, dtype=np.float64):
        self.eps = eps
        self.gain = parameter(np.ones(dim, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return rmsnorm(x, self.gain, self.eps)
