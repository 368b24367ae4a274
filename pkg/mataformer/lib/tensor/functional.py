import numpy as np
from scipy.special import expit

from mataformer.errors import NumericalError, ShapeError
from mataformer.lib.tensor.tensor import ArrayLike, Tensor, as_tensor


def softmax_lastdim(x: ArrayLike) -> Tensor:
    """softmax_lastdim normalizes the last axis with max subtraction

    Entries may be -inf (masked). A slice where every entry is -inf yields all
    zeros rather than NaN.

    Args:
        x: scores, last dimension >= 1

    Returns:
        Tensor of the same shape whose last-axis slices are nonnegative and sum to 1

    """
    x = as_tensor(x)
    if x.ndim == 0 or x.shape[-1] < 1:
        raise ShapeError("softmax input", "last dimension >= 1", x.shape)
    if np.isnan(x.data).any():
        where = np.argwhere(np.isnan(x.data))[0]
        raise NumericalError("NaN in softmax input", where=f"index {tuple(where)}")

    peak = np.max(x.data, axis=-1, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    shifted = np.exp(x.data - peak)
    total = shifted.sum(axis=-1, keepdims=True)
    value = np.divide(
        shifted, total, out=np.zeros_like(shifted), where=total > 0
    )
    out = x._child(value, (x,), "softmax")

    def _backward():
        g = out.grad
        x._accumulate(value * (g - (g * value).sum(axis=-1, keepdims=True)))

    out._backward = _backward
    return out


def rmsnorm(x: ArrayLike, gain: ArrayLike, eps: float = 1e-6) -> Tensor:
    """rmsnorm scales each last-axis slice by 1/sqrt(mean(x^2) + eps), then by gain

    eps must be positive so an all-zero slice stays finite.
    """
    x = as_tensor(x)
    gain = as_tensor(gain, x.dtype)
    if gain.ndim != 1 or x.ndim == 0 or gain.shape[0] != x.shape[-1]:
        raise ShapeError("rmsnorm gain", (x.shape[-1:] if x.ndim else ()), gain.shape)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")

    inv = 1.0 / np.sqrt(np.mean(x.data * x.data, axis=-1, keepdims=True) + eps)
    normed = x.data * inv
    out = x._child(normed * gain.data, (x, gain), "rmsnorm")

    def _backward():
        g = out.grad
        gain._accumulate((g * normed).reshape(-1, gain.shape[0]).sum(axis=0))
        gx = g * gain.data
        proj = np.mean(gx * x.data, axis=-1, keepdims=True)
        x._accumulate(inv * gx - inv**3 * x.data * proj)

    out._backward = _backward
    return out


def silu(x: ArrayLike) -> Tensor:
    """silu is x * sigmoid(x), elementwise"""
    x = as_tensor(x)
    sig = expit(x.data)
    out = x._child(x.data * sig, (x,), "silu")

    def _backward():
        x._accumulate(out.grad * sig * (1.0 + x.data * (1.0 - sig)))

    out._backward = _backward
    return out
