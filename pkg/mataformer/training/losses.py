from typing import Optional

import numpy as np

from mataformer.config import LossMode, TrainConfig
from mataformer.consts import PRED_CLAMP
from mataformer.errors import ShapeError
from mataformer.lib.tensor import Tensor, as_tensor


def _valid_mask(shape: tuple[int, ...], lengths: Optional[np.ndarray]) -> tuple[np.ndarray, float]:
    """Returns a [B, S, 1, 1] mask of valid positions and the normalizer R*K*sum(L)"""
    b, s, r, k = shape
    if lengths is None:
        lengths = np.full(b, s)
    lengths = np.asarray(lengths)
    if lengths.shape != (b,):
        raise ShapeError("lengths", (b,), lengths.shape)
    if (lengths < 0).any() or (lengths > s).any():
        raise ValueError(f"lengths must lie in [0, {s}], got {lengths.tolist()}")
    total = int(lengths.sum())
    if total == 0:
        raise ValueError("total valid length is zero")
    valid = (np.arange(s)[None, :] < lengths[:, None]).astype(np.float64)
    return valid[:, :, None, None], float(r * k * total)


def _check(pred: Tensor, target: np.ndarray) -> None:
    if pred.ndim != 4:
        raise ShapeError("predictions", ("B", "S", "R", "K"), pred.shape)
    if target.shape != pred.shape:
        raise ShapeError("targets", pred.shape, target.shape)


def mse_loss(pred, target, lengths: Optional[np.ndarray] = None) -> Tensor:
    """mse_loss sums squared errors over valid positions and divides by R*K*sum(L)"""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check(pred, target)
    mask, z = _valid_mask(pred.shape, lengths)
    diff = (pred - target) * mask
    return (diff * diff).sum() * (1.0 / z)


def focal_loss_soft(
    pred,
    target,
    gamma: float,
    alpha_bal: float,
    lengths: Optional[np.ndarray] = None,
) -> Tensor:
    """focal_loss_soft is the focal loss generalized to soft targets y in [0, 1]

    Per entry: -[a (1-p)^g y ln p + (1-a) p^g (1-y) ln(1-p)], averaged over valid
    entries. Predictions are clamped to [1e-7, 1 - 1e-7] before the logs.
    """
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check(pred, target)
    mask, z = _valid_mask(pred.shape, lengths)
    p = pred.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP)
    q = 1.0 - p
    pos = (q**gamma) * p.log() * (alpha_bal * target)
    neg = (p**gamma) * q.log() * ((1.0 - alpha_bal) * (1.0 - target))
    return -(((pos + neg) * mask).sum() * (1.0 / z))


def bce_loss(pred, target, lengths: Optional[np.ndarray] = None) -> Tensor:
    """bce_loss is the mean binary cross-entropy over valid entries, with the same clamp"""
    pred = as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check(pred, target)
    mask, z = _valid_mask(pred.shape, lengths)
    p = pred.clamp(PRED_CLAMP, 1.0 - PRED_CLAMP)
    per_entry = p.log() * target + (1.0 - p).log() * (1.0 - target)
    return -((per_entry * mask).sum() * (1.0 / z))


def compute_loss(pred, target, lengths: Optional[np.ndarray], config: TrainConfig) -> Tensor:
    match config.loss_mode:
        case LossMode.MSE:
            return mse_loss(pred, target, lengths)
        case LossMode.FOCAL:
            return focal_loss_soft(pred, target, config.focal_gamma, config.focal_alpha, lengths)
        case LossMode.BCE:
            return bce_loss(pred, target, lengths)
    raise ValueError(f"unknown loss mode {config.loss_mode}")
