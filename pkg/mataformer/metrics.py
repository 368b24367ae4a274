"""Ranking and calibration metrics for zero-inflated multi-risk, multi-horizon targets.

Conventions for ties:

* average precision treats tied scores as one threshold, so a tie group adds its
  recall step at the group's precision (all-equal scores give p/n);
* AUROC gives half credit to tied positive/negative pairs;
* precision@k cuts a descending stable sort, so among tied scores the lower
  risk index ranks first.

Undefined values (no positives, single class) are returned as ``None``.
"""
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from mataformer.consts import DEFAULT_BETA
from mataformer.labels import binarize

MetricReport = dict[str, Optional[float]]


def average_precision(scores, labels) -> Optional[float]:
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    positives = int(labels.sum())
    if positives == 0:
        return None
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    # last index of every tie group
    ends = np.r_[np.flatnonzero(np.diff(s)), len(s) - 1]
    tp = np.cumsum(y)[ends]
    precision = tp / (ends + 1)
    recall_step = np.diff(np.r_[0, tp]) / positives
    return float(np.sum(precision * recall_step))


def auroc(scores, labels) -> Optional[float]:
    """auroc is the normalized Mann-Whitney U: P(pos > neg) + P(pos == neg) / 2"""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def precision_at_k(scores, labels, k: int):
    """precision_at_k is the positive fraction among the top-k scores of each last-axis slice"""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if not 1 <= k <= scores.shape[-1]:
        raise ValueError(f"k must lie in [1, {scores.shape[-1]}], got {k}")
    top = np.argsort(-scores, axis=-1, kind="stable")[..., :k]
    out = np.take_along_axis(labels, top, axis=-1).sum(axis=-1) / k
    return float(out) if np.ndim(out) == 0 else out


def brier_score(pred, labels) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    return float(np.mean((pred - np.asarray(labels, dtype=np.float64)) ** 2))


def _stack(values) -> np.ndarray:
    if isinstance(values, np.ndarray):
        return values
    return np.concatenate([np.asarray(v) for v in values], axis=0)


def micro_average_precision(pred, labels) -> Optional[float]:
    """micro_average_precision is AP over every (event, risk, horizon) cell at once"""
    return average_precision(_stack(pred), _stack(labels))


def sample_average_precision(pred, labels) -> Optional[float]:
    """sample_average_precision averages per-event AP over events with at least one positive cell"""
    pred, labels = _stack(pred), _stack(labels)
    per_event = [
        average_precision(p, y)
        for p, y in zip(pred.reshape(len(pred), -1), labels.reshape(len(labels), -1))
        if y.any()
    ]
    if not per_event:
        return None
    return float(np.mean(per_event))


def event_precision_at_k(pred, labels, k: int) -> Optional[float]:
    """event_precision_at_k ranks risks per (event, horizon) and averages over slices with a positive"""
    pred, labels = _stack(pred), _stack(labels)
    # [N, R, K] -> [N * K, R] slices over the risk axis
    scores = np.moveaxis(pred, 1, -1).reshape(-1, pred.shape[1])
    truth = np.moveaxis(labels, 1, -1).reshape(-1, labels.shape[1])
    keep = truth.any(axis=-1)
    if not keep.any():
        return None
    return float(np.mean(precision_at_k(scores[keep], truth[keep], k)))


def signal_noise_separation(pred, labels) -> Optional[float]:
    """signal_noise_separation is the mean prediction on positive cells minus that on negative cells"""
    pred, labels = _stack(pred).ravel(), _stack(labels).ravel().astype(bool)
    if labels.all() or not labels.any():
        return None
    return float(pred[labels].mean() - pred[~labels].mean())


def evaluate(pred, soft_targets, beta: float = DEFAULT_BETA) -> MetricReport:
    """evaluate binarizes soft targets at beta and computes the full metric suite"""
    pred = _stack(pred)
    labels = binarize(_stack(soft_targets), beta)
    n_risks = pred.shape[1]
    return {
        "sample_auprc": sample_average_precision(pred, labels),
        "micro_auprc": micro_average_precision(pred, labels),
        "auroc": auroc(pred, labels),
        "p_at_1": event_precision_at_k(pred, labels, 1),
        "p_at_5": event_precision_at_k(pred, labels, 5) if n_risks >= 5 else None,
        "brier": brier_score(pred, labels),
        "separation": signal_noise_separation(pred, labels),
        "prevalence": float(labels.mean()),
    }


def beta_sweep(pred, soft_targets, betas: Sequence[float]) -> list[MetricReport]:
    """beta_sweep evaluates once per threshold; each row carries its beta and positive prevalence"""
    pred, soft_targets = _stack(pred), _stack(soft_targets)
    return [{"beta": float(b), **evaluate(pred, soft_targets, b)} for b in betas]


def parse_sweep(spec: str) -> list[float]:
    """parse_sweep turns ``start:stop:step`` (stop inclusive) into a list of thresholds

    Every threshold must lie strictly inside (0, 1).
    """
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
    except ValueError:
        raise ValueError(f"expected start:stop:step, got {spec!r}")
    if not np.isfinite([start, stop, step]).all():
        raise ValueError(f"non-finite sweep {spec!r}")
    if step <= 0 or stop < start:
        raise ValueError(f"empty sweep {spec!r}")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    betas = [round(start + i * step, 10) for i in range(count)]
    outside = [b for b in betas if not 0.0 < b < 1.0]
    if outside:
        raise ValueError(f"thresholds must lie in (0, 1), got {outside[0]} in {spec!r}")
    return betas


def aggregate(reports: Sequence[MetricReport]) -> dict[str, dict]:
    """aggregate folds per-run reports into {metric: {mean, std, values}}; undefined runs are skipped"""
    names: list[str] = []
    for report in reports:
        names.extend(n for n in report if n not in names)
    out: dict[str, dict] = {}
    for name in names:
        values = [r.get(name) for r in reports]
        defined = [v for v in values if v is not None]
        out[name] = {
            "mean": float(np.mean(defined)) if defined else None,
            "std": float(np.std(defined)) if defined else None,
            "values": values,
        }
    return out
