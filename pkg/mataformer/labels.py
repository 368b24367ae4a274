"""Plateau-Gaussian soft labels built from expert risk intervals."""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from mataformer.consts import DEFAULT_HORIZONS, SECONDS_PER_HOUR
from mataformer.errors import DataError
from mataformer.events import Trajectory


@dataclass(frozen=True)
class RiskInterval:
    """RiskInterval is an annotated active window [t_start, t_end] of one risk"""

    patient_id: str = field(kw_only=True)
    #: risk index in [0, n_risks)
    risk: int = field(kw_only=True)
    t_start: int = field(kw_only=True)
    t_end: int = field(kw_only=True)

    def __post_init__(self):
        if self.t_start > self.t_end:
            raise DataError(f"interval starts at {self.t_start} after it ends at {self.t_end}")
        if self.risk < 0:
            raise DataError(f"negative risk index {self.risk}")

    def to_json(self) -> dict:
        return {
            "patient_id": self.patient_id,
            "risk": self.risk,
            "t_start": self.t_start,
            "t_end": self.t_end,
        }


@dataclass
class SoftLabelMatrix:
    """SoftLabelMatrix holds per-event targets of shape [events, risks, horizons]"""

    values: np.ndarray = field(kw_only=True)
    #: horizons in hours; sigma_k = k
    horizons: tuple[int, ...] = field(kw_only=True, default=DEFAULT_HORIZONS)

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[2] != len(self.horizons):
            raise DataError(
                f"label values {self.values.shape} do not match {len(self.horizons)} horizons"
            )

    @property
    def n_risks(self) -> int:
        return self.values.shape[1]


def displacement(t, interval: RiskInterval):
    """displacement is the distance in hours from t to the interval, 0 inside it

    Accepts a scalar or an array of timestamps in seconds.
    """
    t = np.asarray(t, dtype=np.float64)
    before = (interval.t_start - t) / SECONDS_PER_HOUR
    after = (t - interval.t_end) / SECONDS_PER_HOUR
    out = np.maximum(np.maximum(before, after), 0.0)
    return float(out) if out.ndim == 0 else out


def soft_label(delta, sigma_k: float):
    """soft_label is the unnormalized Gaussian kernel exp(-delta^2 / (2 sigma_k^2))"""
    if sigma_k <= 0:
        raise ValueError(f"sigma_k must be positive, got {sigma_k}")
    delta = np.asarray(delta, dtype=np.float64)
    out = np.exp(-(delta * delta) / (2.0 * sigma_k * sigma_k))
    return float(out) if out.ndim == 0 else out


def build_label_matrix(
    traj: Trajectory,
    intervals: Sequence[RiskInterval],
    n_risks: int,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
) -> SoftLabelMatrix:
    """build_label_matrix computes y[i, r, k] for one trajectory

    Overlapping or repeated intervals of a risk combine by max, which equals
    the kernel of the smallest displacement. Risks without intervals stay 0.
    """
    times = traj.times()
    values = np.zeros((len(times), n_risks, len(horizons)), dtype=np.float64)
    by_risk: dict[int, list[RiskInterval]] = {}
    for interval in intervals:
        if interval.risk >= n_risks:
            raise DataError(f"risk index {interval.risk} >= n_risks {n_risks}")
        by_risk.setdefault(interval.risk, []).append(interval)

    for risk, group in by_risk.items():
        nearest = np.min(np.stack([displacement(times, iv) for iv in group]), axis=0)
        for k, horizon in enumerate(horizons):
            values[:, risk, k] = soft_label(nearest, float(horizon))
    return SoftLabelMatrix(values=values, horizons=tuple(horizons))


def binarize(y, beta: float) -> np.ndarray:
    """binarize thresholds soft labels with the strict rule y > beta"""
    if not 0.0 < beta < 1.0:
        raise ValueError(f"beta must lie in (0, 1), got {beta}")
    values = y.values if isinstance(y, SoftLabelMatrix) else np.asarray(y)
    return (values > beta).astype(np.uint8)


def group_intervals(intervals: Iterable[RiskInterval]) -> dict[str, list[RiskInterval]]:
    grouped: dict[str, list[RiskInterval]] = {}
    for interval in intervals:
        grouped.setdefault(interval.patient_id, []).append(interval)
    return grouped


def label_cohort(
    trajectories: Sequence[Trajectory],
    intervals: Iterable[RiskInterval],
    n_risks: int,
    horizons: Sequence[int] = DEFAULT_HORIZONS,
) -> dict[str, SoftLabelMatrix]:
    by_patient = group_intervals(intervals)
    return {
        traj.patient_id: build_label_matrix(
            traj, by_patient.get(traj.patient_id, []), n_risks, horizons
        )
        for traj in trajectories
    }


def _parse_interval(raw) -> RiskInterval:
    if not isinstance(raw, dict):
        raise DataError("expected a JSON object")
    if not isinstance(raw.get("patient_id"), str):
        raise DataError("missing or non-string `patient_id`")
    for key in ("risk", "t_start", "t_end"):
        value = raw.get(key)
        if not isinstance(value, int) or isinstance(value, bool):
            raise DataError(f"missing or non-integer `{key}`")
    return RiskInterval(
        patient_id=raw["patient_id"],
        risk=raw["risk"],
        t_start=raw["t_start"],
        t_end=raw["t_end"],
    )


def load_intervals(path: str | Path) -> list[RiskInterval]:
    intervals: list[RiskInterval] = []
    with open(path, "rb") as f:
        for line_no, raw in enumerate(f, start=1):
            if not raw.strip():
                continue
            try:
                intervals.append(_parse_interval(json.loads(raw.decode("utf-8"))))
            except UnicodeDecodeError as e:
                raise DataError(f"invalid UTF-8: {e.reason}", str(path), line_no)
            except json.JSONDecodeError as e:
                raise DataError(f"malformed JSON: {e.msg}", str(path), line_no)
            except DataError as e:
                raise DataError(e.reason, str(path), line_no)
    return intervals


def dump_intervals(intervals: Iterable[RiskInterval], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for interval in intervals:
            f.write(json.dumps(interval.to_json()) + "\n")


def save_label_archive(path: str | Path, labels: dict[str, SoftLabelMatrix]) -> None:
    """save_label_archive writes a compressed npz with one array per patient

    Layout: ``patient_ids`` (str array), ``horizons`` (int array) and
    ``y_<i>`` holding the [events, risks, horizons] values of the i-th patient.
    """
    horizons = {m.horizons for m in labels.values()}
    if len(horizons) > 1:
        raise DataError(f"mixed horizon sets {sorted(horizons)} in one archive")
    arrays: dict[str, np.ndarray] = {
        "patient_ids": np.array(list(labels), dtype=str),
        "horizons": np.array(next(iter(horizons), DEFAULT_HORIZONS), dtype=np.int64),
    }
    for i, matrix in enumerate(labels.values()):
        arrays[f"y_{i}"] = matrix.values
    np.savez_compressed(path, **arrays)


def load_label_archive(path: str | Path) -> dict[str, SoftLabelMatrix]:
    with np.load(path, allow_pickle=False) as archive:
        if "patient_ids" not in archive or "horizons" not in archive:
            raise DataError("not a label archive", str(path))
        horizons = tuple(int(h) for h in archive["horizons"])
        return {
            str(pid): SoftLabelMatrix(values=archive[f"y_{i}"], horizons=horizons)
            for i, pid in enumerate(archive["patient_ids"])
        }
