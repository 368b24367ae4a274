"""Seeded synthetic cohorts with planted trigger-to-risk lags.

Each patient gets log-normal inter-event gaps and uniformly drawn event
types. An event can fire a risk's trigger, which turns it into that risk's
trigger type and opens a RiskInterval ``lag +- jitter`` seconds later. The
embedding of every event is a hashed random direction plus a signal subspace
holding one coordinate per event type and one per fired risk.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from mataformer.config import SynthConfig
from mataformer.consts import EMBEDDINGS_FILE, EVENTS_FILE, INTERVALS_FILE
from mataformer.embeddings import EmbeddingStore, embed_synthetic, embed_trajectory
from mataformer.events import EventRecord, Trajectory, dump_trajectories, textualize
from mataformer.labels import RiskInterval, SoftLabelMatrix, binarize, dump_intervals

logger = logging.getLogger(__name__)

_WORDS = ("stable", "review", "follow-up", "unchanged", "reported", "noted", "requested", "adjusted")


@dataclass(frozen=True)
class Trigger:
    """Trigger records which event opened which interval, for auditing the planted lags"""

    patient_id: str = field(kw_only=True)
    risk: int = field(kw_only=True)
    #: index of the trigger event within its trajectory
    event_index: int = field(kw_only=True)
    t: int = field(kw_only=True)
    #: drawn lag, seconds
    lag: int = field(kw_only=True)


@dataclass
class Cohort:
    trajectories: list[Trajectory] = field(kw_only=True)
    intervals: list[RiskInterval] = field(kw_only=True)
    store: EmbeddingStore = field(kw_only=True)
    triggers: list[Trigger] = field(kw_only=True, default_factory=list)


@dataclass
class _Patient:
    trajectory: Trajectory
    intervals: list[RiskInterval]
    triggers: list[Trigger]
    #: (text, event type, fired risk or -1) per event
    keys: list[tuple[str, int, int]]


def _event(
    config: SynthConfig, rng: np.random.Generator, pid: str, t: int, kind: int, fired: int
) -> EventRecord:
    category = config.categories[kind % len(config.categories)]
    if kind % 2 == 0:
        metrics = [("code", f"E{kind:02d}"), ("value", f"{rng.normal():.1f}")]
        if fired >= 0:
            metrics.append(("alert", f"R{fired}"))
        return EventRecord(patient_id=pid, t=t, category=category, metrics=tuple(metrics))
    text = f"{category} type {kind} {_WORDS[rng.integers(len(_WORDS))]}"
    if fired >= 0:
        text += f" alert R{fired}"
    return EventRecord(patient_id=pid, t=t, category=category, text=text)


def _generate_patient(config: SynthConfig, index: int, seed: np.random.SeedSequence, separator: str) -> _Patient:
    rng = np.random.default_rng(seed)
    pid = f"p{index:05d}"
    n = max(1, int(rng.poisson(config.mean_events_per_patient)))
    gaps = np.rint(rng.lognormal(np.log(config.gap_median), config.gap_sigma, n - 1)).astype(np.int64)
    times = int(rng.integers(0, 86400)) + np.concatenate([[0], np.cumsum(gaps)])
    kinds = rng.integers(0, config.n_event_types, n)

    fires = rng.uniform(size=(n, config.n_risks)) < config.trigger_probability
    fired = np.where(fires.any(axis=1), fires.argmax(axis=1), -1)

    events: list[EventRecord] = []
    intervals: list[RiskInterval] = []
    triggers: list[Trigger] = []
    keys: list[tuple[str, int, int]] = []
    for i in range(n):
        t, kind, risk = int(times[i]), int(kinds[i]), int(fired[i])
        if risk >= 0:
            spec = config.lag_table[risk]
            kind = spec.trigger_type
            lag = spec.lag + int(rng.integers(-spec.jitter, spec.jitter + 1))
            start = t + lag
            intervals.append(RiskInterval(patient_id=pid, risk=risk, t_start=start, t_end=start + spec.duration))
            triggers.append(Trigger(patient_id=pid, risk=risk, event_index=i, t=t, lag=lag))
        event = _event(config, rng, pid, t, kind, risk)
        events.append(event)
        keys.append((textualize(event, separator), kind, risk))
    return _Patient(Trajectory(patient_id=pid, events=events), intervals, triggers, keys)


def _signal_vector(config: SynthConfig, text: str, kind: int, risk: int) -> np.ndarray:
    vec = embed_synthetic(text, config.embedding_dim, config.seed)
    signal = np.zeros(config.embedding_dim)
    signal[kind] = 1.0
    if risk >= 0:
        signal[config.n_event_types + risk] = 1.0
    vec = vec + config.signal_strength * signal
    return vec / np.linalg.norm(vec)


def generate_cohort(config: SynthConfig, threads: int = 1, separator: str = "") -> Cohort:
    """generate_cohort draws a full cohort; output depends only on the config, not on threads"""
    config.validate()
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_patients)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        patients = list(
            pool.map(
                lambda args: _generate_patient(config, args[0], args[1], separator),
                enumerate(seeds),
            )
        )

    store = EmbeddingStore(dim=config.embedding_dim)
    for patient in patients:
        for text, kind, risk in patient.keys:
            if text not in store:
                store.add(text, _signal_vector(config, text, kind, risk))
    for patient in patients:
        embed_trajectory(patient.trajectory, store, separator)

    cohort = Cohort(
        trajectories=[p.trajectory for p in patients],
        intervals=[iv for p in patients for iv in p.intervals],
        store=store,
        triggers=[tr for p in patients for tr in p.triggers],
    )
    logger.info(
        "generated %d patients, %d events, %d intervals, %d distinct texts",
        len(cohort.trajectories),
        sum(len(t) for t in cohort.trajectories),
        len(cohort.intervals),
        len(store),
    )
    return cohort


def prevalence(labels: dict[str, SoftLabelMatrix], beta: float) -> float:
    """prevalence is the fraction of positive cells after binarizing at beta"""
    positive = sum(int(binarize(m, beta).sum()) for m in labels.values())
    total = sum(m.values.size for m in labels.values())
    return positive / total if total else 0.0


def write_cohort(out_dir: str | Path, cohort: Cohort) -> dict[str, Path]:
    """write_cohort writes the events, intervals and embeddings files of a cohort directory"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "events": out / EVENTS_FILE,
        "intervals": out / INTERVALS_FILE,
        "embeddings": out / EMBEDDINGS_FILE,
    }
    dump_trajectories(cohort.trajectories, paths["events"])
    dump_intervals(cohort.intervals, paths["intervals"])
    cohort.store.save(paths["embeddings"])
    return paths


def trigger_violations(cohort: Cohort, config: SynthConfig) -> list[str]:
    """trigger_violations scans every interval for a trigger event at the configured lag within jitter"""
    by_patient = {t.patient_id: t for t in cohort.trajectories}
    problems: list[str] = []
    for interval in cohort.intervals:
        spec = config.lag_table[interval.risk]
        traj = by_patient[interval.patient_id]
        times = traj.times()
        candidates = [
            i
            for i, e in enumerate(traj.events)
            if abs(interval.t_start - times[i] - spec.lag) <= spec.jitter
            and e.t <= interval.t_start
            and textualize(e).endswith(f"R{interval.risk}")
        ]
        if not candidates:
            problems.append(f"{interval.patient_id} risk {interval.risk} at {interval.t_start} has no trigger")
    return problems
