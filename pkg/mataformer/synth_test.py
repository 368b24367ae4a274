import math

import numpy as np

from mataformer.config import LagSpec, SynthConfig
from mataformer.labels import build_label_matrix, group_intervals, label_cohort
from mataformer.synth import generate_cohort, prevalence, trigger_violations, write_cohort


def _small(**overrides) -> SynthConfig:
    base = dict(n_patients=12, mean_events_per_patient=20, trigger_probability=0.02)
    base.update(overrides)
    return SynthConfig(**base)


def test_same_seed_writes_identical_files(tmp_path):
    config = _small()
    first = write_cohort(tmp_path / "a", generate_cohort(config))
    second = write_cohort(tmp_path / "b", generate_cohort(config, threads=4))
    for name in first:
        assert first[name].read_bytes() == second[name].read_bytes(), f"{name} differs between runs"


def test_different_seed_differs():
    a = generate_cohort(_small(seed=1))
    b = generate_cohort(_small(seed=2))
    assert [len(t) for t in a.trajectories] != [len(t) for t in b.trajectories]


def test_zero_trigger_probability_gives_no_labels():
    cohort = generate_cohort(_small(trigger_probability=0.0))
    assert cohort.intervals == []
    labels = label_cohort(cohort.trajectories, cohort.intervals, n_risks=8)
    assert all(not m.values.any() for m in labels.values())


def test_embeddings_are_unit_and_carry_trigger_coordinate():
    config = _small()
    cohort = generate_cohort(config)
    assert cohort.triggers, "the small cohort should fire at least one trigger"
    by_patient = {t.patient_id: t for t in cohort.trajectories}
    for trigger in cohort.triggers:
        emb = by_patient[trigger.patient_id].embeddings
        assert abs(np.linalg.norm(emb[trigger.event_index]) - 1.0) < 1e-9
        fired = emb[trigger.event_index, config.n_event_types + trigger.risk]
        assert fired > 0.2, "the fired-risk coordinate dominates the hashed noise"


def test_every_interval_follows_its_trigger():
    config = _small(n_patients=40)
    cohort = generate_cohort(config)
    assert len(cohort.intervals) == len(cohort.triggers)
    assert trigger_violations(cohort, config) == []
    for trigger, interval in zip(cohort.triggers, cohort.intervals):
        spec = config.lag_table[trigger.risk]
        assert abs(trigger.lag - spec.lag) <= spec.jitter
        assert interval.t_start == trigger.t + trigger.lag


def test_six_hour_lag_labels_trigger_at_exp_minus_half():
    config = SynthConfig(
        n_patients=30,
        mean_events_per_patient=30,
        n_event_types=4,
        n_risks=1,
        lag_table=[LagSpec(trigger_type=0, lag=21600, jitter=0, duration=3600)],
        trigger_probability=0.03,
        embedding_dim=8,
    )
    cohort = generate_cohort(config)
    by_patient = {t.patient_id: t for t in cohort.trajectories}
    grouped = group_intervals(cohort.intervals)
    checked = 0
    for pid, intervals in grouped.items():
        if len(intervals) != 1:
            continue
        trigger = next(tr for tr in cohort.triggers if tr.patient_id == pid)
        matrix = build_label_matrix(by_patient[pid], intervals, n_risks=1, horizons=(6,))
        assert abs(matrix.values[trigger.event_index, 0, 0] - math.exp(-0.5)) < 1e-12
        checked += 1
    assert checked > 0


def test_default_prevalence_is_sparse():
    config = SynthConfig()
    cohort = generate_cohort(config, threads=4)
    labels = label_cohort(cohort.trajectories, cohort.intervals, config.n_risks)
    value = prevalence(labels, 0.5)
    assert 0.005 <= value <= 0.03, f"positive-cell prevalence {value:.4f}"
