from typing import Optional

import numpy as np

from mataformer.config import ExperimentConfig, ModelConfig, SynthConfig, TrainConfig
from mataformer.embeddings import embed_synthetic
from mataformer.events import EventRecord, Trajectory
from mataformer.labels import label_cohort
from mataformer.synth import generate_cohort
from mataformer.training.data import Dataset


def random_times(rng: np.random.Generator, n: int, ties: bool = True, spread: int = 200_000) -> np.ndarray:
    """random_times draws n nondecreasing integer timestamps, with repeats when ``ties`` is set"""
    if ties:
        pool = rng.integers(0, spread, size=max(1, n // 2))
        times = rng.choice(pool, size=n)
    else:
        times = rng.choice(spread, size=n, replace=False)
    return np.sort(times).astype(np.int64)


def unit_rows(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def random_batch(
    rng: np.random.Generator, batch: int, seq_len: int, dim: int, ties: bool = True
) -> tuple[np.ndarray, np.ndarray]:
    """random_batch returns unit-norm embeddings [B, S, dim] and timestamps [B, S]"""
    x = unit_rows(rng, (batch, seq_len, dim))
    t = np.stack([random_times(rng, seq_len, ties) for _ in range(batch)])
    return x, t


def toy_trajectory(
    n_events: int,
    dim: int = 16,
    seed: int = 0,
    patient_id: str = "toy",
    times: Optional[np.ndarray] = None,
) -> Trajectory:
    rng = np.random.default_rng(seed)
    if times is None:
        times = random_times(rng, n_events, ties=False)
    events = [
        EventRecord(patient_id=patient_id, t=int(t), category="Lab Test", metrics=(("K", f"{i}"),))
        for i, t in enumerate(times)
    ]
    traj = Trajectory(patient_id=patient_id, events=events)
    traj.attach(np.stack([embed_synthetic(text, dim, seed) for text in traj.texts()]))
    return traj


def small_config(**overrides) -> ModelConfig:
    """small_config is a cheap model for gradient and property tests"""
    values: dict = dict(
        d_model=16,
        n_layers=2,
        n_heads=2,
        d_ff=24,
        n_risks=3,
        horizons=(6, 12),
        input_dim=8,
    )
    values.update(overrides)
    return ModelConfig(**values)


def perturb_residual_network(model, rng: np.random.Generator, scale: float = 0.3) -> None:
    """perturb_residual_network gives the zero-initialized output layers random weights"""
    for block in model.blocks:
        if block.attn.temporal is not None:
            out = block.attn.temporal.out
            out.weight.data = rng.normal(0.0, scale, out.weight.shape)
            out.bias.data = rng.normal(0.0, scale, out.bias.shape)


def tiny_experiment(n_patients: int = 9, seed: int = 0, **train_overrides) -> tuple[Dataset, ExperimentConfig]:
    """tiny_experiment is a labelled synthetic cohort plus a one-layer config that trains in seconds"""
    synth = SynthConfig(
        n_patients=n_patients,
        mean_events_per_patient=12,
        embedding_dim=32,
        trigger_probability=0.02,
        seed=seed,
    )
    cohort = generate_cohort(synth)
    labels = label_cohort(cohort.trajectories, cohort.intervals, synth.n_risks)
    train: dict = dict(max_epochs=2, folds=3, early_stop_patience=2)
    train.update(train_overrides)
    config = ExperimentConfig(
        model=ModelConfig(d_model=16, n_layers=1, n_heads=2, d_ff=24, n_risks=synth.n_risks, input_dim=32),
        train=TrainConfig(**train),
        synth=synth,
    )
    return Dataset(trajectories=cohort.trajectories, labels=labels), config.validate()
