import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from mataformer.config import ExperimentConfig
from mataformer.consts import EMBEDDINGS_FILE, EVENTS_FILE, INTERVALS_FILE
from mataformer.embeddings import embed_trajectory, load_precomputed
from mataformer.errors import ConfigError, DataError
from mataformer.events import Trajectory, load_trajectories
from mataformer.labels import SoftLabelMatrix, label_cohort, load_intervals, load_label_archive

logger = logging.getLogger(__name__)


@dataclass
class Dataset:
    """Dataset pairs embedded trajectories with their soft-label matrices"""

    trajectories: list[Trajectory] = field(kw_only=True)
    labels: Mapping[str, SoftLabelMatrix] = field(kw_only=True)

    def __post_init__(self):
        for traj in self.trajectories:
            if traj.embeddings is None:
                raise DataError(f"trajectory {traj.patient_id} has no embeddings")
            matrix = self.labels.get(traj.patient_id)
            if matrix is None:
                raise DataError(f"no labels for patient {traj.patient_id}")
            if matrix.values.shape[0] != len(traj):
                raise DataError(
                    f"patient {traj.patient_id}: {matrix.values.shape[0]} label rows for {len(traj)} events"
                )

    def __len__(self) -> int:
        return len(self.trajectories)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        trajs = [self.trajectories[i] for i in indices]
        return Dataset(trajectories=trajs, labels={t.patient_id: self.labels[t.patient_id] for t in trajs})

    def targets(self) -> list[np.ndarray]:
        return [self.labels[t.patient_id].values for t in self.trajectories]


@dataclass
class Batch:
    #: [B, S, dim] embeddings, zero beyond each length
    x: np.ndarray = field(kw_only=True)
    #: [B, S] timestamps, padded with each sequence's last valid time
    t: np.ndarray = field(kw_only=True)
    #: [B, S, R, K] soft targets, zero beyond each length
    y: np.ndarray = field(kw_only=True)
    lengths: np.ndarray = field(kw_only=True)
    patient_ids: list[str] = field(kw_only=True)


def collate(trajs: Sequence[Trajectory], labels: Mapping[str, SoftLabelMatrix]) -> Batch:
    if len(trajs) == 0:
        raise DataError("cannot collate an empty batch")
    lengths = np.array([len(t) for t in trajs])
    seq_len = int(lengths.max())
    first = labels[trajs[0].patient_id].values
    dim = trajs[0].embeddings.shape[1]  # type: ignore[union-attr]

    x = np.zeros((len(trajs), seq_len, dim))
    t = np.zeros((len(trajs), seq_len), dtype=np.int64)
    y = np.zeros((len(trajs), seq_len) + first.shape[1:])
    for b, traj in enumerate(trajs):
        n = len(traj)
        times = traj.times()
        x[b, :n] = traj.embeddings
        t[b, :n] = times
        t[b, n:] = times[-1]
        y[b, :n] = labels[traj.patient_id].values
    return Batch(x=x, t=t, y=y, lengths=lengths, patient_ids=[tr.patient_id for tr in trajs])


def iterate_batches(
    data: Dataset, batch_size: int, rng: Optional[np.random.Generator] = None
) -> Iterator[Batch]:
    """iterate_batches yields padded batches, shuffled when an rng is given"""
    order = np.arange(len(data)) if rng is None else rng.permutation(len(data))
    for start in range(0, len(order), batch_size):
        chunk = [data.trajectories[i] for i in order[start : start + batch_size]]
        yield collate(chunk, data.labels)


def load_dataset(data_dir: str | Path, config: ExperimentConfig, labels_path: Optional[str | Path] = None) -> Dataset:
    """load_dataset reads a cohort directory (events, intervals, embeddings) and labels it

    Soft labels come from ``labels_path`` when given (an archive written by
    ``save_label_archive``), otherwise they are built from the intervals file.
    """
    root = Path(data_dir)
    trajectories = load_trajectories(root / EVENTS_FILE, config.labels.categories)
    store = load_precomputed(root / EMBEDDINGS_FILE)
    if store.dim != config.model.input_dim:
        raise ConfigError("model.input_dim", f"is {config.model.input_dim} but the embeddings have dim {store.dim}")
    for traj in trajectories:
        embed_trajectory(traj, store, config.labels.separator)
    if labels_path is not None:
        labels = load_label_archive(labels_path)
        horizons = {m.horizons for m in labels.values()}
        if horizons and horizons != {config.labels.horizons}:
            raise ConfigError("labels.horizons", f"archive {labels_path} was built for horizons {sorted(horizons)}")
    else:
        intervals = load_intervals(root / INTERVALS_FILE)
        labels = label_cohort(trajectories, intervals, config.model.n_risks, config.labels.horizons)
    logger.info("loaded %d labelled trajectories from %s", len(trajectories), root)
    return Dataset(trajectories=trajectories, labels=labels)
