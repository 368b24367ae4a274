import numpy as np
import pytest

from mataformer.errors import ConfigError, DataError
from mataformer.labels import SoftLabelMatrix, save_label_archive
from mataformer.synth import generate_cohort, write_cohort
from mataformer.testing import tiny_experiment, toy_trajectory
from mataformer.training.data import Dataset, collate, iterate_batches, load_dataset


def _dataset(lengths=(3, 5, 2)) -> Dataset:
    trajs = [toy_trajectory(n, dim=8, seed=i, patient_id=f"p{i}") for i, n in enumerate(lengths)]
    labels = {
        t.patient_id: SoftLabelMatrix(values=np.full((len(t), 2, 2), 0.1 * (i + 1)), horizons=(6, 12))
        for i, t in enumerate(trajs)
    }
    return Dataset(trajectories=trajs, labels=labels)


def test_collate_pads_with_last_time_and_zeros():
    data = _dataset()
    batch = collate(data.trajectories, data.labels)
    assert batch.x.shape == (3, 5, 8)
    assert batch.y.shape == (3, 5, 2, 2)
    assert batch.lengths.tolist() == [3, 5, 2]
    last = data.trajectories[0].times()[-1]
    assert (batch.t[0, 3:] == last).all()
    assert not batch.x[2, 2:].any()
    assert not batch.y[0, 3:].any()
    assert batch.patient_ids == ["p0", "p1", "p2"]


def test_iterate_batches_covers_every_patient_once():
    data = _dataset((1, 2, 3, 4, 5))
    seen = [pid for b in iterate_batches(data, 2, np.random.default_rng(0)) for pid in b.patient_ids]
    assert sorted(seen) == [f"p{i}" for i in range(5)]
    ordered = [pid for b in iterate_batches(data, 2) for pid in b.patient_ids]
    assert ordered == [f"p{i}" for i in range(5)]


def test_dataset_checks_labels_and_embeddings():
    data = _dataset()
    traj = data.trajectories[0]
    with pytest.raises(DataError):
        Dataset(trajectories=[traj], labels={})
    with pytest.raises(DataError):
        Dataset(
            trajectories=[traj],
            labels={traj.patient_id: SoftLabelMatrix(values=np.zeros((1, 2, 2)), horizons=(6, 12))},
        )
    bare = toy_trajectory(2)
    bare.embeddings = None
    with pytest.raises(DataError):
        Dataset(trajectories=[bare], labels={bare.patient_id: data.labels["p0"]})


def test_subset_and_targets():
    data = _dataset()
    sub = data.subset([2, 0])
    assert [t.patient_id for t in sub.trajectories] == ["p2", "p0"]
    assert [y.shape[0] for y in sub.targets()] == [2, 3]


def test_collate_rejects_empty():
    with pytest.raises(DataError):
        collate([], {})


def test_load_dataset_from_cohort_directory(tmp_path):
    data, config = tiny_experiment(n_patients=4)
    cohort = generate_cohort(config.synth)
    write_cohort(tmp_path, cohort)

    loaded = load_dataset(tmp_path, config)
    assert [t.patient_id for t in loaded.trajectories] == [t.patient_id for t in data.trajectories]
    for original, again in zip(data.trajectories, loaded.trajectories):
        assert np.allclose(original.embeddings, again.embeddings, atol=1e-6), "stored as float32"
        assert np.array_equal(data.labels[original.patient_id].values, loaded.labels[again.patient_id].values)

    archive = tmp_path / "labels.npz"
    save_label_archive(archive, loaded.labels)
    assert load_dataset(tmp_path, config, archive).labels.keys() == loaded.labels.keys()


def test_load_dataset_checks_embedding_dim(tmp_path):
    _, config = tiny_experiment(n_patients=2)
    write_cohort(tmp_path, generate_cohort(config.synth))
    config.model.input_dim = 16
    with pytest.raises(ConfigError):
        load_dataset(tmp_path, config)
