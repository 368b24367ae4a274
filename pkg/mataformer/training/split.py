from typing import Sequence

import numpy as np

from mataformer.errors import DataError
from mataformer.events import Trajectory


def balanced_patient_split(
    trajs: Sequence[Trajectory] | Sequence[int], folds: int, seed: int = 0
) -> np.ndarray:
    """balanced_patient_split assigns whole patients to folds with balanced event totals

    Patients are placed longest first, each onto the currently lightest fold.
    Equal lengths are ordered by a seeded shuffle; among equally light folds
    the lowest index wins.

    Args:
        trajs: trajectories, or their event counts
        folds: number of folds, >= 2
        seed: shuffle seed for equal-length patients

    Returns:
        fold index per patient, aligned with ``trajs``

    """
    if folds < 2:
        raise ValueError(f"need at least 2 folds, got {folds}")
    lengths = np.array([t if isinstance(t, (int, np.integer)) else len(t) for t in trajs])
    if len(lengths) < folds:
        raise DataError(f"{len(lengths)} patients cannot fill {folds} folds")

    rng = np.random.default_rng(seed)
    shuffled = rng.permutation(len(lengths))
    order = shuffled[np.argsort(-lengths[shuffled], kind="stable")]

    load = np.zeros(folds, dtype=np.int64)
    assignment = np.empty(len(lengths), dtype=np.int64)
    for patient in order:
        fold = int(np.argmin(load))
        assignment[patient] = fold
        load[fold] += lengths[patient]
    return assignment


def fold_loads(assignment: np.ndarray, lengths: Sequence[int], folds: int) -> np.ndarray:
    return np.bincount(assignment, weights=np.asarray(lengths, dtype=np.float64), minlength=folds)


def validation_fold(test_fold: int, folds: int) -> int:
    """validation_fold is the fold used for early stopping when ``test_fold`` is held out"""
    return (test_fold + 1) % folds


def fold_indices(assignment: np.ndarray, test_fold: int, folds: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """fold_indices returns (train, validation, test) patient indices for one held-out fold"""
    if not 0 <= test_fold < folds:
        raise ValueError(f"fold {test_fold} outside [0, {folds})")
    val_fold = validation_fold(test_fold, folds)
    test = np.flatnonzero(assignment == test_fold)
    val = np.flatnonzero(assignment == val_fold)
    train = np.flatnonzero((assignment != test_fold) & (assignment != val_fold))
    return train, val, test


def fold_manifest(trajs: Sequence[Trajectory], assignment: np.ndarray, folds: int, seed: int) -> dict:
    lengths = [len(t) for t in trajs]
    return {
        "folds": folds,
        "seed": seed,
        "events_per_fold": [int(v) for v in fold_loads(assignment, lengths, folds)],
        "assignment": {t.patient_id: int(f) for t, f in zip(trajs, assignment)},
    }
