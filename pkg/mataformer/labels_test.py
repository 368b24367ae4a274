import math

import numpy as np
import pytest

from mataformer.errors import DataError
from mataformer.events import EventRecord, Trajectory
from mataformer.labels import (
    RiskInterval,
    SoftLabelMatrix,
    binarize,
    build_label_matrix,
    displacement,
    dump_intervals,
    label_cohort,
    load_intervals,
    load_label_archive,
    save_label_archive,
    soft_label,
)
from mataformer.testing import psl_brute_force, random_times


def _trajectory(times, pid="p") -> Trajectory:
    return Trajectory(
        patient_id=pid,
        events=[EventRecord(patient_id=pid, t=int(t), category="Lab Test", text="x") for t in times],
    )


def _interval(start, end, risk=0, pid="p") -> RiskInterval:
    return RiskInterval(patient_id=pid, risk=risk, t_start=start, t_end=end)


@pytest.mark.parametrize(
    "t, expected",
    [
        (5000, 0.0),
        (3600, 0.0),
        (7200, 0.0),
        (0, 1.0),
        (7200 + 3 * 3600, 3.0),
    ],
)
def test_displacement(t, expected):
    assert displacement(t, _interval(3600, 7200)) == expected


def test_soft_label_examples():
    assert soft_label(0.0, 6) == 1.0
    assert soft_label(6.0, 6) == pytest.approx(math.exp(-0.5), abs=1e-15)
    assert soft_label(12.0, 6) == pytest.approx(0.1353353, abs=1e-7)
    assert soft_label(24.0, 48) == pytest.approx(0.8824969, abs=1e-7)
    with pytest.raises(ValueError):
        soft_label(1.0, 0)


def test_plateau_is_exactly_one():
    traj = _trajectory([0, 3600, 5400, 7200, 20000])
    matrix = build_label_matrix(traj, [_interval(3600, 7200)], n_risks=2, horizons=(6, 12))
    assert (matrix.values[1:4, 0, :] == 1.0).all()
    assert (matrix.values[:, 1, :] == 0.0).all(), "risks without intervals stay 0"
    assert (matrix.values[0, 0] < 1.0).all()


def test_overlapping_intervals_take_the_nearest():
    traj = _trajectory([0])
    far, near = _interval(10 * 3600, 11 * 3600), _interval(2 * 3600, 3 * 3600)
    matrix = build_label_matrix(traj, [far, near], n_risks=1, horizons=(6,))
    assert matrix.values[0, 0, 0] == pytest.approx(soft_label(2.0, 6))


def test_matches_brute_force_oracle():
    rng = np.random.default_rng(99)
    horizons = (6, 12, 24, 48)
    for _ in range(200):
        times = random_times(rng, int(rng.integers(1, 30)), spread=400_000)
        intervals = []
        for _ in range(int(rng.integers(0, 6))):
            start = int(rng.integers(0, 400_000))
            intervals.append(_interval(start, start + int(rng.integers(0, 40_000)), risk=int(rng.integers(0, 3))))
        got = build_label_matrix(_trajectory(times), intervals, 3, horizons).values
        want = psl_brute_force(times.tolist(), intervals, 3, horizons)
        assert np.abs(got - want).max() < 1e-12


def test_risk_out_of_range():
    with pytest.raises(DataError):
        build_label_matrix(_trajectory([0]), [_interval(0, 1, risk=3)], n_risks=3)


def test_interval_validation():
    with pytest.raises(DataError):
        _interval(10, 5)
    with pytest.raises(DataError):
        _interval(0, 5, risk=-1)


def test_binarize():
    y = np.array([0.2, 0.5, 0.51, 1.0])
    assert binarize(y, 0.5).tolist() == [0, 0, 1, 1]
    for beta in (0.0, 1.0, -0.1):
        with pytest.raises(ValueError):
            binarize(y, beta)


def test_soft_label_matrix_shape_check():
    with pytest.raises(DataError):
        SoftLabelMatrix(values=np.zeros((2, 3, 2)), horizons=(6, 12, 24))


def test_interval_file_round_trip(tmp_path):
    intervals = [_interval(0, 10, 1, "a"), _interval(5, 5, 0, "b")]
    path = tmp_path / "intervals.jsonl"
    dump_intervals(intervals, path)
    assert load_intervals(path) == intervals


def test_interval_file_errors_carry_line(tmp_path):
    path = tmp_path / "intervals.jsonl"
    path.write_text('{"patient_id": "a", "risk": 0, "t_start": 0, "t_end": 1}\n{"patient_id": "a", "risk": 0}\n')
    with pytest.raises(DataError) as err:
        load_intervals(path)
    assert err.value.line == 2


def test_interval_file_invalid_utf8(tmp_path):
    path = tmp_path / "intervals.jsonl"
    path.write_bytes(b'{"patient_id": "\xc3(", "risk": 0, "t_start": 0, "t_end": 1}\n')
    with pytest.raises(DataError) as err:
        load_intervals(path)
    assert err.value.line == 1
    assert "invalid UTF-8" in err.value.reason


def test_label_archive(tmp_path):
    trajs = [_trajectory([0, 3600], "a"), _trajectory([100], "b")]
    labels = label_cohort(trajs, [_interval(0, 10, 0, "a")], n_risks=2, horizons=(6, 12))
    path = tmp_path / "labels.npz"
    save_label_archive(path, labels)
    loaded = load_label_archive(path)
    assert list(loaded) == ["a", "b"]
    for pid, matrix in labels.items():
        assert loaded[pid].horizons == (6, 12)
        assert np.array_equal(loaded[pid].values, matrix.values)
