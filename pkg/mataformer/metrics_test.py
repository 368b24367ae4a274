import numpy as np
import pytest
from sklearn.metrics import average_precision_score, roc_auc_score

from mataformer.metrics import (
    aggregate,
    auroc,
    average_precision,
    beta_sweep,
    brier_score,
    evaluate,
    event_precision_at_k,
    micro_average_precision,
    parse_sweep,
    precision_at_k,
    sample_average_precision,
    signal_noise_separation,
)
from mataformer.testing import (
    auroc_oracle,
    average_precision_oracle,
    brier_oracle,
    precision_at_k_oracle,
)


def test_average_precision_examples():
    assert average_precision([0.9, 0.8, 0.1], [1, 1, 0]) == 1.0
    assert average_precision([0.9, 0.8, 0.7], [1, 0, 1]) == pytest.approx(5 / 6, abs=1e-12)
    assert average_precision([0.3] * 8, [1, 0, 0, 1, 0, 1, 0, 0]) == pytest.approx(3 / 8)
    assert average_precision([0.1, 0.2], [0, 0]) is None


def test_auroc_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([1, 2, 3, 4], [0, 1, 0, 1]) == 0.75
    assert auroc([1, 2], [1, 1]) is None


def test_auroc_of_unrelated_scores_is_half():
    rng = np.random.default_rng(0)
    scores = rng.uniform(size=10_000)
    labels = rng.integers(0, 2, 10_000)
    assert abs(auroc(scores, labels) - 0.5) < 0.02


def test_precision_at_k_examples():
    assert precision_at_k([0.9, 0.8, 0.1], [1, 0, 1], 1) == 1.0
    assert precision_at_k([0.9, 0.8, 0.1], [1, 0, 1], 2) == 0.5
    assert precision_at_k([0.2, 0.4, 0.6], [1, 1, 1], 2) == 1.0
    # tie straddling the cut: the earlier index ranks first
    assert precision_at_k([0.5, 0.5, 0.1], [0, 1, 1], 1) == 0.0
    assert precision_at_k([0.5, 0.5, 0.1], [1, 0, 1], 1) == 1.0
    with pytest.raises(ValueError):
        precision_at_k([0.1, 0.2], [0, 1], 3)


def test_brier_examples():
    labels = np.array([1, 0, 0, 0, 1, 0, 0, 0, 0, 0])
    assert brier_score(labels.astype(float), labels) == 0.0
    assert brier_score(np.full(10, 0.5), labels) == pytest.approx(0.25)
    prevalence = labels.mean()
    assert brier_score(np.full(10, prevalence), labels) == pytest.approx(prevalence * (1 - prevalence))


def test_metrics_match_oracles():
    rng = np.random.default_rng(1234)
    for trial in range(500):
        n = int(rng.integers(2, 201))
        # a small score alphabet forces ties
        scores = rng.integers(0, rng.integers(2, 30), n) / 7.0
        labels = (rng.uniform(size=n) < rng.uniform(0.05, 0.6)).astype(int)

        ap = average_precision(scores, labels)
        if labels.any():
            assert abs(ap - average_precision_oracle(scores.tolist(), labels.tolist())) < 1e-10
            assert abs(ap - average_precision_score(labels, scores)) < 1e-10
        else:
            assert ap is None

        roc = auroc(scores, labels)
        if 0 < labels.sum() < n:
            assert abs(roc - auroc_oracle(scores.tolist(), labels.tolist())) < 1e-12
            assert abs(roc - roc_auc_score(labels, scores)) < 1e-10

        k = int(rng.integers(1, n + 1))
        assert precision_at_k(scores, labels, k) == pytest.approx(
            precision_at_k_oracle(scores.tolist(), labels.tolist(), k), abs=1e-12
        )
        pred = rng.uniform(size=n)
        assert abs(brier_score(pred, labels) - brier_oracle(pred.tolist(), labels.tolist())) < 1e-10


def test_monotone_transform_invariance():
    rng = np.random.default_rng(3)
    scores = rng.uniform(size=60)
    labels = rng.integers(0, 2, 60)
    warped = np.exp(5 * scores) - 3
    assert average_precision(scores, labels) == pytest.approx(average_precision(warped, labels))
    assert auroc(scores, labels) == pytest.approx(auroc(warped, labels))
    assert precision_at_k(scores, labels, 7) == precision_at_k(warped, labels, 7)


def test_micro_and_sample_modes():
    rng = np.random.default_rng(5)
    pred = [rng.uniform(size=(4, 3, 2)), rng.uniform(size=(2, 3, 2))]
    labels = [np.zeros((4, 3, 2), dtype=int), np.zeros((2, 3, 2), dtype=int)]
    labels[0][1, 2, 0] = 1
    labels[1][0, 0, 1] = 1
    labels[1][0, 1, 1] = 1

    flat_pred = np.concatenate([p.ravel() for p in pred])
    flat_labels = np.concatenate([y.ravel() for y in labels])
    assert micro_average_precision(pred, labels) == pytest.approx(
        average_precision_oracle(flat_pred.tolist(), flat_labels.tolist())
    )

    per_event = [
        average_precision_oracle(pred[0][1].ravel().tolist(), labels[0][1].ravel().tolist()),
        average_precision_oracle(pred[1][0].ravel().tolist(), labels[1][0].ravel().tolist()),
    ]
    assert sample_average_precision(pred, labels) == pytest.approx(np.mean(per_event))
    assert sample_average_precision([np.zeros((2, 3, 2))], [np.zeros((2, 3, 2))]) is None


def test_event_precision_at_k_slices_over_risks():
    pred = np.array([[[0.9, 0.1], [0.8, 0.7], [0.1, 0.2]]])  # one event, 3 risks, 2 horizons
    labels = np.array([[[1, 0], [0, 0], [1, 0]]])
    # horizon 0 ranks risks (0, 1, 2); horizon 1 has no positive and is skipped
    assert event_precision_at_k(pred, labels, 1) == 1.0
    assert event_precision_at_k(pred, labels, 2) == 0.5


def test_evaluate_and_sweep():
    rng = np.random.default_rng(2)
    soft = rng.uniform(size=(30, 6, 4)) ** 6
    pred = np.clip(soft + rng.normal(0, 0.1, soft.shape), 1e-3, 1 - 1e-3)

    report = evaluate(pred, soft, 0.5)
    assert set(report) == {
        "sample_auprc",
        "micro_auprc",
        "auroc",
        "p_at_1",
        "p_at_5",
        "brier",
        "separation",
        "prevalence",
    }
    assert report["separation"] > 0

    rows = beta_sweep(pred, soft, parse_sweep("0.3:0.9:0.1"))
    assert [r["beta"] for r in rows] == [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
    prevalences = [r["prevalence"] for r in rows]
    assert all(a >= b for a, b in zip(prevalences, prevalences[1:])), "prevalence falls as beta rises"


@pytest.mark.parametrize(
    "spec",
    ["0:1:0.1", "0.5:1.0:0.25", "-0.2:0.4:0.2", "0.2:0.8", "0.8:0.2:0.1", "0.1:0.5:0", "nan:0.5:0.1"],
)
def test_parse_sweep_rejects(spec):
    with pytest.raises(ValueError):
        parse_sweep(spec)


def test_parse_sweep_keeps_thresholds_open():
    assert parse_sweep("0.25:0.75:0.25") == [0.25, 0.5, 0.75]
    assert parse_sweep("0.05:0.95:0.3") == pytest.approx([0.05, 0.35, 0.65, 0.95])


def test_separation_undefined_for_one_class():
    assert signal_noise_separation(np.ones((1, 2, 2)) * 0.3, np.zeros((1, 2, 2))) is None


def test_aggregate():
    out = aggregate([{"auroc": 0.6, "p_at_5": None}, {"auroc": 0.8, "p_at_5": 0.5}])
    assert out["auroc"]["mean"] == pytest.approx(0.7)
    assert out["auroc"]["std"] == pytest.approx(0.1)
    assert out["auroc"]["values"] == [0.6, 0.8]
    assert out["p_at_5"]["mean"] == 0.5
