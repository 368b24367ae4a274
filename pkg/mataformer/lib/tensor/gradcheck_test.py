import numpy as np

from mataformer.lib.tensor import Tensor, grad_check, grad_check_parameters


def test_quadratic_is_exact():
    report = grad_check(lambda x: (x * x).sum(), np.array([1.0, 2.0]))
    assert report.passed
    assert report.max_rel_error < 1e-8, report
    assert report.checked == 2


def test_pinned_clamp_is_reported_and_excluded():
    def f(x):
        return (x.clamp(1e-4, 2.5) * x).sum()

    report = grad_check(f, np.array([2.5, 1.0]))
    assert report.kinks == ["x[0]"], "alpha pinned at the 2.5 ceiling is a kink"
    assert report.checked == 1
    assert report.passed, "kinks are excluded from pass/fail"


def test_nan_gradient_fails_with_location():
    report = grad_check(lambda x: x.log().sum(), np.array([1.0, -1.0]))
    assert not report.passed
    assert "x[1]" in report.nan_locations


def test_parameters_are_restored():
    w = Tensor(np.array([[0.5, -0.2], [0.3, 0.1]]), requires_grad=True)
    x = Tensor(np.array([[1.0, 2.0]]))
    before = w.data.copy()

    report = grad_check_parameters(lambda: ((x @ w).tanh() ** 2).sum(), [("w", w)])
    assert report.passed, report
    assert report.checked == 4
    assert np.array_equal(w.data, before), "perturbations must be undone"
    assert w.grad is None


def test_compared_counts_per_parameter():
    w = Tensor(np.array([[0.5, -0.2], [0.3, 0.1]]), requires_grad=True)
    pinned = Tensor(np.array([2.5]), requires_grad=True)
    x = Tensor(np.array([[1.0, 2.0]]))

    def loss():
        return ((x @ w).tanh() ** 2).sum() + (pinned.clamp(1e-4, 2.5) * pinned).sum()

    report = grad_check_parameters(loss, [("w", w), ("pinned", pinned)], max_per_parameter=3)
    assert report.compared == {"w": 3, "pinned": 0}, "a parameter that only hit kinks counts zero"
    assert report.checked == sum(report.compared.values())
    assert report.kinks == ["pinned[0]"]


def test_merge_sums_compared():
    a = grad_check(lambda x: (x * x).sum(), np.array([1.0, 2.0]))
    b = grad_check(lambda x: (x * x * x).sum(), np.array([1.0]))
    assert a.merge(b).compared == {"x": 3}
