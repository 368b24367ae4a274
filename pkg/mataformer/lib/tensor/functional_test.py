import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mataformer.errors import NumericalError, ShapeError
from mataformer.lib.tensor import Tensor, grad_check, rmsnorm, silu, softmax_lastdim

finite_rows = st.lists(
    st.floats(min_value=-30, max_value=30, allow_nan=False), min_size=1, max_size=9
)


@pytest.mark.parametrize(
    "x,expected",
    [
        ([0.0, 0.0, 0.0], [1 / 3, 1 / 3, 1 / 3]),
        ([0.0, -np.inf, -np.inf], [1.0, 0.0, 0.0]),
        ([1.0, 2.0, 3.0], [0.09003, 0.24473, 0.66524]),
    ],
)
def test_softmax_examples(x, expected):
    out = softmax_lastdim(np.array(x)).data
    assert np.allclose(out, expected, atol=1e-5)


def test_softmax_fully_masked_slice_is_zero():
    x = np.array([[-np.inf, -np.inf], [0.0, 1.0]])
    out = softmax_lastdim(x).data
    assert np.array_equal(out[0], [0.0, 0.0]), "all -inf slice should give zeros, not NaN"
    assert math.isclose(out[1].sum(), 1.0, abs_tol=1e-12)


def test_softmax_rejects_nan():
    with pytest.raises(NumericalError):
        softmax_lastdim(np.array([0.0, np.nan]))


@given(finite_rows)
def test_softmax_sums_to_one(row):
    out = softmax_lastdim(np.array(row, dtype=np.float64)).data
    assert abs(out.sum() - 1.0) < 1e-12
    assert (out >= 0).all()


def test_softmax_gradient_with_mask():
    mask = np.array([0.0, -np.inf, 0.0, 0.0])
    weights = np.array([0.3, -1.0, 2.0, 0.5])

    def f(x):
        return (softmax_lastdim(x + mask) * weights).sum()

    report = grad_check(f, np.array([0.1, 0.4, -0.3, 0.8]))
    assert report.passed, f"softmax grad mismatch at {report.worst}: {report.max_rel_error}"


def test_rmsnorm_examples():
    const = rmsnorm(np.full(4, 2.5), np.ones(4), eps=1e-12).data
    assert np.allclose(const, 1.0, atol=1e-12), "constant vector normalizes to the gain"

    out = rmsnorm(np.array([3.0, 4.0]), np.ones(2), eps=1e-12).data
    assert np.allclose(out, [0.84853, 1.13137], atol=1e-5)

    zero = rmsnorm(np.array([3.0, 4.0]), np.zeros(2), eps=1e-6).data
    assert np.array_equal(zero, [0.0, 0.0])


def test_rmsnorm_shape_mismatch():
    with pytest.raises(ShapeError):
        rmsnorm(np.ones((2, 3)), np.ones(4))


@pytest.mark.parametrize("eps", [0.0, -1e-6, float("nan")])
def test_rmsnorm_rejects_nonpositive_eps(eps):
    with pytest.raises(ValueError, match="eps must be positive"):
        rmsnorm(np.ones((2, 3)), np.ones(3), eps=eps)


def test_rmsnorm_zero_slice_stays_finite():
    out = rmsnorm(np.zeros((1, 4)), np.ones(4), eps=1e-6).data
    assert np.array_equal(out, np.zeros((1, 4)))


@settings(max_examples=50)
@given(finite_rows, st.floats(min_value=-4, max_value=4, allow_nan=False))
def test_rmsnorm_gain_scale_equivariance(row, c):
    x = np.array(row)
    g = np.linspace(0.5, 1.5, len(row))
    left = rmsnorm(x, c * g, eps=1e-6).data
    right = c * rmsnorm(x, g, eps=1e-6).data
    assert np.allclose(left, right, rtol=1e-12, atol=1e-12)


def test_rmsnorm_gradients():
    rng = np.random.default_rng(3)
    x0 = rng.normal(size=(2, 5))
    gain = Tensor(rng.normal(size=5), requires_grad=True)
    w = rng.normal(size=(2, 5))

    report = grad_check(lambda x: (rmsnorm(x, gain.detach()) * w).sum(), x0)
    assert report.passed, report

    report = grad_check(lambda g: (rmsnorm(Tensor(x0), g) * w).sum(), gain.data)
    assert report.passed, report


@pytest.mark.parametrize("x,expected", [(0.0, 0.0), (1.0, 0.73106), (-1.0, -0.26894)])
def test_silu_examples(x, expected):
    assert math.isclose(silu(np.array([x])).data[0], expected, abs_tol=1e-5)


@given(st.floats(min_value=-40, max_value=40, allow_nan=False))
def test_silu_odd_part_identity(x):
    sig = 1.0 / (1.0 + math.exp(-x))
    lhs = silu(np.array([x])).data[0] - silu(np.array([-x])).data[0]
    assert abs(lhs - x * (2.0 * sig - 1.0)) < 1e-12


def test_silu_gradient():
    report = grad_check(lambda x: silu(x).sum(), np.linspace(-3, 3, 7))
    assert report.passed, report
