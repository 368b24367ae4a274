import numpy as np
import pytest

from mataformer.errors import ShapeError
from mataformer.lib.tensor import Tensor, concat, grad_check, no_grad


def test_data_and_grad_shapes_match():
    w = Tensor(np.ones((3, 1)), requires_grad=True)
    x = Tensor(np.arange(6.0).reshape(2, 3))
    (x @ w + 1.0).sum().backward()
    assert w.grad is not None and w.grad.shape == w.shape
    assert np.array_equal(w.grad[:, 0], [3.0, 5.0, 7.0])


def test_broadcast_gradient_is_reduced():
    bias = Tensor(np.zeros(4), requires_grad=True)
    x = Tensor(np.ones((2, 3, 4)))
    (x + bias).sum().backward()
    assert np.array_equal(bias.grad, np.full(4, 6.0)), "broadcast axes should be summed"


def test_backward_requires_scalar_or_seed():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()
    (x * 2.0).backward(np.ones(3))
    assert np.array_equal(x.grad, [2.0, 2.0, 2.0])


def test_no_grad_records_nothing():
    x = Tensor(np.ones(2), requires_grad=True)
    with no_grad():
        y = x * 3.0
    assert not y.requires_grad


def test_matmul_rejects_vectors():
    with pytest.raises(ShapeError):
        Tensor(np.ones(3)) @ Tensor(np.ones((3, 2)))


def test_composite_gradients():
    rng = np.random.default_rng(0)
    w = rng.normal(size=(2, 4, 3))

    def f(x):
        y = (x.reshape(2, 3, 4).swapaxes(-1, -2) * w).tanh()
        z = concat([y[:, :2], y[:, 2:].sigmoid()], axis=1)
        return (z.exp() / (1.0 + z.abs())).mean() + (x**2).sum() * 0.1

    report = grad_check(f, rng.normal(size=24))
    assert report.passed, f"{report.worst}: {report.max_rel_error}"


def test_clamp_gradient_is_zero_outside_range():
    x = Tensor(np.array([-1.0, 0.5, 3.0]), requires_grad=True)
    x.clamp(0.0, 2.5).sum().backward()
    assert np.array_equal(x.grad, [0.0, 1.0, 0.0])
