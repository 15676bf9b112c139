import numpy as np
import pytest

from ofdmemu.nn.autodiff import Tensor
from ofdmemu.nn.gradcheck import GradCheckError, grad_check
from ofdmemu.nn.layers import Dense


def test_passes_on_correct_gradients(rng):
    d = Dense(5, 3, rng)
    x = Tensor(rng.normal(size=(4, 5)))
    report = grad_check(lambda: (d(x).tanh() * d(x).tanh()).sum(), d.named_parameters())
    assert report.passed(1e-4)
    assert report.worst is not None
    assert len(report.entries) > 0


def test_catches_wrong_backward(rng):
    x = Tensor(rng.normal(size=4), requires_grad=True)

    def broken_square(t):
        # forward is x^2 but backward claims d/dx = 3x
        def backward(g):
            t._accum(g * 3.0 * t.data)

        return Tensor._node(t.data**2, (t,), backward)

    report = grad_check(lambda: broken_square(x).sum(), [("x", x)])
    assert not report.passed(1e-4)
    assert report.max_rel_error > 0.1


def test_rejects_vector_loss(rng):
    x = Tensor(rng.normal(size=4), requires_grad=True)
    with pytest.raises(GradCheckError):
        grad_check(lambda: x * 2.0, [("x", x)])


def test_rejects_non_finite_gradient(rng):
    x = Tensor(np.array([0.0, 1.0]), requires_grad=True)
    # 1/x at zero: backward produces inf
    with np.errstate(divide="ignore"):
        with pytest.raises(GradCheckError):
            grad_check(lambda: (Tensor(np.ones(2)) / x).sum(), [("x", x)])


def test_unused_parameter_counts_as_zero_grad(rng):
    used = Tensor(rng.normal(size=3), requires_grad=True)
    unused = Tensor(rng.normal(size=3), requires_grad=True)
    report = grad_check(
        lambda: (used * used).sum(), [("used", used), ("unused", unused)]
    )
    assert report.passed(1e-4)


def test_duplicate_parameter_names_allowed(rng):
    # composed modules can expose the same local names; entries must not collide
    a = Dense(3, 3, rng)
    b = Dense(3, 3, np.random.default_rng(7))
    x = Tensor(rng.normal(size=(2, 3)))
    params = a.named_parameters() + b.named_parameters()
    assert [n for n, _ in params] == ["weight", "bias", "weight", "bias"]
    report = grad_check(lambda: b(a(x).tanh()).square().sum(), params)
    assert report.passed(1e-4)


def test_deterministic_sampling(rng):
    d = Dense(30, 20, rng)
    x = Tensor(rng.normal(size=(2, 30)))
    r1 = grad_check(lambda: d(x).square().sum(), d.named_parameters(), seed=5)
    r2 = grad_check(lambda: d(x).square().sum(), d.named_parameters(), seed=5)
    assert [e.index for e in r1.entries] == [e.index for e in r2.entries]
