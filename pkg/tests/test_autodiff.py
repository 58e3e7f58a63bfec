"""Gradient engine checks: hand-derived oracles and finite differences."""
import numpy as np
import pytest

from ibuq.autodiff import Tensor, concat, constant, gaussian_log_prob, parameter
from ibuq.nets import DenseNet, gradient
from ibuq.seeding import new_rng


def fd_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function of one array."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x)
        flat[i] = orig - h
        fm = f(x)
        flat[i] = orig
        gf[i] = (fp - fm) / (2 * h)
    return g


def test_quadratic_weight_gradient():
    # loss = 0.5 ||W x||^2 at W = I, x = (1, 0) -> dL/dW = x x^T
    w = parameter(np.eye(2))
    x = constant(np.array([[1.0, 0.0]]))
    loss = (x @ w.transpose()).square().sum().times(0.5)
    loss.backward()
    np.testing.assert_allclose(w.grad, np.array([[1.0, 0.0], [0.0, 0.0]]), atol=1e-12)


def test_constant_loss_zero_gradients():
    w = parameter(np.ones((3, 2)))
    loss = constant(5.0) + w.sum().times(0.0)
    loss.backward()
    np.testing.assert_array_equal(w.grad, np.zeros((3, 2)))


def test_dense_net_gradient_vs_finite_differences():
    rng = new_rng(0)
    net = DenseNet([2, 8, 1], "tanh", rng)
    x = rng.normal(size=(5, 2))

    def loss_fn(_params):
        return net(constant(x)).square().sum()

    grads = gradient(loss_fn, net.params())
    for name, p in net.params().items():
        def scalar(arr, p=p):
            old = p.data.copy()
            p.data[...] = arr
            val = loss_fn(None).item()
            p.data[...] = old
            return val

        num = fd_grad(scalar, p.data.copy())
        denom = np.maximum(np.abs(num), 1e-8)
        rel = np.abs(grads[name] - num) / denom
        assert rel.max() < 1e-4, f"{name}: max rel err {rel.max():.2e}"


@pytest.mark.parametrize("op", ["sigmoid", "exp", "log", "tanh", "square"])
def test_elementwise_op_gradients(op):
    rng = new_rng(3)
    base = rng.uniform(0.5, 1.5, size=(4, 3))
    p = parameter(base.copy())
    loss = getattr(p, op)().sum()
    loss.backward()

    def scalar(arr):
        return getattr(constant(arr), op)().sum().item()

    num = fd_grad(scalar, base.copy())
    np.testing.assert_allclose(p.grad, num, rtol=1e-6, atol=1e-8)


def test_broadcast_add_unbroadcasts_gradient():
    a = parameter(np.zeros((4, 3)))
    b = parameter(np.zeros(3))
    (a + b).sum().backward()
    np.testing.assert_array_equal(a.grad, np.ones((4, 3)))
    np.testing.assert_array_equal(b.grad, np.full(3, 4.0))


def test_getitem_routes_gradient():
    p = parameter(np.arange(6.0).reshape(2, 3))
    p[:, 1:].sum().backward()
    expect = np.array([[0.0, 1.0, 1.0], [0.0, 1.0, 1.0]])
    np.testing.assert_array_equal(p.grad, expect)


def test_concat_splits_gradient():
    a = parameter(np.ones((2, 2)))
    b = parameter(np.ones((2, 3)))
    out = concat([a, b], axis=1)
    out.times(2.0).sum().backward()
    np.testing.assert_array_equal(a.grad, np.full((2, 2), 2.0))
    np.testing.assert_array_equal(b.grad, np.full((2, 3), 2.0))


def test_clip_min_gradient_mask():
    p = parameter(np.array([-1.0, 0.5, 2.0]))
    p.clip_min(0.0).sum().backward()
    np.testing.assert_array_equal(p.grad, np.array([0.0, 1.0, 1.0]))


def test_gaussian_log_prob_matches_scipy_formula():
    x = np.array([[0.3, -1.2]])
    mean = np.array([[0.1, 0.4]])
    std = np.array([[0.7, 1.3]])
    got = gaussian_log_prob(constant(x), constant(mean), constant(std)).item()
    want = float(np.sum(-0.5 * np.log(2 * np.pi * std**2)
                        - (x - mean) ** 2 / (2 * std**2)))
    assert got == pytest.approx(want, abs=1e-12)


def test_gaussian_log_prob_gradients():
    rng = new_rng(9)
    xv = rng.normal(size=(3, 2))
    mv = rng.normal(size=(3, 2))
    sv = rng.uniform(0.5, 1.5, size=(3, 2))
    mean = parameter(mv.copy())
    std = parameter(sv.copy())
    gaussian_log_prob(constant(xv), mean, std).sum().backward()

    num_m = fd_grad(lambda a: gaussian_log_prob(
        constant(xv), constant(a), constant(sv)).sum().item(), mv.copy())
    num_s = fd_grad(lambda a: gaussian_log_prob(
        constant(xv), constant(mv), constant(a)).sum().item(), sv.copy())
    np.testing.assert_allclose(mean.grad, num_m, rtol=1e-6, atol=1e-8)
    np.testing.assert_allclose(std.grad, num_s, rtol=1e-6, atol=1e-8)


def test_non_finite_loss_reports_value():
    params = {"w": parameter(np.array([0.0]))}
    with np.errstate(divide="ignore"):
        with pytest.raises(FloatingPointError, match="not finite"):
            gradient(lambda ps: ps["w"].log().sum(), params)
