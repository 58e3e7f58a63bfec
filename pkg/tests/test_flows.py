"""Coupling flows: bijectivity, log-det oracles, density normalization, GIN."""
import numpy as np
import pytest

from ibuq.autodiff import constant
from ibuq.flows import (CouplingLayer, FlowFitConfig, GINModel, RealNVPFlow,
                        fit_flow, gin_fit, gin_sample)
from ibuq.optim import LRSchedule
from ibuq.seeding import new_rng


def make_flow(dim, n_layers=4, hidden=16, seed=0, scramble=True, **kw):
    flow = RealNVPFlow(dim, n_layers=n_layers, hidden=hidden, rng=new_rng(seed), **kw)
    if scramble:
        # output layers start at zero (identity map); randomize for harder checks
        rng = new_rng(seed + 1)
        for layer in flow.layers:
            for net in (layer.s_net, layer.t_net):
                net.weights[-1].data[:] = rng.normal(size=net.weights[-1].shape) * 0.3
                net.biases[-1].data[:] = rng.normal(size=net.biases[-1].shape) * 0.3
    return flow


def test_identity_coupling_is_identity():
    flow = RealNVPFlow(4, n_layers=3, hidden=8, rng=new_rng(0))
    z = new_rng(1).normal(size=(10, 4))
    x, logdet = flow.forward_map(constant(z))
    np.testing.assert_array_equal(x.data, z)
    np.testing.assert_array_equal(logdet.data, np.zeros(10))


def test_constant_scale_shift_layer():
    # one layer, d=1, s = c and t = 0 on the active block: (a, b) -> (a, b e^c)
    layer = CouplingLayer(2, 1, parity=False, hidden=4, rng=new_rng(0))
    c = 0.7
    for net in (layer.s_net, layer.t_net):
        net.weights[0].data[:] = 0.0
        net.biases[0].data[:] = 0.0
        net.weights[1].data[:] = 0.0
    # soft_clip is bound * tanh(x / bound): pick the preimage giving s = c
    raw = layer.s_bound * np.arctanh(c / layer.s_bound)
    layer.s_net.biases[1].data[:] = raw
    layer.t_net.biases[1].data[:] = 0.0
    z = np.array([[1.3, -0.4]])
    x, logdet = layer.forward(constant(z))
    assert x.data[0, 0] == pytest.approx(1.3)
    assert x.data[0, 1] == pytest.approx(-0.4 * np.exp(c))
    assert logdet.data[0] == pytest.approx(c)
    # inverse with t = 1: x = (a, b) -> (a, (b - 1) e^{-c})
    layer.t_net.biases[1].data[:] = 1.0
    back, ld_inv = layer.inverse(constant(np.array([[1.3, -0.4]])))
    assert back.data[0, 1] == pytest.approx((-0.4 - 1.0) * np.exp(-c))
    assert ld_inv.data[0] == pytest.approx(-c)


def test_round_trip_thousand_points():
    flow = make_flow(6, n_layers=6, hidden=16, seed=3)
    z = new_rng(4).normal(size=(1000, 6))
    x, ld_f = flow.forward_map(constant(z))
    back, ld_i = flow.inverse_map(x)
    assert np.abs(back.data - z).max() < 1e-10
    assert np.abs(ld_f.data + ld_i.data).max() < 1e-10
    # and the other direction
    xx, _ = flow.forward_map(flow.inverse_map(constant(z))[0])
    assert np.abs(xx.data - z).max() < 1e-10


def test_logdet_matches_numerical_jacobian():
    flow = make_flow(4, n_layers=4, hidden=8, seed=7)
    z0 = new_rng(8).normal(size=4)
    _, logdet = flow.forward_map(constant(z0))
    h = 1e-6
    jac = np.zeros((4, 4))
    for j in range(4):
        zp, zm = z0.copy(), z0.copy()
        zp[j] += h
        zm[j] -= h
        fp, _ = flow.forward_map(constant(zp))
        fm, _ = flow.forward_map(constant(zm))
        jac[:, j] = (fp.data - fm.data) / (2 * h)
    sign, want = np.linalg.slogdet(jac)
    assert sign > 0
    assert logdet.item() == pytest.approx(want, abs=1e-6)


def test_log_prob_standard_normal_at_origin():
    flow = RealNVPFlow(2, n_layers=2, hidden=4, rng=new_rng(0))
    got = flow.log_prob(constant(np.zeros(2))).item()
    assert got == pytest.approx(-np.log(2 * np.pi), abs=1e-12)


def test_log_prob_linear_change_of_variables():
    # x = 2 z via a base std of 2: p_X(x) = N(x; 0, 4), checked in closed form
    flow = RealNVPFlow(2, n_layers=2, hidden=4, rng=new_rng(0))
    flow.base_logvar.data[:] = np.log(4.0)
    x = np.array([1.1, -0.7])
    want = float(np.sum(-0.5 * np.log(2 * np.pi * 4.0) - x**2 / 8.0))
    assert flow.log_prob(constant(x)).item() == pytest.approx(want, abs=1e-10)


def test_density_normalizes_by_quadrature():
    flow = make_flow(2, n_layers=4, hidden=8, seed=11)
    grid = np.linspace(-10, 10, 201)
    xx, yy = np.meshgrid(grid, grid, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    ll = flow.log_prob(constant(pts)).data
    mass = np.exp(ll).sum() * (grid[1] - grid[0]) ** 2
    assert 0.99 <= mass <= 1.01


def test_fit_flow_gaussian_entropy_oracle():
    rng = new_rng(21)
    data = rng.normal(size=(2000, 2))
    flow = RealNVPFlow(2, n_layers=4, hidden=32, rng=new_rng(2))
    cfg = FlowFitConfig(iterations=200, batch_size=256,
                        schedule=LRSchedule(1e-2, 0.1, 150), seed=5)
    fit_flow(flow, data, cfg)
    ll = flow.log_prob(constant(data)).data.mean()
    want = -np.log(2 * np.pi * np.e)  # analytic entropy of N(0, I_2)
    assert abs(ll - want) < 0.1


def test_gin_volume_preservation_any_parameters():
    gin = GINModel(2, n_layers=4, hidden=8, rng=new_rng(1))
    rng = new_rng(2)
    for layer in gin.flow.layers:
        for net in (layer.s_net, layer.t_net):
            for p in list(net.weights) + list(net.biases):
                p.data[:] = rng.normal(size=p.data.shape)
    z = rng.normal(size=(100, 2))
    _, logdet = gin.flow.forward_map(constant(z))
    assert np.abs(logdet.data).max() < 1e-8


def test_gin_fit_recovers_gaussian_variance():
    rng = new_rng(3)
    data = rng.normal(size=(2000, 2)) * np.array([2.0, 0.5]) + np.array([1.0, -3.0])
    gin = GINModel(2, n_layers=4, hidden=16, rng=new_rng(4))
    gin_fit(gin, data, FlowFitConfig(seed=6))
    # volume preservation forces all variance into the base covariance
    np.testing.assert_allclose(np.exp(gin.flow.base_logvar.data), [4.0, 0.25],
                               rtol=0.1)
    samples = gin_sample(gin, 10_000, 1.0, new_rng(7))
    np.testing.assert_allclose(samples.var(axis=0), [4.0, 0.25], rtol=0.2)
    np.testing.assert_allclose(samples.mean(axis=0), [1.0, -3.0], atol=0.25)


def test_gin_temperature_scales_covariance():
    # identity flow: tau-sampling covariance is exactly tau * base variance
    gin = GINModel(2, n_layers=2, hidden=4, rng=new_rng(0))
    gin.flow.base_logvar.data[:] = np.log(4.0)
    for tau, want in ((1.0, 4.0), (16.0, 64.0)):
        s = gin_sample(gin, 10_000, tau, new_rng(9))
        np.testing.assert_allclose(s.var(axis=0), want, rtol=0.1)


def test_gin_sample_validates_tau_and_empty_draw():
    gin = GINModel(2, n_layers=2, hidden=4, rng=new_rng(0))
    with pytest.raises(ValueError, match="tau"):
        gin_sample(gin, 10, 0.0, new_rng(0))
    assert gin_sample(gin, 0, 1.0, new_rng(0)).shape == (0, 2)


def test_gin_pads_one_dimensional_data():
    rng = new_rng(12)
    data = rng.normal(size=(500, 1)) * 3.0
    gin = GINModel(1, n_layers=2, hidden=8, rng=new_rng(13))
    assert gin.pad_dims == 1 and gin.dim == 2
    gin_fit(gin, data, FlowFitConfig(iterations=100, batch_size=128,
                                     schedule=LRSchedule(1e-2, 1.0, 100), seed=1))
    s = gin_sample(gin, 5000, 1.0, new_rng(14))
    assert s.shape == (5000, 1)
    assert abs(s.std() - 3.0) / 3.0 < 0.2


def test_fit_flow_degenerate_coordinate_warns_and_jitters():
    data = np.column_stack([np.full(100, 2.0), np.linspace(-1, 1, 100)])
    flow = RealNVPFlow(2, n_layers=2, hidden=8, rng=new_rng(5))
    with pytest.warns(UserWarning, match="zero-variance"):
        fit_flow(flow, data, FlowFitConfig(iterations=10, batch_size=64,
                                           schedule=LRSchedule(1e-3, 1.0, 10), seed=2))


def test_flow_rejects_one_dimension():
    with pytest.raises(ValueError, match="dim"):
        RealNVPFlow(1, n_layers=2, hidden=4, rng=new_rng(0))
