"""Bottleneck components: gated encoder, Gaussian decoder, mixup, and the
two mutual-information surrogates, checked against hand values and
closed-form Gaussian KL oracles."""
import numpy as np
import pytest

from ibuq.autodiff import constant, gaussian_log_prob
from ibuq.flows import RealNVPFlow
from ibuq.ibcore import (Encoder, GaussianDecoder, IBModel, MixupConfig,
                         decoder_log_prob, encode_sample, encoder_log_prob,
                         estimate_iyz, estimate_izx, ib_loss, mixup_batch)
from ibuq.nets import DenseNet, gradient
from ibuq.seeding import new_rng

LOG_2PI = np.log(2.0 * np.pi)


def zero_encoder(d_x=1, d_z=1, hidden=(8,)):
    widths = [d_x, *hidden, d_z]
    return Encoder(DenseNet(widths, init="zeros"), DenseNet(widths, init="zeros"))


def small_model(seed=0, d_x=1, d_z=4, d_y=1, hidden=(8,), beta=0.3,
                zero_nets=False):
    rng = new_rng(seed)
    init = "zeros" if zero_nets else "xavier-normal"
    kw = {} if zero_nets else {"rng": rng}
    enc = Encoder(DenseNet([d_x, *hidden, d_z], init=init, **kw),
                  DenseNet([d_x, *hidden, d_z], init=init, **kw))
    dec = GaussianDecoder(DenseNet([d_z, *hidden, 2 * d_y], init=init, **kw))
    flow = RealNVPFlow(d_z, n_layers=2, hidden=16, rng=rng)
    return IBModel(enc, dec, flow, beta)


def test_gate_zero_init_is_half():
    enc = zero_encoder()
    m = enc.gate(constant(np.array([[0.7]])))
    assert m.data[0, 0] == pytest.approx(0.5, abs=1e-15)


def test_gate_saturates_at_eps_bounds():
    enc = zero_encoder(d_z=2)
    enc.m_net.biases[-1].data[:] = [500.0, -500.0]
    m = enc.gate(constant(np.array([[0.0]])))
    assert m.data[0, 0] == pytest.approx(1.0 - 1e-3, abs=1e-12)
    assert m.data[0, 1] == pytest.approx(1e-3, abs=1e-12)


def test_encoder_latent_dim_mismatch():
    rng = new_rng(0)
    with pytest.raises(ValueError, match="latent dimension"):
        Encoder(DenseNet([1, 4, 3], rng=rng), DenseNet([1, 4, 2], rng=rng))


def test_encode_sample_zero_init_moments():
    # m = 0.5, zbar = 0 so z = 0.5 * z0, a N(0, 0.25) draw per dim
    enc = zero_encoder(d_z=3)
    x = np.zeros((4000, 1))
    z, m = encode_sample(enc, x, new_rng(1))
    assert np.all(m.data == m.data[0, 0])
    assert z.data.std() == pytest.approx(0.5, rel=0.05)
    assert abs(z.data.mean()) < 0.02


def test_encode_sample_deterministic_and_squeeze():
    enc = zero_encoder(d_z=3)
    x = np.array([[0.2], [0.4]])
    z1, _ = encode_sample(enc, x, new_rng(9))
    z2, _ = encode_sample(enc, x, new_rng(9))
    np.testing.assert_array_equal(z1.data, z2.data)
    z1d, m1d = encode_sample(enc, np.array([0.2]), new_rng(9))
    assert z1d.shape == (3,) and m1d.shape == (3,)


def test_encoder_log_prob_hand_values():
    # zero init: q(z|x) = N(0, 0.5^2); at z=0 the 1-dim density is
    # -0.5*log(2pi) + log(2); one unit away costs 1/(2*0.25) = 2 more
    enc = zero_encoder(d_z=1)
    x = np.array([[0.3]])
    at_zero = encoder_log_prob(enc, np.array([[0.0]]), x)
    at_one = encoder_log_prob(enc, np.array([[1.0]]), x)
    assert at_zero.data[0] == pytest.approx(-0.5 * LOG_2PI + np.log(2.0), abs=1e-12)
    assert at_one.data[0] - at_zero.data[0] == pytest.approx(-2.0, abs=1e-12)


def test_encoder_log_prob_squeeze_scalar():
    enc = zero_encoder(d_z=2)
    ll = encoder_log_prob(enc, np.zeros(2), np.array([0.1]))
    assert ll.shape == ()


def test_decoder_zero_init_log_prob():
    # zero init emits mu=0, log sigma=0; standard normal density at 0 and 1
    dec = GaussianDecoder(DenseNet([2, 4, 2], init="zeros"))
    z = np.zeros((1, 2))
    assert decoder_log_prob(dec, np.array([[0.0]]), z).data[0] == \
        pytest.approx(-0.5 * LOG_2PI, abs=1e-12)
    assert decoder_log_prob(dec, np.array([[1.0]]), z).data[0] == \
        pytest.approx(-0.5 * LOG_2PI - 0.5, abs=1e-12)


def test_decoder_sigma_floor():
    dec = GaussianDecoder(DenseNet([2, 4, 2], init="zeros"), sigma_floor=1e-4)
    dec.net.biases[-1].data[1] = -20.0
    _, sigma = dec.forward(np.zeros((1, 2)))
    assert sigma.data[0, 0] == pytest.approx(1e-4, rel=1e-12)


def test_decoder_odd_output_rejected():
    with pytest.raises(ValueError, match="pairs"):
        GaussianDecoder(DenseNet([2, 4, 3], init="zeros"))


def test_ibmodel_flow_dim_mismatch():
    rng = new_rng(3)
    enc = Encoder(DenseNet([1, 4, 3], rng=rng), DenseNet([1, 4, 3], rng=rng))
    dec = GaussianDecoder(DenseNet([3, 4, 2], rng=rng))
    with pytest.raises(ValueError, match="d_z"):
        IBModel(enc, dec, RealNVPFlow(2, n_layers=2, hidden=8, rng=rng), 0.3)


def test_mixup_disabled_passthrough():
    x, y = np.ones((3, 1)), np.zeros((3, 1))
    out_x, out_y = mixup_batch(x, y, MixupConfig(enabled=False), new_rng(0))
    assert out_x is x and out_y is y


def test_mixup_reference_loop():
    rng = new_rng(21)
    x = np.linspace(0.0, 1.0, 8).reshape(-1, 1)
    y = np.sin(x)
    mx, my = mixup_batch(x, y, MixupConfig(alpha=0.4), rng)
    ref = new_rng(21)
    perm = ref.permutation(8)
    lam = ref.beta(0.4, 0.4, size=(8, 1))
    np.testing.assert_array_equal(mx, lam * x + (1 - lam) * x[perm])
    np.testing.assert_array_equal(my, lam * y + (1 - lam) * y[perm])


def test_mixup_single_row_fixed_point():
    x, y = np.array([[0.1, 0.7]]), np.array([[0.3]])
    mx, my = mixup_batch(x, y, MixupConfig(alpha=0.005), new_rng(5))
    np.testing.assert_allclose(mx, x, atol=1e-15)
    np.testing.assert_allclose(my, y, atol=1e-15)


def test_mixup_alpha_concentration_and_linearity():
    # Beta(0.005, 0.005) mass in (0.01, 0.99) is about 2*alpha*ln(99) = 4.6%,
    # so nearly every mixed row coincides with one of its two parents
    n = 4000
    x = np.arange(n, dtype=np.float64).reshape(-1, 1)
    y = 2.0 * x
    mx, my = mixup_batch(x, y, MixupConfig(alpha=0.005), new_rng(13))
    np.testing.assert_allclose(my, 2.0 * mx, atol=1e-9)
    near_parent = np.abs(mx - np.round(mx)) < 1e-2
    assert near_parent.mean() > 0.92


def test_estimate_iyz_reference_loop():
    model = small_model(seed=4)
    x = np.linspace(-1, 1, 6).reshape(-1, 1)
    y = np.cos(x)
    got = estimate_iyz(model, x, y, new_rng(17))
    z, _ = encode_sample(model.encoder, x, new_rng(17))
    mu, sigma = model.decoder.forward(z)
    want = gaussian_log_prob(constant(y), mu, sigma).mean()
    assert float(got.data) == float(want.data)


def test_estimate_iyz_requires_2d():
    model = small_model(seed=4)
    with pytest.raises(ValueError, match="2D"):
        estimate_iyz(model, np.zeros(3), np.zeros((3, 1)), new_rng(0))


def test_estimate_izx_reference_loop():
    model = small_model(seed=8)
    xw = np.linspace(-2, 2, 5).reshape(-1, 1)
    got = estimate_izx(model, xw, new_rng(23))
    rng = new_rng(23)
    t = constant(xw)
    m = model.encoder.gate(t)
    mean = m * model.encoder.zbar_net(t)
    z0 = rng.standard_normal((5, model.encoder.d_z))
    z = mean + (1.0 - m) * constant(z0)
    want = (gaussian_log_prob(z, mean, 1.0 - m)
            - model.marginal.log_prob(z)).mean()
    assert float(got.data) == float(want.data)


def test_estimate_izx_matches_gaussian_kl():
    # zero-init coupling layers leave the flow an exact N(0, I), so for a
    # single repeated input the estimator targets a closed-form diagonal KL
    model = small_model(seed=11, d_z=4)
    x0 = np.array([[0.6]])
    m = model.encoder.gate(constant(x0)).data[0]
    mu = m * model.encoder.zbar_net(constant(x0)).data[0]
    sig = 1.0 - m
    kl = 0.5 * np.sum(sig**2 + mu**2 - 1.0 - 2.0 * np.log(sig))
    xw = np.repeat(x0, 512, axis=0)
    vals = [float(estimate_izx(model, xw, new_rng(100 + s)).data)
            for s in range(40)]
    assert np.mean(vals) == pytest.approx(kl, abs=0.05)


def test_estimate_izx_near_zero_when_matched():
    # gates pinned at eps and zbar = 0 make q(z|x) = N(0, 0.999^2), nearly
    # the flow's N(0, I); KL is ~1e-6 so the average estimate sits near zero
    model = small_model(seed=2, d_z=4, zero_nets=True)
    model.encoder.m_net.biases[-1].data[:] = -500.0
    xw = np.zeros((256, 1))
    vals = [float(estimate_izx(model, xw, new_rng(s)).data) for s in range(20)]
    assert abs(np.mean(vals)) < 0.02


def test_estimate_izx_clt_scaling():
    model = small_model(seed=6, d_z=4)
    rng = new_rng(31)
    xw = rng.uniform(-2, 2, size=(128, 1))
    small = [float(estimate_izx(model, xw[:32], new_rng(s)).data) for s in range(60)]
    large = [float(estimate_izx(model, xw, new_rng(s)).data) for s in range(60)]
    ratio = np.std(small) / np.std(large)
    assert 1.4 < ratio < 2.6


def test_ib_loss_recomposition():
    model = small_model(seed=9, beta=0.3)
    x = np.linspace(-1, 1, 8).reshape(-1, 1)
    y = np.sin(2 * x)
    xw = np.linspace(-3, 3, 8).reshape(-1, 1)
    obj, iyz, izx = ib_loss(model, x, y, xw, new_rng(41))
    rng = new_rng(41)
    ref_iyz = float(estimate_iyz(model, x, y, rng).data)
    ref_izx = float(estimate_izx(model, xw, rng).data)
    assert iyz == ref_iyz and izx == ref_izx
    assert float(obj.data) == pytest.approx(ref_iyz - 0.3 * ref_izx, rel=1e-12)


@pytest.mark.parametrize("beta", [0.0, 1.0])
def test_ib_loss_beta_limits(beta):
    model = small_model(seed=9, beta=beta)
    x = np.linspace(-1, 1, 8).reshape(-1, 1)
    y = np.sin(2 * x)
    xw = np.linspace(-3, 3, 8).reshape(-1, 1)
    obj, iyz, izx = ib_loss(model, x, y, xw, new_rng(41))
    assert np.isfinite(izx)
    expect = iyz if beta == 0.0 else iyz - izx
    assert float(obj.data) == pytest.approx(expect, rel=1e-12)


def test_ib_loss_nonfinite_prediction_raises():
    model = small_model(seed=9)
    x = np.zeros((4, 1))
    y = np.full((4, 1), np.nan)
    xw = np.zeros((4, 1))
    with pytest.raises(FloatingPointError, match="prediction term"):
        ib_loss(model, x, y, xw, new_rng(0))


def test_ib_loss_nonfinite_compression_raises():
    model = small_model(seed=9)
    x = np.zeros((4, 1))
    y = np.zeros((4, 1))
    xw = np.array([[0.0], [np.nan], [0.0], [0.0]])
    with pytest.raises(FloatingPointError, match="compression term"):
        ib_loss(model, x, y, xw, new_rng(0))


def fd_slope(loss_fn, tensor, idx, h=1e-5):
    orig = tensor.data[idx]
    tensor.data[idx] = orig + h
    up = loss_fn(None)
    tensor.data[idx] = orig - h
    down = loss_fn(None)
    tensor.data[idx] = orig
    return (up - down) / (2 * h)


def test_reparameterized_gradients_match_fd():
    # common random numbers: re-seeding per evaluation makes the one-draw
    # MC objective a deterministic function of the parameters
    model = small_model(seed=14, d_z=3)
    x = np.linspace(-1, 1, 16).reshape(-1, 1)
    y = np.sin(3 * x)
    params = model.params()

    def loss_fn(_params):
        return estimate_iyz(model, x, y, new_rng(77))

    grads = gradient(loss_fn, params)
    for name, tensor in [("enc.zbar.W0", model.encoder.zbar_net.weights[0]),
                         ("enc.m.W1", model.encoder.m_net.weights[1])]:
        idx = (0, 0)
        fd = fd_slope(lambda _p: float(loss_fn(None).data), tensor, idx)
        assert grads[name][idx] == pytest.approx(fd, rel=1e-3, abs=1e-8), name


def test_izx_gate_gradient_matches_fd():
    model = small_model(seed=15, d_z=3)
    xw = np.linspace(-2, 2, 16).reshape(-1, 1)
    params = model.params()

    def loss_fn(_params):
        return estimate_izx(model, xw, new_rng(52))

    grads = gradient(loss_fn, params)
    tensor = model.encoder.m_net.weights[0]
    fd = fd_slope(lambda _p: float(loss_fn(None).data), tensor, (0, 1))
    assert grads["enc.m.W0"][(0, 1)] == pytest.approx(fd, rel=1e-3, abs=1e-8)


def test_iyz_translation_invariance():
    # the dropped label entropy is an additive constant: shifting targets and
    # the decoder mean bias together leaves the surrogate unchanged
    model = small_model(seed=20)
    x = np.linspace(-1, 1, 8).reshape(-1, 1)
    y = np.sin(x)
    base = float(estimate_iyz(model, x, y, new_rng(3)).data)
    model.decoder.net.biases[-1].data[0] += 2.5
    shifted = float(estimate_iyz(model, x, y + 2.5, new_rng(3)).data)
    assert shifted == pytest.approx(base, abs=1e-9)
