"""Dense nets, Adam, the step-decay schedule, and checkpoint round-trips."""
import numpy as np
import pytest

from ibuq.autodiff import constant, parameter
from ibuq.checkpoint import load_checkpoint, save_checkpoint
from ibuq.nets import DenseNet, ShapeError
from ibuq.optim import AdamState, LRSchedule, adam_step
from ibuq.seeding import new_rng


def test_zero_initialized_net_outputs_zero():
    net = DenseNet([3, 4, 2], "tanh", new_rng(0))
    for w in net.weights:
        w.data[:] = 0.0
    for b in net.biases:
        b.data[:] = 0.0
    out = net(constant(np.random.default_rng(1).normal(size=(5, 3))))
    np.testing.assert_array_equal(out.data, np.zeros((5, 2)))


def test_single_affine_layer():
    net = DenseNet([1, 1], "identity", new_rng(0))
    net.weights[0].data[:] = 2.0
    net.biases[0].data[:] = 1.0
    assert net(constant(np.array([[3.0]]))).data[0, 0] == pytest.approx(7.0)


def test_hand_computed_composition():
    net = DenseNet([2, 2, 1], "tanh", new_rng(0))
    w0 = np.array([[0.5, -0.3], [0.2, 0.8]])
    b0 = np.array([0.1, -0.2])
    w1 = np.array([[1.5, -0.7]])
    b1 = np.array([0.25])
    net.weights[0].data[:] = w0.T
    net.biases[0].data[:] = b0
    net.weights[1].data[:] = w1.T
    net.biases[1].data[:] = b1
    x = np.array([0.3, -0.6])
    hidden = np.tanh(w0 @ x + b0)
    want = w1 @ hidden + b1
    got = net(constant(x[None, :])).data[0]
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_parameter_count():
    net = DenseNet([2, 32, 32, 1], "tanh", new_rng(0))
    assert net.param_count() == 2 * 32 + 32 + 32 * 32 + 32 + 32 * 1 + 1


def test_input_dimension_mismatch_raises():
    net = DenseNet([3, 4, 2], "tanh", new_rng(0))
    with pytest.raises(ShapeError):
        net(constant(np.zeros((2, 5))))


def test_identical_seeds_identical_nets():
    a = DenseNet([2, 8, 1], "tanh", new_rng(42))
    b = DenseNet([2, 8, 1], "tanh", new_rng(42))
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa.data, wb.data)


def test_adam_zero_gradient_keeps_params():
    p = {"w": parameter(np.array([1.0, -2.0]))}
    state = AdamState()
    adam_step(p, {"w": np.zeros(2)}, state, 1e-3)
    np.testing.assert_array_equal(p["w"].data, np.array([1.0, -2.0]))
    assert state.step_count == 1


def test_adam_first_step_is_lr_times_sign():
    p = {"w": parameter(np.array([0.0, 0.0]))}
    g = np.array([0.37, -5.0])
    adam_step(p, {"w": g}, AdamState(), 1e-3)
    # bias-corrected first step moves by ~ -lr * sign(g)
    np.testing.assert_allclose(p["w"].data, [-1e-3, 1e-3], rtol=1e-6)


def test_adam_two_identical_steps():
    p = {"w": parameter(np.array([0.0]))}
    state = AdamState()
    for _ in range(2):
        adam_step(p, {"w": np.array([1.0])}, state, 1e-3)
    assert p["w"].data[0] == pytest.approx(-2e-3, abs=1e-5)
    assert state.step_count == 2


def test_adam_rejects_non_finite_gradient():
    p = {"w": parameter(np.array([0.0]))}
    with pytest.raises(FloatingPointError, match="w"):
        adam_step(p, {"w": np.array([np.nan])}, AdamState(), 1e-3)


def test_adam_loss_scale_invariance():
    # scaling every gradient by c > 0 leaves the update direction invariant
    rng = new_rng(5)
    g = rng.normal(size=(3, 2))
    moved = {}
    for c in (1.0, 10.0, 1000.0):
        p = {"w": parameter(np.zeros((3, 2)))}
        state = AdamState(eps_adam=1e-12)
        adam_step(p, {"w": c * g}, state, 1e-3)
        moved[c] = p["w"].data.copy()
    for c in (10.0, 1000.0):
        rel = np.abs(moved[c] - moved[1.0]) / np.abs(moved[1.0])
        assert rel.max() < 1e-6


def test_lr_schedule_staircase():
    sched = LRSchedule(base_lr=1e-3, decay_factor=0.1, decay_every=1000)
    assert sched.lr_at(0) == pytest.approx(1e-3)
    assert sched.lr_at(999) == pytest.approx(1e-3)
    assert sched.lr_at(1000) == pytest.approx(1e-4)
    assert sched.lr_at(4999) == pytest.approx(1e-7)


def test_lr_schedule_no_decay():
    sched = LRSchedule(base_lr=1e-3, decay_factor=1.0, decay_every=1000)
    for it in (0, 500, 5000, 100000):
        assert sched.lr_at(it) == pytest.approx(1e-3)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = new_rng(9)
    params = {f"p{i}": rng.normal(size=(3, 2)) / 3.0 for i in range(4)}
    manifest = {"kind": "test", "widths": "3,2", "seed": "9"}
    save_checkpoint(str(tmp_path / "ck"), manifest, params)
    m2, p2 = load_checkpoint(str(tmp_path / "ck"))
    assert m2["kind"] == "test" and m2["seed"] == "9"
    for k, v in params.items():
        assert np.array_equal(p2[k], v), k
        assert p2[k].dtype == np.float64
