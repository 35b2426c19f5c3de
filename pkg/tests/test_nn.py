import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from e2elink import autodiff, nn
from e2elink.errors import ConfigError, ShapeError

from support import central_diff, rel_err


def make_store(weights, biases, acts):
    layers = [nn.Layer(np.array(w, dtype=np.float64), np.array(b, dtype=np.float64), a)
              for w, b, a in zip(weights, biases, acts)]
    return nn.ParamStore(layers)


class TestDenseForward:
    def test_identity_layer(self):
        store = make_store([np.eye(2)], [[0.0, 0.0]], ["linear"])
        out = nn.dense_forward(store, 0, np.array([1.0, -2.0]))
        assert np.array_equal(out, [1.0, -2.0])

    def test_relu_clamps(self):
        store = make_store([[[1.0, 1.0]]], [[-3.0]], ["relu"])
        out = nn.dense_forward(store, 0, np.array([1.0, 1.0]))
        assert np.array_equal(out, [0.0])

    def test_tanh_value(self):
        store = make_store([[[2.0]]], [[0.0]], ["tanh"])
        out = nn.dense_forward(store, 0, np.array([0.5]))
        assert out[0] == pytest.approx(np.tanh(1.0), abs=1e-12)

    def test_shape_error_names_layer(self):
        store = make_store([np.eye(2)], [[0.0, 0.0]], ["linear"])
        with pytest.raises(ShapeError, match="layer 0"):
            nn.dense_forward(store, 0, np.zeros(3))


class TestActivations:
    def test_softmax_symmetric(self):
        out = nn.activation_apply("softmax", np.zeros(4))
        assert np.allclose(out, 0.25, atol=1e-15)

    def test_elu_negative(self):
        out = nn.activation_apply("elu", np.array([-1.0]))
        assert out[0] == pytest.approx(np.exp(-1.0) - 1.0, abs=1e-12)

    def test_sigmoid_midpoint(self):
        assert nn.activation_apply("sigmoid", np.array([0.0]))[0] == 0.5

    def test_unknown_tag(self):
        with pytest.raises(ConfigError):
            nn.activation_apply("swish", np.zeros(2))

    @settings(deadline=None, max_examples=60)
    @given(st.lists(st.floats(min_value=-80, max_value=80), min_size=1, max_size=24))
    def test_softmax_is_probability_vector(self, logits):
        out = nn.activation_apply("softmax", np.asarray(logits, dtype=np.float64))
        assert np.all(out > 0.0)
        assert np.all(out < 1.0 + 1e-12)
        assert abs(out.sum() - 1.0) < 1e-9


class TestXavier:
    def test_bound_for_small_shape(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            w = nn.xavier_init((1, 5), rng)
            assert np.all(np.abs(w) <= 1.0)

    def test_variance(self):
        rng = np.random.default_rng(1)
        draws = np.concatenate([nn.xavier_init((64, 128), rng).ravel()
                                for _ in range(13)])
        assert draws.size >= 100000
        expected = 2.0 / (64 + 128)
        assert abs(draws.var() - expected) / expected < 0.10

    def test_zero_dimension_rejected(self):
        with pytest.raises(ConfigError):
            nn.xavier_init((0, 4), np.random.default_rng(0))

    def test_biases_start_zero(self):
        net = nn.build_network([4, 8, 2], ["relu", "linear"], np.random.default_rng(2))
        for layer in net.layers:
            assert not layer.bias.any()


class TestAdam:
    def test_first_step_magnitude(self):
        store = make_store([[[0.0]]], [[0.0]], ["linear"])
        store.grads[0][0][...] = 1.0
        nn.adam_step(store)
        assert abs(abs(store.layers[0].weight[0, 0]) - 0.001) < 1e-8
        assert store.layers[0].weight[0, 0] < 0
        assert store.step_count == 1

    def test_zero_gradient_is_noop(self):
        rng = np.random.default_rng(3)
        net = nn.build_network([3, 5, 2], ["relu", "linear"], rng)
        before = net.flat()
        nn.adam_step(net)
        assert np.array_equal(net.flat(), before)

    def test_identical_stores_stay_identical(self):
        rng = np.random.default_rng(4)
        a = nn.build_network([3, 5, 2], ["tanh", "linear"], rng)
        b = a.clone()
        for store in (a, b):
            for gw, gb in store.grads:
                gw[...] = 0.017
                gb[...] = -0.4
        nn.adam_step(a)
        nn.adam_step(b)
        assert np.array_equal(a.flat(), b.flat())
        assert a.step_count == b.step_count


class TestL2Penalty:
    def test_zero_store(self):
        store = make_store([[[0.0]]], [[0.0]], ["linear"])
        assert nn.l2_penalty(store) == 0.0

    def test_single_weight(self):
        store = make_store([[[2.0]]], [[0.0]], ["linear"])
        assert nn.l2_penalty(store) == pytest.approx(2.0, abs=0)
        with autodiff.Tape() as tape:
            pen = nn.l2_penalty(store)
            tape.mark_output(pen)
            autodiff.backward(tape)
        assert store.grads[0][0][0, 0] == 2.0

    def test_taped_gradient_is_exactly_lam_theta(self):
        rng = np.random.default_rng(5)
        net = nn.build_network([3, 4, 2], ["elu", "linear"], rng)
        lam = 0.01
        with autodiff.Tape() as tape:
            pen = autodiff.scale(nn.l2_penalty(net), lam)
            tape.mark_output(pen)
            autodiff.backward(tape)
        for layer, (gw, gb) in zip(net.layers, net.grads):
            assert np.array_equal(gw, lam * layer.weight)
            assert np.array_equal(gb, lam * layer.bias)

    def test_additivity_across_stores(self):
        rng = np.random.default_rng(6)
        a = nn.build_network([3, 4], ["relu"], rng)
        b = nn.build_network([2, 5], ["tanh"], rng)
        joined = nn.ParamStore([nn.Layer(l.weight.copy(), l.bias.copy(), l.activation)
                                for l in a.layers + b.layers])
        assert nn.l2_penalty(joined) == pytest.approx(
            nn.l2_penalty(a) + nn.l2_penalty(b), rel=1e-15)

    @settings(deadline=None, max_examples=40)
    @given(st.lists(st.floats(min_value=-5, max_value=5), min_size=1, max_size=12))
    def test_nonnegative_and_zero_iff_zero(self, vals):
        w = np.asarray(vals, dtype=np.float64).reshape(1, -1)
        store = make_store([w], [[0.0]], ["linear"])
        pen = nn.l2_penalty(store)
        assert pen >= 0.0
        assert (pen == 0.0) == (not w.any())


TABLE_LAYOUTS = {
    "transmitter": ([16, 32, 14], ["relu", "linear"]),
    "receiver": ([14, 64, 16], ["relu", "softmax"]),
    "generator": ([28, 128, 128, 14], ["elu", "tanh", "linear"]),
    "discriminator": ([28, 32, 32, 1], ["elu", "elu", "sigmoid"]),
}


@pytest.mark.parametrize("name", sorted(TABLE_LAYOUTS))
def test_gradients_match_fd_for_layout(name):
    sizes, acts = TABLE_LAYOUTS[name]
    rng = np.random.default_rng(42)
    net = nn.build_network(sizes, acts, rng)
    x = rng.normal(size=(8, sizes[0]))
    w = rng.normal(size=(8, sizes[-1]))

    def run(flat):
        net.load_flat(flat)
        with autodiff.Tape() as tape:
            out = nn.forward(net, x, trainable=True)
            loss = autodiff.sum_all(autodiff.mul(out, w))
            tape.mark_output(loss)
            autodiff.backward(tape)
        grad = np.concatenate([np.concatenate([gw.ravel(), gb.ravel()])
                               for gw, gb in net.grads])
        return float(loss.value), grad

    flat = net.flat()
    _, grad = run(flat)
    for idx in rng.choice(flat.size, size=20, replace=False):
        fd = central_diff(lambda v: run(v)[0], flat, idx)
        assert rel_err(grad[idx], fd) < 1e-4
