import numpy as np
import pytest

from regretlab import nets
from regretlab.errors import ConfigError, NumericError

from conftest import rel_err


def make_net(weights, biases, acts):
    return nets.NetParams([np.asarray(w, float) for w in weights],
                          [np.asarray(b, float) for b in biases], acts)


class TestForward:
    def test_zero_weights_return_bias(self, rng):
        b = np.array([0.3, -0.7])
        net = make_net([np.zeros((4, 2))], [b], ["linear"])
        for _ in range(5):
            assert np.allclose(nets.forward(net, rng.standard_normal(4)), b)

    def test_identity_layer(self):
        net = make_net([np.eye(3)], [np.zeros(3)], ["linear"])
        x = np.array([1.0, -2.0, 0.5])
        assert np.array_equal(nets.forward(net, x), x)

    def test_matches_straight_line_reevaluation(self, rng):
        net = nets.init_mlp(3, 2, 8, 2, rng, hidden_act="tanh", final_act="linear")
        x = rng.standard_normal(3)
        h = np.tanh(x @ net.weights[0] + net.biases[0])
        h = np.tanh(h @ net.weights[1] + net.biases[1])
        expected = h @ net.weights[2] + net.biases[2]
        assert np.array_equal(nets.forward(net, x), expected)

    def test_width_mismatch_rejected(self, rng):
        net = nets.init_mlp(3, 2, 4, 1, rng)
        with pytest.raises(ConfigError):
            nets.forward(net, np.zeros(5))

    def test_shape_chain_validated(self):
        with pytest.raises(ConfigError):
            make_net([np.zeros((3, 4)), np.zeros((5, 2))], [np.zeros(4), np.zeros(2)],
                     ["relu", "linear"])

    def test_purity_bitwise(self, rng):
        net = nets.init_mlp(4, 3, 16, 2, rng)
        x = rng.standard_normal((7, 4))
        out1 = nets.forward(net, x)
        out2 = nets.forward(net, x)
        assert np.array_equal(out1, out2)

    def test_batch_and_single_agree(self, rng):
        # BLAS may reorder the summation between the two shapes, so this
        # is a numerical (not bitwise) equivalence.
        net = nets.init_mlp(4, 3, 8, 1, rng)
        x = rng.standard_normal((5, 4))
        batched = nets.forward(net, x)
        singles = np.stack([nets.forward(net, row) for row in x])
        assert np.allclose(batched, singles, atol=1e-12)


class TestGradients:
    def test_quadratic_loss_identity_net(self):
        # out = x for the identity net, loss = 0.5 ||out||^2, so
        # dL/dW = outer(x, out) and dL/db = out.
        net = make_net([np.eye(2)], [np.zeros(2)], ["linear"])
        x = np.array([[1.0, 2.0]])
        grads, loss = nets.gradients(net, lambda f: (f(x) ** 2).sum() * 0.5)
        assert np.allclose(grads[0][0], np.outer(x[0], x[0]))
        assert np.allclose(grads[0][1], x[0])
        assert loss == pytest.approx(2.5)

    def test_constant_loss_zero_gradients(self, rng):
        net = nets.init_mlp(3, 2, 4, 1, rng)
        grads, loss = nets.gradients(net, lambda f: (f(np.ones((1, 3))) * 0.0).sum() + 1.0)
        assert loss == 1.0
        for gw, gb in grads:
            assert np.allclose(gw, 0.0) and np.allclose(gb, 0.0)

    def test_finite_difference_oracle(self, rng):
        net = nets.init_mlp(3, 2, 6, 2, rng, hidden_act="tanh")
        x = rng.standard_normal((4, 3))
        target = rng.standard_normal((4, 2))

        def np_loss(n):
            return float(((nets.forward(n, x) - target) ** 2).mean())

        grads, _ = nets.gradients(net, lambda f: ((f(x) - target) ** 2).mean())
        fd = nets.fd_gradients(net, np_loss, h=1e-5)
        worst = max(rel_err(g, f) for (gw, gb), (fw, fb) in zip(grads, fd) for g, f in ((gw, fw), (gb, fb)))
        assert worst < 1e-4

    def test_nonfinite_loss_raises(self, rng):
        net = nets.init_mlp(2, 1, 4, 1, rng)
        with pytest.raises(NumericError):
            nets.gradients(net, lambda f: (f(np.ones((1, 2))) * np.inf).sum())


class TestOptimizer:
    def test_zero_gradients_leave_parameters_unchanged(self, rng):
        net = nets.init_mlp(3, 2, 4, 1, rng)
        before = net.copy()
        zeros = [(np.zeros_like(w), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        nets.adam_step(net, zeros, nets.AdamState(lr=0.1))
        for w0, w1 in zip(before.weights, net.weights):
            assert np.array_equal(w0, w1)

    def test_single_step_hand_evaluation(self):
        # Fresh-state Adam: m=(1-b1)g, v=(1-b2)g^2, both bias-correct back
        # to g and g^2, so the step is -lr * g / (|g| + eps).
        net = make_net([np.array([[2.0]])], [np.array([0.5])], ["linear"])
        g = np.array([[0.3]])
        gb = np.array([-0.2])
        opt = nets.AdamState(lr=0.01)
        nets.adam_step(net, [(g, gb)], opt)
        expect_w = 2.0 - 0.01 * 0.3 / (0.3 + 1e-8)
        expect_b = 0.5 + 0.01 * 0.2 / (0.2 + 1e-8)
        assert net.weights[0][0, 0] == pytest.approx(expect_w, abs=1e-12)
        assert net.biases[0][0] == pytest.approx(expect_b, abs=1e-12)
        assert opt.step == 1

    def test_two_steps_follow_declared_recurrences(self):
        net = make_net([np.array([[1.0]])], [np.array([0.0])], ["linear"])
        g = 0.7
        opt = nets.AdamState(lr=0.05)
        p = 1.0
        m = v = 0.0
        for t in (1, 2):
            nets.adam_step(net, [(np.array([[g]]), np.zeros(1))], opt)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            mh = m / (1 - 0.9**t)
            vh = v / (1 - 0.999**t)
            p -= 0.05 * mh / (np.sqrt(vh) + 1e-8)
        assert opt.step == 2
        assert net.weights[0][0, 0] == pytest.approx(p, abs=1e-12)
        assert opt.m[0][0, 0] == pytest.approx(m, abs=1e-15)
        assert opt.v[0][0, 0] == pytest.approx(v, abs=1e-15)

    def test_nonfinite_gradient_rejected(self, rng):
        net = nets.init_mlp(2, 1, 4, 1, rng)
        bad = [(np.full_like(w, np.nan), np.zeros_like(b)) for w, b in zip(net.weights, net.biases)]
        with pytest.raises(NumericError):
            nets.adam_step(net, bad, nets.AdamState(lr=0.1))


class TestBlend:
    def test_tau_one_copies_online(self, rng):
        a = nets.init_mlp(3, 2, 4, 1, rng)
        b = nets.init_mlp(3, 2, 4, 1, rng)
        out = nets.blend(a, b, 1.0)
        for w0, w1 in zip(out.weights, b.weights):
            assert np.array_equal(w0, w1)

    def test_tau_zero_keeps_target(self, rng):
        a = nets.init_mlp(3, 2, 4, 1, rng)
        b = nets.init_mlp(3, 2, 4, 1, rng)
        out = nets.blend(a, b, 0.0)
        for w0, w1 in zip(out.weights, a.weights):
            assert np.array_equal(w0, w1)

    def test_midpoint_of_scalars(self):
        a = make_net([np.array([[2.0]])], [np.array([2.0])], ["linear"])
        b = make_net([np.array([[4.0]])], [np.array([4.0])], ["linear"])
        out = nets.blend(a, b, 0.5)
        assert out.weights[0][0, 0] == 3.0
        assert out.biases[0][0] == 3.0

    def test_affine_property(self, rng):
        a = nets.init_mlp(3, 2, 4, 1, rng)
        b = nets.init_mlp(3, 2, 4, 1, rng)
        ab = nets.blend(a, b, 0.3)
        ba = nets.blend(b, a, 0.3)
        for wab, wba, wa, wb in zip(ab.weights, ba.weights, a.weights, b.weights):
            assert np.allclose(wab + wba, wa + wb, atol=1e-12)

    def test_shape_mismatch_rejected(self, rng):
        a = nets.init_mlp(3, 2, 4, 1, rng)
        b = nets.init_mlp(3, 2, 8, 1, rng)
        with pytest.raises(ConfigError):
            nets.blend(a, b, 0.5)


def test_doc_roundtrip_bitwise(rng):
    net = nets.init_mlp(5, 3, 7, 2, rng, final_act="tanh")
    back = nets.NetParams.from_doc(net.to_doc())
    for w0, w1 in zip(net.weights, back.weights):
        assert np.array_equal(w0, w1)
    for b0, b1 in zip(net.biases, back.biases):
        assert np.array_equal(b0, b1)
    assert back.activations == net.activations


def test_final_scale_shrinks_output_layer(rng):
    net = nets.init_mlp(4, 2, 16, 2, rng, final_scale=0.01)
    assert np.abs(net.weights[-1]).max() <= 0.01 / np.sqrt(16)
    assert np.abs(net.weights[0]).max() > 0.01
