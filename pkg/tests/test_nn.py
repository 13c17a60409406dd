"""Dense network core: forward oracle, exact gradients, ADAM, dropout."""
import math

import numpy as np
import pytest

from ssglearn.errors import ShapeMismatch, TapeMismatch
from ssglearn.nn import (
    Mlp,
    MlpSpec,
    adam_init,
    adam_step,
    init_mlp,
    leaky_relu,
    mlp_backward,
    mlp_forward,
    mlp_grad_arrays,
    mlp_param_arrays,
)


def forward_oracle(weights, biases, x, slope):
    """Straight-line reimplementation of the forward pass (eval mode)."""
    h = np.asarray(x, dtype=np.float64)
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        h = z if i == last else np.where(z > 0.0, z, slope * z)
    return h


def loss_and_grads(mlp, x, probe, training=False, seed=None):
    """Scalar loss = sum(output * probe); returns loss and flat grads."""
    rng = np.random.default_rng(seed) if seed is not None else None
    y, tape = mlp_forward(mlp, x, training=training, rng=rng)
    grads, _ = mlp_backward(mlp, tape, probe)
    return float((y * probe).sum()), mlp_grad_arrays(grads)


def finite_difference(mlp, x, probe, h=1e-5, training=False, seed=None):
    """Central differences of the probe-contracted output wrt every
    parameter entry; dropout masks are replayed by reseeding."""
    params = mlp_param_arrays(mlp)
    fd = [np.zeros_like(p) for p in params]

    def value():
        rng = np.random.default_rng(seed) if seed is not None else None
        y, _ = mlp_forward(mlp, x, training=training, rng=rng)
        return float((y * probe).sum())

    for pi, p in enumerate(params):
        flat = p.reshape(-1)
        out = fd[pi].reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + h
            up = value()
            flat[j] = orig - h
            down = value()
            flat[j] = orig
            out[j] = (up - down) / (2.0 * h)
    return fd


def max_rel_error(analytic, numeric):
    worst = 0.0
    for a, n in zip(analytic, numeric):
        denom = np.maximum(np.abs(a) + np.abs(n), 1e-8)
        worst = max(worst, float((np.abs(a - n) / denom).max()))
    return worst


class TestForward:
    def test_leaky_relu_values(self):
        assert leaky_relu(np.array([-2.0]))[0] == pytest.approx(-0.02)
        assert leaky_relu(np.array([3.0]))[0] == 3.0

    def test_identity_affine_layer(self):
        spec = MlpSpec((3, 3))
        mlp = Mlp(spec, [np.eye(3)], [np.zeros(3)])
        x = np.array([[0.5, -1.0, 2.0]])
        y, _ = mlp_forward(mlp, x)
        np.testing.assert_array_equal(y, x)

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(11)
        mlp = init_mlp(MlpSpec((5, 8, 3), slope=0.01), rng)
        x = rng.normal(size=(7, 5))
        y, _ = mlp_forward(mlp, x)
        np.testing.assert_allclose(
            y, forward_oracle(mlp.weights, mlp.biases, x, 0.01), atol=1e-12
        )

    def test_wrong_input_width_rejected(self):
        mlp = init_mlp(MlpSpec((5, 3)), np.random.default_rng(0))
        with pytest.raises(ShapeMismatch):
            mlp_forward(mlp, np.zeros((2, 4)))

    def test_one_dim_input_rejected(self):
        mlp = init_mlp(MlpSpec((5, 3)), np.random.default_rng(0))
        with pytest.raises(ShapeMismatch):
            mlp_forward(mlp, np.zeros(5))


class TestBackward:
    def test_single_affine_closed_form(self):
        # y = x W + b, upstream g: dW = x^T g, db = column sums of g
        rng = np.random.default_rng(2)
        mlp = init_mlp(MlpSpec((4, 3)), rng)
        x = rng.normal(size=(6, 4))
        g = rng.normal(size=(6, 3))
        _, tape = mlp_forward(mlp, x)
        grads, dx = mlp_backward(mlp, tape, g)
        np.testing.assert_allclose(grads.d_weights[0], x.T @ g, atol=1e-12)
        np.testing.assert_allclose(grads.d_biases[0], g.sum(axis=0), atol=1e-12)
        np.testing.assert_allclose(dx, g @ mlp.weights[0].T, atol=1e-12)

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(3)
        mlp = init_mlp(MlpSpec((4, 6, 2)), rng)
        _, tape = mlp_forward(mlp, rng.normal(size=(5, 4)))
        grads, dx = mlp_backward(mlp, tape, np.zeros((5, 2)))
        assert all(np.all(a == 0.0) for a in mlp_grad_arrays(grads))
        assert np.all(dx == 0.0)

    def test_finite_differences_many_seeds(self):
        # central differences h=1e-5 on a 4->6->2 net, 20 random seeds
        for seed in range(20):
            rng = np.random.default_rng(seed)
            mlp = init_mlp(MlpSpec((4, 6, 2), slope=0.01), rng)
            x = rng.normal(size=(3, 4))
            probe = rng.normal(size=(3, 2))
            _, analytic = loss_and_grads(mlp, x, probe)
            numeric = finite_difference(mlp, x, probe)
            assert max_rel_error(analytic, numeric) < 1e-4, f"seed {seed}"

    def test_finite_differences_with_dropout_mask_replayed(self):
        rng = np.random.default_rng(5)
        mlp = init_mlp(MlpSpec((4, 6, 2), dropout=0.3), rng)
        x = rng.normal(size=(3, 4))
        probe = rng.normal(size=(3, 2))
        _, analytic = loss_and_grads(mlp, x, probe, training=True, seed=99)
        numeric = finite_difference(mlp, x, probe, training=True, seed=99)
        assert max_rel_error(analytic, numeric) < 1e-4

    def test_tape_shape_mismatch_rejected(self):
        mlp = init_mlp(MlpSpec((4, 2)), np.random.default_rng(0))
        _, tape = mlp_forward(mlp, np.zeros((3, 4)))
        with pytest.raises(TapeMismatch):
            mlp_backward(mlp, tape, np.zeros((2, 2)))


class TestDropout:
    def test_eval_mode_is_identity_wrt_dropout(self):
        rng = np.random.default_rng(7)
        mlp = init_mlp(MlpSpec((5, 40, 3), dropout=0.5), rng)
        x = rng.normal(size=(4, 5))
        a, _ = mlp_forward(mlp, x)
        b, _ = mlp_forward(mlp, x)
        np.testing.assert_array_equal(a, b)

    def test_training_mode_requires_rng(self):
        mlp = init_mlp(MlpSpec((5, 4, 3), dropout=0.5), np.random.default_rng(0))
        with pytest.raises(ValueError):
            mlp_forward(mlp, np.zeros((2, 5)), training=True)

    def test_mask_rate_and_inverted_scaling(self):
        # big hidden layer so 1e5+ activations are sampled in one pass
        rate = 0.3
        rng = np.random.default_rng(8)
        n, width = 1000, 128
        mlp = Mlp(
            MlpSpec((4, width, width), dropout=rate),
            [np.full((4, width), 0.05), np.eye(width)],
            [np.ones(width), np.zeros(width)],
        )
        x = np.abs(rng.normal(size=(n, 4)))  # positive pre-activations
        _, tape = mlp_forward(mlp, x, training=True, rng=np.random.default_rng(9))
        mask = tape.masks[0]
        zeroed = float((mask == 0.0).mean())
        assert abs(zeroed - rate) < 0.02
        survivors = mask[mask != 0.0]
        np.testing.assert_allclose(survivors, 1.0 / (1.0 - rate), atol=1e-12)


class TestAdam:
    def test_first_step_closed_form(self):
        # g=1 from a fresh state: m_hat = v_hat = 1 after bias correction,
        # so the update is exactly lr / (1 + eps)
        p = [np.array([2.0])]
        state = adam_init(p, learning_rate=0.001)
        (new,) = adam_step(state, p, [np.array([1.0])])
        assert new[0] == pytest.approx(2.0 - 0.001 / (1.0 + 1e-8), abs=1e-15)
        assert state.step == 1

    def test_zero_gradient_is_noop_from_fresh_state(self):
        p = [np.array([1.0, -2.0]), np.ones((2, 2))]
        state = adam_init(p)
        current = p
        for _ in range(5):
            current = adam_step(state, current, [np.zeros_like(a) for a in current])
        for a, b in zip(current, p):
            np.testing.assert_array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        p = [np.zeros(3)]
        state = adam_init(p)
        with pytest.raises(ShapeMismatch):
            adam_step(state, p, [np.zeros(4)])
        with pytest.raises(ShapeMismatch):
            adam_step(state, p, [np.zeros(3), np.zeros(3)])

    def test_identical_runs_identical_trajectories(self):
        def run():
            rng = np.random.default_rng(123)
            mlp = init_mlp(MlpSpec((3, 5, 1)), rng)
            params = mlp_param_arrays(mlp)
            state = adam_init(params, learning_rate=0.01)
            x = rng.normal(size=(8, 3))
            target = rng.normal(size=(8, 1))
            for _ in range(10):
                y, tape = mlp_forward(mlp, x)
                grads, _ = mlp_backward(mlp, tape, 2.0 * (y - target) / len(x))
                params = adam_step(state, params, mlp_grad_arrays(grads))
                for i in range(mlp.spec.n_layers):
                    mlp.weights[i] = params[2 * i]
                    mlp.biases[i] = params[2 * i + 1]
            return params

        for a, b in zip(run(), run()):
            np.testing.assert_array_equal(a, b)


class TestSpecValidation:
    def test_too_few_widths(self):
        with pytest.raises(ValueError):
            MlpSpec((5,))

    def test_dropout_range(self):
        with pytest.raises(ValueError):
            MlpSpec((5, 3), dropout=1.0)

    def test_glorot_limits(self):
        rng = np.random.default_rng(0)
        mlp = init_mlp(MlpSpec((10, 20)), rng)
        limit = math.sqrt(6.0 / 30.0)
        assert np.abs(mlp.weights[0]).max() <= limit
        assert np.all(mlp.biases[0] == 0.0)
