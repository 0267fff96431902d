import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    SPEC_MATRIX,
    dense_hessian,
    fd_grad,
    random_batch,
    random_params,
    straight_line_forward,
)
from lesgd import mlp
from lesgd.mlp import Batch, ModelSpec


class TestForward:
    def test_identity_single_layer(self):
        spec = ModelSpec((2, 2))
        params = np.array([1.0, 0.0, 0.0, 1.0, 0.0, 0.0])  # W=I, b=0
        out = mlp.forward(spec, params, Batch(np.array([[3.0, -2.0]]), np.array([0])))
        np.testing.assert_array_equal(out, [[3.0, -2.0]])

    def test_zero_params_zero_logits(self):
        spec = ModelSpec((2, 4, 2))
        params = np.zeros(mlp.parameter_count(spec))
        out = mlp.forward(spec, params, random_batch(spec, 5, 0))
        np.testing.assert_array_equal(out, np.zeros((5, 2)))

    def test_matches_straight_line_oracle(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 42)
        batch = random_batch(spec, 7, 1)
        np.testing.assert_allclose(
            mlp.forward(spec, params, batch),
            straight_line_forward(spec, params, batch.inputs),
            rtol=1e-14,
        )

    def test_dimension_mismatch_rejected(self):
        spec = ModelSpec((2, 4, 2))
        with pytest.raises(ValueError, match="dim"):
            mlp.forward(spec, np.zeros(3), random_batch(spec, 4, 0))
        wrong = ModelSpec((3, 2))
        with pytest.raises(ValueError, match="input"):
            mlp.forward(wrong, np.zeros(8), random_batch(ModelSpec((2, 2)), 4, 0))

    def test_nonfinite_rejected(self):
        spec = ModelSpec((2, 2))
        params = np.full(6, np.nan)
        with pytest.raises(ValueError, match="finite"):
            mlp.forward(spec, params, random_batch(spec, 2, 0))
        with pytest.raises(ValueError, match="finite"):
            Batch(np.array([[np.inf, 0.0]]), np.array([0]))

    def test_deterministic(self):
        spec = ModelSpec((3, 5, 4, 2))
        params = random_params(spec, 3)
        batch = random_batch(spec, 6, 4)
        a = mlp.forward(spec, params, batch)
        b = mlp.forward(spec, params, batch)
        assert np.array_equal(a, b)


class TestLoss:
    def test_uniform_predictions_give_ln2(self):
        spec = ModelSpec((2, 4, 2))
        params = np.zeros(mlp.parameter_count(spec))
        batch = Batch(np.random.default_rng(0).standard_normal((10, 2)),
                      np.array([0, 1] * 5))
        assert mlp.loss(spec, params, batch, 0.0) == pytest.approx(np.log(2), rel=1e-12)

    def test_regularizer_decomposition(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 9)
        batch = random_batch(spec, 8, 2)
        base = mlp.loss(spec, params, batch, 0.0)
        full = mlp.loss(spec, params, batch, 0.5)
        assert full == pytest.approx(base + 0.25 * params @ params, rel=1e-12)

    def test_pacs_style_decay_strength(self):
        # gamma = 5e-4, the setting used for the image-benchmark runs
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 9)
        batch = random_batch(spec, 8, 2)
        expected = mlp.loss(spec, params, batch, 0.0) + 2.5e-4 * params @ params
        assert mlp.loss(spec, params, batch, 5e-4) == pytest.approx(expected, rel=1e-12)

    @given(gamma=st.floats(0.0, 10.0, allow_nan=False), seed=st.integers(0, 100))
    @settings(max_examples=25, deadline=None)
    def test_regularizer_decomposition_property(self, gamma, seed):
        spec = ModelSpec((2, 3, 2))
        params = random_params(spec, seed)
        batch = random_batch(spec, 4, seed)
        lhs = mlp.loss(spec, params, batch, gamma) - mlp.loss(spec, params, batch, 0.0)
        rhs = 0.5 * gamma * params @ params
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)

    def test_cross_entropy_nonnegative(self):
        for spec in SPEC_MATRIX:
            if spec.output != "softmax_xent":
                continue
            params = random_params(spec, 5)
            assert mlp.loss(spec, params, random_batch(spec, 6, 5), 0.0) >= 0.0


class TestGrad:
    def test_quadratic_fixture(self):
        a = np.diag([1.0, 3.0])
        theta = np.array([1.0, 1.0])
        assert mlp.qloss(a, theta) == pytest.approx(2.0)
        np.testing.assert_allclose(mlp.qgrad(a, theta), [1.0, 3.0])

    def test_zero_params_decay_contributes_nothing(self):
        spec = ModelSpec((2, 4, 2))
        params = np.zeros(mlp.parameter_count(spec))
        batch = random_batch(spec, 6, 1)
        g0 = mlp.grad(spec, params, batch, 0.0)
        g1 = mlp.grad(spec, params, batch, 1.0)
        np.testing.assert_array_equal(g0, g1)

    @pytest.mark.parametrize("spec", SPEC_MATRIX, ids=str)
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_finite_differences(self, spec, seed):
        params = random_params(spec, seed)
        batch = random_batch(spec, 8, seed + 100)
        g = mlp.grad(spec, params, batch, 1e-3)
        fd = fd_grad(lambda t: mlp.loss(spec, t, batch, 1e-3), params, step=1e-5)
        denom = np.maximum(np.maximum(np.abs(g), np.abs(fd)), 1e-6)
        assert np.max(np.abs(g - fd) / denom) < 1e-5

    def test_deterministic(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 7)
        batch = random_batch(spec, 5, 7)
        assert np.array_equal(mlp.grad(spec, params, batch, 0.1),
                              mlp.grad(spec, params, batch, 0.1))


class TestHvp:
    def test_constant_hessian_quadratic(self):
        # For L = 0.5 theta' A theta realized as a 1-layer MSE net this is
        # checked in the integration tests; here use qgrad directly.
        a = np.diag([1.0, 3.0])
        np.testing.assert_allclose(mlp.qgrad(a, np.array([1.0, 0.0])), [1.0, 0.0])
        np.testing.assert_allclose(mlp.qgrad(a, np.array([0.0, 1.0])), [0.0, 3.0])

    def test_zero_vector_maps_to_zero(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 1)
        batch = random_batch(spec, 4, 1)
        out = mlp.hvp(spec, params, batch, np.zeros_like(params), 0.0)
        np.testing.assert_array_equal(out, np.zeros_like(params))

    def test_against_dense_hessian_oracle(self):
        spec = ModelSpec((2, 4, 2))  # 22 params, dense oracle is cheap
        params = random_params(spec, 11)
        batch = random_batch(spec, 6, 11)
        h = dense_hessian(lambda t: mlp.grad(spec, t, batch, 0.0), params)
        rng = np.random.default_rng(2)
        for _ in range(3):
            v = rng.standard_normal(params.size)
            hv = mlp.hvp(spec, params, batch, v, 0.0)
            assert np.linalg.norm(hv - h @ v) / np.linalg.norm(h @ v) < 1e-3

    def test_linearity(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 13)
        batch = random_batch(spec, 6, 13)
        rng = np.random.default_rng(3)
        v, w = rng.standard_normal((2, params.size))
        lhs = mlp.hvp(spec, params, batch, 2.0 * v + 0.5 * w, 0.0)
        rhs = 2.0 * mlp.hvp(spec, params, batch, v, 0.0) \
            + 0.5 * mlp.hvp(spec, params, batch, w, 0.0)
        assert np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs) < 1e-4

    def test_decay_shifts_hvp_by_gamma_v(self):
        spec = ModelSpec((2, 4, 2))
        params = random_params(spec, 17)
        batch = random_batch(spec, 6, 17)
        v = np.random.default_rng(4).standard_normal(params.size)
        gamma = 0.3
        shift = mlp.hvp(spec, params, batch, v, gamma) - mlp.hvp(spec, params, batch, v, 0.0)
        assert np.linalg.norm(shift - gamma * v) / np.linalg.norm(gamma * v) < 1e-6

    def test_bad_fd_step_rejected(self):
        spec = ModelSpec((2, 2))
        with pytest.raises(ValueError, match="fd_step"):
            mlp.hvp(spec, np.zeros(6), random_batch(spec, 2, 0), np.ones(6), 0.0, fd_step=0.0)


class TestQuadraticFixture:
    def test_identity_matrix(self):
        assert mlp.qloss(np.eye(2), np.array([2.0, 0.0])) == pytest.approx(2.0)
        np.testing.assert_allclose(mlp.qgrad(np.eye(2), np.array([2.0, 0.0])), [2.0, 0.0])

    def test_nonsymmetric_rejected(self):
        with pytest.raises(ValueError, match="symmetric"):
            mlp.qloss(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros(2))

    def test_random_symmetric_matches_fd(self):
        rng = np.random.default_rng(8)
        m = rng.standard_normal((5, 5))
        a = 0.5 * (m + m.T)
        theta = rng.standard_normal(5)
        fd = fd_grad(lambda t: mlp.qloss(a, t), theta)
        np.testing.assert_allclose(mlp.qgrad(a, theta), fd, rtol=1e-6, atol=1e-8)


class TestParamLayout:
    def test_parameter_count(self):
        assert mlp.parameter_count(ModelSpec((2, 4, 2))) == (2 + 1) * 4 + (4 + 1) * 2

    def test_init_is_seeded_and_bounded(self):
        spec = ModelSpec((2, 16, 2))
        a = mlp.init_params(spec, 5)
        b = mlp.init_params(spec, 5)
        assert np.array_equal(a, b)
        layers = mlp.unpack(spec, a)
        limit = np.sqrt(6.0 / (2 + 16))
        assert np.all(np.abs(layers[0][0]) <= limit)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec((2,))
        with pytest.raises(ValueError):
            ModelSpec((2, 0, 2))
        with pytest.raises(ValueError):
            ModelSpec((2, 2), activation="sigmoid")
