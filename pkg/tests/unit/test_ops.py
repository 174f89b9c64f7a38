"""Tests for differentiable primitives."""

import numpy as np
import pytest

from src.models.exceptions import DimensionError, NumericalError, UsageError
from src.numerics import ops
from src.numerics.gradcheck import check_gradients
from src.numerics.tensor import Tensor, backward
from tests.fixtures.factories import nested_loop_conv2d

TOLERANCE = 1e-6
TRIALS = 100


def tracked(array) -> Tensor:
    return Tensor(np.asarray(array, dtype=np.float64), requires_grad=True)


def weighted_sum(out: Tensor, seed: int = 0) -> Tensor:
    """Scalar projection of an output with fixed random weights."""
    weights = np.random.default_rng(seed).uniform(0.5, 1.5, size=out.shape)
    return ops.sum(ops.mul(out, Tensor(weights)))


def away_from_zero(rng: np.random.Generator, shape) -> np.ndarray:
    values = rng.uniform(0.1, 1.0, size=shape)
    return values * rng.choice([-1.0, 1.0], size=shape)


class TestConv2d:
    def test_scaling_kernel_doubles_pixels(self):
        image = np.random.default_rng(0).uniform(size=(1, 5, 7))
        out = ops.conv2d(Tensor(image), Tensor(np.full((1, 1, 1, 1), 2.0)), Tensor([0.0]))
        np.testing.assert_allclose(out.data, 2.0 * image)

    def test_zero_kernel_gives_bias(self):
        image = np.random.default_rng(1).uniform(size=(2, 6, 6))
        out = ops.conv2d(Tensor(image), Tensor(np.zeros((3, 2, 3, 3))), Tensor([0.5, -1.0, 2.0]), stride=1, pad=1)
        assert out.shape == (3, 6, 6)
        np.testing.assert_array_equal(out.data[0], 0.5)
        np.testing.assert_array_equal(out.data[1], -1.0)
        np.testing.assert_array_equal(out.data[2], 2.0)

    def test_matches_nested_loop_on_reference_shape(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 3, 5, 5))
        kernel = rng.normal(size=(4, 3, 3, 3))
        bias = rng.normal(size=4)
        out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(bias), stride=2, pad=1)
        assert out.shape == (2, 4, 3, 3)
        for n in range(2):
            np.testing.assert_allclose(out.data[n], nested_loop_conv2d(x[n], kernel, bias, 2, 1), atol=1e-12)

    def test_matches_nested_loop_on_random_shapes(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            c_in = int(rng.integers(1, 4))
            c_out = int(rng.integers(1, 4))
            k = int(rng.choice([1, 3, 5]))
            stride = int(rng.integers(1, 4))
            pad = int(rng.integers(0, 3))
            height = int(rng.integers(max(1, k - 2 * pad), 9))
            width = int(rng.integers(max(1, k - 2 * pad), 9))
            x = rng.normal(size=(c_in, height, width))
            kernel = rng.normal(size=(c_out, c_in, k, k))
            bias = rng.normal(size=c_out)
            out = ops.conv2d(Tensor(x), Tensor(kernel), Tensor(bias), stride=stride, pad=pad)
            np.testing.assert_allclose(out.data, nested_loop_conv2d(x, kernel, bias, stride, pad), atol=1e-12)

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(4)
        inputs = {
            "x": tracked(rng.normal(size=(2, 2, 5, 5))),
            "kernel": tracked(rng.normal(size=(3, 2, 3, 3))),
            "bias": tracked(rng.normal(size=3)),
        }

        def loss(t):
            return weighted_sum(ops.conv2d(t["x"], t["kernel"], t["bias"], stride=2, pad=1))

        assert check_gradients(loss, inputs).passed(TOLERANCE)

    def test_channel_mismatch_names_axis(self):
        with pytest.raises(DimensionError, match="C_in"):
            ops.conv2d(Tensor(np.zeros((2, 4, 4))), Tensor(np.zeros((1, 3, 3, 3))), Tensor([0.0]))

    def test_kernel_larger_than_padded_input(self):
        with pytest.raises(DimensionError, match="H"):
            ops.conv2d(Tensor(np.zeros((1, 2, 8))), Tensor(np.zeros((1, 1, 3, 3))), Tensor([0.0]))

    def test_even_kernel_rejected(self):
        with pytest.raises(UsageError):
            ops.conv2d(Tensor(np.zeros((1, 4, 4))), Tensor(np.zeros((1, 1, 2, 2))), Tensor([0.0]))


class TestPrimitiveGradients:
    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_elementwise(self, trial):
        rng = np.random.default_rng(1000 + trial)
        inputs = {"a": tracked(away_from_zero(rng, (3, 4))), "b": tracked(away_from_zero(rng, (3, 4)))}

        def loss(t):
            mixed = ops.add(ops.mul(t["a"], t["b"]), ops.sub(ops.square(t["a"]), ops.exp(t["b"])))
            return weighted_sum(ops.relu(mixed), seed=trial)

        assert check_gradients(loss, inputs, kink_tolerance=1e-4).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_broadcast_add_and_mul(self, trial):
        rng = np.random.default_rng(2000 + trial)
        inputs = {"a": tracked(rng.normal(size=(3, 4))), "row": tracked(rng.normal(size=(4,)))}

        def loss(t):
            return weighted_sum(ops.mul(ops.add(t["a"], t["row"]), t["row"]), seed=trial)

        assert check_gradients(loss, inputs).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_matmul_and_linear(self, trial):
        rng = np.random.default_rng(3000 + trial)
        inputs = {
            "x": tracked(rng.normal(size=(2, 3))),
            "w": tracked(rng.normal(size=(4, 3))),
            "b": tracked(rng.normal(size=(4,))),
            "v": tracked(rng.normal(size=(4,))),
        }

        def loss(t):
            hidden = ops.linear(t["x"], t["w"], t["b"])
            return ops.add(weighted_sum(hidden, seed=trial), ops.sum(ops.matmul(hidden, t["v"])))

        assert check_gradients(loss, inputs).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_vector_matrix_products(self, trial):
        rng = np.random.default_rng(3500 + trial)
        inputs = {"v": tracked(rng.normal(size=(3,))), "m": tracked(rng.normal(size=(3, 2)))}

        def loss(t):
            return weighted_sum(ops.matmul(t["v"], t["m"]), seed=trial)

        assert check_gradients(loss, inputs).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_pool_upsample_reshape(self, trial):
        rng = np.random.default_rng(4000 + trial)
        inputs = {"x": tracked(rng.normal(size=(2, 3, 4, 4)))}

        def loss(t):
            up = ops.upsample_nearest(t["x"], 2)
            pooled = ops.global_avg_pool(ops.square(up))
            return ops.add(weighted_sum(pooled, seed=trial), ops.mean(ops.reshape(t["x"], (6, 16))))

        assert check_gradients(loss, inputs).passed(TOLERANCE)

    @pytest.mark.parametrize("trial", range(TRIALS))
    def test_pairwise_distance_stack_transpose(self, trial):
        rng = np.random.default_rng(5000 + trial)
        inputs = {"a": tracked(rng.normal(size=(3, 2))), "b": tracked(rng.normal(size=(4, 2)))}

        def loss(t):
            distances = ops.pairwise_sq_dist(t["a"], t["b"])
            stacked = ops.stack([ops.transpose(t["a"]), ops.transpose(t["a"])])
            return ops.add(weighted_sum(distances, seed=trial), weighted_sum(stacked, seed=trial + 1))

        assert check_gradients(loss, inputs).passed(TOLERANCE)


class TestPrimitiveValues:
    def test_relu_forward_and_subgradient(self):
        x = tracked([-1.0, 0.0, 2.0])
        out = ops.relu(x)
        np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])
        backward(ops.sum(out))
        np.testing.assert_array_equal(x.grad, [0.0, 0.0, 1.0])

    def test_exp_overflow_signals(self):
        with pytest.raises(NumericalError):
            ops.exp(Tensor([1000.0]))

    def test_square_overflow_signals(self):
        with pytest.raises(NumericalError):
            ops.square(Tensor([1e200]))

    def test_global_avg_pool(self):
        x = Tensor(np.arange(8.0).reshape(2, 2, 2))
        np.testing.assert_allclose(ops.global_avg_pool(x).data, [1.5, 5.5])

    def test_upsample_nearest(self):
        x = Tensor(np.array([[[1.0, 2.0], [3.0, 4.0]]]))
        out = ops.upsample_nearest(x, 2).data[0]
        np.testing.assert_array_equal(out, [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]])

    def test_pairwise_sq_dist_values(self):
        a = Tensor([[0.0, 0.0], [1.0, 1.0]])
        b = Tensor([[3.0, 4.0]])
        np.testing.assert_allclose(ops.pairwise_sq_dist(a, b).data, [[25.0], [13.0]])

    def test_mean_over_axis(self):
        x = Tensor(np.array([[1.0, 3.0], [5.0, 7.0]]))
        np.testing.assert_allclose(ops.mean(x, axis=1).data, [2.0, 6.0])
        assert ops.mean(x).item() == pytest.approx(4.0)

    def test_incompatible_broadcast(self):
        with pytest.raises(DimensionError):
            ops.add(Tensor(np.zeros(3)), Tensor(np.zeros(4)))

    def test_matmul_inner_dimension(self):
        with pytest.raises(DimensionError):
            ops.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))

    def test_reshape_size_mismatch(self):
        with pytest.raises(DimensionError):
            ops.reshape(Tensor(np.zeros(6)), (4,))

    def test_division_by_constant(self):
        assert (Tensor(3.0) / 2).item() == pytest.approx(1.5)
        with pytest.raises(UsageError):
            Tensor(3.0) / Tensor(2.0)
