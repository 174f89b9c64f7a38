"""Tests for tensors, tapes and reverse accumulation."""

import numpy as np
import pytest

from src.models.exceptions import NumericalError, UsageError
from src.numerics import ops
from src.numerics.gradcheck import finite_diff_grad, relative_error
from src.numerics.tensor import Tape, Tensor, backward, grad


class TestTensor:
    def test_integer_data_becomes_float64(self):
        t = Tensor([1, 2, 3])
        assert t.dtype == np.float64
        assert t.shape == (3,)

    def test_non_finite_values_rejected(self):
        with pytest.raises(NumericalError):
            Tensor([1.0, np.nan])
        with pytest.raises(NumericalError):
            Tensor([np.inf])

    def test_item_needs_single_element(self):
        assert Tensor([[2.5]]).item() == 2.5
        with pytest.raises(UsageError):
            Tensor([1.0, 2.0]).item()

    def test_untracked_inputs_give_untracked_output(self):
        out = Tensor([1.0]) + Tensor([2.0])
        assert not out.requires_grad
        assert out.is_leaf


class TestBackward:
    def test_square_gradient(self):
        x = Tensor(3.0, requires_grad=True)
        backward(x * x)
        assert x.grad == pytest.approx(6.0)

    def test_sum_gradient_is_ones(self):
        x = Tensor(1.0, requires_grad=True)
        y = Tensor(-4.0, requires_grad=True)
        backward(x + y)
        assert x.grad == pytest.approx(1.0)
        assert y.grad == pytest.approx(1.0)

    def test_untracked_tensors_untouched(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        c = Tensor([3.0, 4.0])
        backward(ops.sum(x * c))
        np.testing.assert_allclose(x.grad, [3.0, 4.0])
        assert c.grad is None

    def test_shared_subexpression_accumulates(self):
        x = Tensor(2.0, requires_grad=True)
        y = x * x
        backward(y + y)
        assert x.grad == pytest.approx(8.0)

    def test_multi_element_root_rejected(self):
        x = Tensor([1.0, 2.0], requires_grad=True)
        with pytest.raises(UsageError):
            backward(x * 2.0)

    def test_untracked_root_rejected(self):
        with pytest.raises(UsageError):
            backward(ops.sum(Tensor([1.0, 2.0])))

    def test_second_backward_rejected(self):
        x = Tensor(2.0, requires_grad=True)
        y = ops.square(x)
        backward(y)
        with pytest.raises(UsageError):
            backward(y)

    def test_fresh_forward_after_backward_is_allowed(self):
        x = Tensor(2.0, requires_grad=True)
        backward(ops.square(x))
        x.zero_grad()
        backward(ops.square(x))
        assert x.grad == pytest.approx(4.0)

    def test_second_backward_on_leaf_root_rejected(self):
        x = Tensor(3.0, requires_grad=True)
        backward(x)
        assert x.grad == pytest.approx(1.0)
        with pytest.raises(UsageError):
            backward(x)
        # The leaf still feeds fresh forwards
        backward(ops.square(x))
        assert x.grad == pytest.approx(7.0)


class TestTape:
    def test_replay_is_repeatable(self):
        rng = np.random.default_rng(3)
        w = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        x = Tensor(rng.normal(size=(3,)))
        loss = ops.sum(ops.relu(ops.matmul(w, x)))
        tape = Tape(loss)
        first = tape.replay()[id(w)]
        second = tape.replay()[id(w)]
        np.testing.assert_array_equal(first, second)
        assert w.grad is None

    def test_replay_after_backward_rejected(self):
        x = Tensor(1.0, requires_grad=True)
        tape = Tape(ops.square(x))
        tape.backward()
        with pytest.raises(UsageError):
            tape.replay()

    def test_leaves_are_the_tracked_inputs(self):
        a = Tensor(1.0, requires_grad=True)
        b = Tensor(2.0, requires_grad=True)
        tape = Tape(a * b + 1.0)
        assert {id(leaf) for leaf in tape.leaves} == {id(a), id(b)}


class TestGrad:
    def test_gradient_with_respect_to_intermediate(self):
        x = Tensor([1.0, -2.0], requires_grad=True)
        hidden = x * 3.0
        loss = ops.sum(ops.square(hidden))
        (g_hidden, g_x) = grad(loss, [hidden, x])
        np.testing.assert_allclose(g_hidden, [6.0, -12.0])
        np.testing.assert_allclose(g_x, [18.0, -36.0])
        assert x.grad is None

    def test_unreached_tensor_gets_zeros(self):
        x = Tensor([1.0], requires_grad=True)
        other = Tensor([5.0, 6.0], requires_grad=True)
        (g,) = grad(ops.sum(x), [other])
        np.testing.assert_array_equal(g, [0.0, 0.0])


class TestNetworkGradient:
    def test_three_layer_network_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.normal(size=(5, 4)))
        target = Tensor(rng.normal(size=(5, 3)))
        shapes = {"w1": (6, 4), "b1": (6,), "w2": (6, 6), "b2": (6,), "w3": (3, 6), "b3": (3,)}
        params = {
            name: Tensor(rng.normal(scale=0.5, size=shape), requires_grad=True)
            for name, shape in shapes.items()
        }

        def loss(values):
            hidden = ops.relu(ops.linear(x, values["w1"], values["b1"]))
            hidden = ops.relu(ops.linear(hidden, values["w2"], values["b2"]))
            out = ops.linear(hidden, values["w3"], values["b3"])
            return ops.mean(ops.square(ops.sub(out, target)))

        backward(loss(params))
        for name, tensor in params.items():
            numeric = finite_diff_grad(lambda t, name=name: loss({**params, name: t}), tensor)
            assert tensor.grad.dtype == np.float64
            assert relative_error(tensor.grad, numeric.data) < 1e-6, name
