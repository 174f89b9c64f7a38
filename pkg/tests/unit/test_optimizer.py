"""Tests for the Adam optimizer."""

import numpy as np
import pytest

from src.models.exceptions import NumericalError
from src.network.params import init_params
from src.training.optimizer import Adam


def test_zero_gradient_leaves_parameters(toy_config):
    params = init_params(toy_config)
    before = {name: array.copy() for name, array in params.arrays().items()}
    Adam(lr=1e-2).step(params)
    for name, array in params.arrays().items():
        np.testing.assert_array_equal(array, before[name])


def test_first_step_moves_by_lr_against_gradient_sign(toy_config):
    params = init_params(toy_config)
    before = params["proj_v.bias"].data.copy()
    grad = np.linspace(-2.0, 2.0, before.size)
    grad[grad == 0] = 1.0
    Adam(lr=1e-3).step(params, {"proj_v.bias": grad})
    # bias-corrected first step: m_hat / sqrt(v_hat) = sign(g)
    np.testing.assert_allclose(params["proj_v.bias"].data - before, -1e-3 * np.sign(grad), rtol=1e-6)


def test_moments_match_parameter_shapes(toy_config):
    params = init_params(toy_config)
    optimizer = Adam(lr=1e-3)
    for tensor in params.values():
        tensor.grad = np.ones_like(tensor.data)
    optimizer.step(params)
    assert optimizer.t == 1
    for name, tensor in params.items():
        assert optimizer.m[name].shape == tensor.shape
        assert optimizer.v[name].shape == tensor.shape


def test_zero_learning_rate_is_a_null_update(toy_config):
    params = init_params(toy_config)
    before = params["conv1.weight"].data.copy()
    params["conv1.weight"].grad = np.ones_like(before)
    Adam(lr=0.0).step(params)
    np.testing.assert_array_equal(params["conv1.weight"].data, before)


def test_matches_reference_update_over_steps(toy_config):
    params = init_params(toy_config)
    name = "proj_t.bias"
    value = params[name].data.copy()
    m = np.zeros_like(value)
    v = np.zeros_like(value)
    optimizer = Adam(lr=0.01)
    rng = np.random.default_rng(0)
    for step in range(1, 4):
        g = rng.normal(size=value.shape)
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        value = value - 0.01 * (m / (1 - 0.9 ** step)) / (np.sqrt(v / (1 - 0.999 ** step)) + 1e-8)
        optimizer.step(params, {name: g})
    np.testing.assert_allclose(params[name].data, value, rtol=1e-12)


def test_non_finite_update_raises(toy_config):
    params = init_params(toy_config)
    params["proj_v.bias"].data = np.full(8, 1.7e308)
    with pytest.raises(NumericalError):
        Adam(lr=1e307).step(params, {"proj_v.bias": np.full(8, -1.0)})
