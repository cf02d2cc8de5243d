"""
Tests for the dense numerical kernel: products, parameters, Adam and gradient checking.
"""

import numpy as np
import pytest

from src.errors import ConsistencyError, DimensionError, NumericalError
from src.numerics import (
    AdamState,
    ParamStore,
    activation,
    activation_derivative,
    adam_step,
    grad_check,
    matmul,
    resolve_dtype,
)


@pytest.fixture
def quadratic_store():
    """A float64 store holding one 3x2 matrix."""
    store = ParamStore("float64")
    store.add("w", np.array([[1.0, -2.0], [0.5, 3.0], [-1.5, 0.25]]))
    return store


def quadratic_loss(store):
    """0.5 * ||w||^2 with its exact gradient."""
    w = store["w"]
    store.accumulate("w", w.copy())
    return 0.5 * float((w ** 2).sum())


def test_matmul_shapes():
    """Test matmul multiplies compatible matrices and rejects others."""
    a = np.arange(6.0).reshape(2, 3)
    b = np.arange(12.0).reshape(3, 4)
    assert np.array_equal(matmul(a, b), a @ b)

    with pytest.raises(DimensionError, match="Cannot multiply 2x3 by 2x3"):
        matmul(a, a)


def test_matmul_is_associative_on_random_chains():
    """Test (ab)c equals a(bc) within 1e-9 in 64-bit."""
    rng = np.random.default_rng(5)
    for _ in range(20):
        m, k, n, p = rng.integers(1, 7, size=4)
        a, b, c = rng.standard_normal((m, k)), rng.standard_normal((k, n)), rng.standard_normal((n, p))
        assert np.allclose(matmul(matmul(a, b), c), matmul(a, matmul(b, c)), rtol=0.0, atol=1e-9)


def test_resolve_dtype():
    """Test precision names map to numpy dtypes."""
    assert resolve_dtype("float32") == np.float32
    assert resolve_dtype("float64") == np.float64
    with pytest.raises(DimensionError):
        resolve_dtype("float16")


def test_activation_derivatives_match_finite_differences():
    """Test derivatives expressed through outputs agree with numeric slopes."""
    x = np.linspace(-3, 3, 13)
    for kind in ("sigmoid", "tanh"):
        y = activation(kind, x)
        numeric = (activation(kind, x + 1e-6) - activation(kind, x - 1e-6)) / 2e-6
        assert np.allclose(activation_derivative(kind, y), numeric, atol=1e-6)
    relu = activation("relu", np.array([-1.0, 0.0, 2.0]))
    assert np.array_equal(relu, [0.0, 0.0, 2.0])
    assert np.array_equal(activation_derivative("relu", relu), [0.0, 0.0, 1.0])


def test_param_store_bookkeeping():
    """Test parameters and gradient buffers stay paired."""
    store = ParamStore("float32")
    store.add("b", np.zeros(3))
    store.add("a", np.ones((2, 2)))

    assert store.names() == ["a", "b"]
    assert store["a"].dtype == np.float32
    assert store.num_values() == 7

    with pytest.raises(ConsistencyError):
        store.add("a", np.zeros(1))
    with pytest.raises(DimensionError):
        store.accumulate("b", np.ones(4))

    store.accumulate("b", np.ones(3))
    store.accumulate("b", np.ones(3))
    assert np.array_equal(store.grads["b"], [2.0, 2.0, 2.0])
    store.zero_grad()
    assert not store.grads["b"].any()

    wide = store.astype("float64")
    assert wide["a"].dtype == np.float64
    assert np.array_equal(wide["a"], store["a"])


def test_adam_first_step_moves_by_lr():
    """Test the bias-corrected first Adam step has magnitude lr per coordinate."""
    store = ParamStore("float64")
    store.add("w", np.array([1.0, -1.0, 2.0]))
    store.accumulate("w", np.array([0.5, -3.0, 4.0]))
    state = AdamState(store)

    adam_step(store, state, lr=0.01)

    assert state.t == 1
    assert np.allclose(store["w"], [0.99, -0.99, 1.99], atol=1e-8)
    # gradients are left for the caller to clear
    assert np.array_equal(store.grads["w"], [0.5, -3.0, 4.0])


@pytest.mark.parametrize("precision", ["float32", "float64"])
def test_adam_with_zero_gradients_is_the_identity(precision):
    """Test zero gradients leave parameters unchanged while t advances."""
    store = ParamStore(precision)
    store.add("w", np.random.default_rng(2).standard_normal((3, 4)))
    before = store["w"].copy()
    state = AdamState(store)
    for step in range(1, 11):
        adam_step(store, state, lr=0.1)
        assert state.t == step
        assert np.array_equal(store["w"], before)


def test_adam_closed_form_steps_for_unit_gradient():
    """Test a scalar with g=1 moves by lr / (1 + eps) on the first step and again on the second."""
    store = ParamStore("float64")
    store.add("x", np.array([0.0]))
    store.accumulate("x", np.array([1.0]))
    state = AdamState(store)

    adam_step(store, state, lr=1e-3)
    first = float(store["x"][0])
    assert first == pytest.approx(-1e-3 / (1.0 + 1e-8), abs=1e-15)
    assert first == pytest.approx(-9.99999995e-4, rel=1e-8)

    adam_step(store, state, lr=1e-3)
    second = float(store["x"][0]) - first
    assert abs(second - first) < 1e-6


def test_adam_minimizes_quadratic(quadratic_store):
    """Test repeated Adam steps drive a quadratic towards its minimum."""
    state = AdamState(quadratic_store)
    start = quadratic_loss(quadratic_store)
    for _ in range(500):
        quadratic_store.zero_grad()
        quadratic_loss(quadratic_store)
        adam_step(quadratic_store, state, lr=0.05)
    quadratic_store.zero_grad()
    assert quadratic_loss(quadratic_store) < 1e-2 * start


def test_adam_rejects_unknown_parameter(quadratic_store):
    """Test a parameter added after the optimizer state was built is rejected."""
    state = AdamState(quadratic_store)
    quadratic_store.add("late", np.zeros(2))

    with pytest.raises(ConsistencyError, match="late"):
        adam_step(quadratic_store, state, lr=0.1)
    assert state.t == 0


def test_grad_check_accepts_exact_gradient(quadratic_store):
    """Test grad_check reports a tiny error for a correct gradient."""
    assert grad_check(quadratic_loss, quadratic_store, probe_count=20) < 1e-6


def test_grad_check_flags_wrong_gradient(quadratic_store):
    """Test grad_check exposes a gradient that is off by a factor of two."""

    def wrong(store):
        loss = quadratic_loss(store)
        store.grads["w"] *= 2.0
        return loss

    assert grad_check(wrong, quadratic_store, probe_count=20) > 0.3


def test_grad_check_names_non_finite_coordinate():
    """Test a loss that blows up under perturbation raises NumericalError."""
    store = ParamStore("float64")
    store.add("x", np.array([0.0]))

    def singular(params):
        value = params["x"][0]
        params.accumulate("x", np.array([0.0]))
        return 0.0 if value == 0.0 else np.inf

    with pytest.raises(NumericalError, match=r"x\[0\]"):
        grad_check(singular, store, probe_count=1)
