"""
Adam optimizer operating on a ParamStore.
"""

from typing import Dict

import numpy as np

from ..errors import ConsistencyError
from .params import ParamStore


class AdamState:
    """First/second moment estimates and the step counter for Adam."""

    def __init__(self, params: ParamStore, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: Dict[str, np.ndarray] = {name: np.zeros_like(value) for name, value in params.items()}
        self.v: Dict[str, np.ndarray] = {name: np.zeros_like(value) for name, value in params.items()}


def adam_step(params: ParamStore, state: AdamState, lr: float) -> None:
    """
    Apply one bias-corrected Adam update in place.

    Gradients are read, not cleared; the caller zeroes them before the next
    accumulation.
    """
    for name, value in params.items():
        grad = params.grads.get(name)
        if grad is None:
            raise ConsistencyError(f"No gradient populated for parameter {name}")
        if grad.shape != value.shape:
            raise ConsistencyError(f"Gradient shape {grad.shape} does not match parameter {name} {value.shape}")
        if name not in state.m or state.m[name].shape != value.shape:
            raise ConsistencyError(f"Optimizer state has no moments for parameter {name}")

    state.t += 1
    bias1 = 1.0 - state.beta1 ** state.t
    bias2 = 1.0 - state.beta2 ** state.t
    for name, value in params.items():
        grad = params.grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * grad
        v *= state.beta2
        v += (1.0 - state.beta2) * grad * grad
        m_hat = m / bias1
        v_hat = v / bias2
        value -= (lr * m_hat / (np.sqrt(v_hat) + state.epsilon)).astype(value.dtype, copy=False)
