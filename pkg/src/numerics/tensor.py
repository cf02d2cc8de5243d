"""
Dense matrix helpers: checked products and the activation functions used by
the recurrent and feed-forward layers.

Matrices are plain numpy arrays. Training runs in float32, gradient checks in
float64; the dtype of the inputs decides the precision of every result.
"""

from typing import Callable, Dict, Tuple, Union

import numpy as np
from scipy.special import expit

from ..errors import DimensionError, NumericalError

PRECISIONS: Dict[str, np.dtype] = {
    "float32": np.dtype(np.float32),
    "float64": np.dtype(np.float64),
}


def resolve_dtype(precision: Union[str, np.dtype, type]) -> np.dtype:
    """Map a precision name ("float32"/"float64") or dtype to a numpy dtype."""
    if isinstance(precision, str):
        if precision not in PRECISIONS:
            raise DimensionError(f"Unsupported precision: {precision}")
        return PRECISIONS[precision]
    return np.dtype(precision)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product a @ b with an explicit shape check."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"Cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0).astype(x.dtype, copy=False)


# Derivatives are expressed through the activation output, which is what the
# backward passes keep in their caches.
_ACTIVATIONS: Dict[str, Tuple[Callable, Callable]] = {
    "sigmoid": (lambda x: expit(x), lambda y: y * (1 - y)),
    "tanh": (np.tanh, lambda y: 1 - y * y),
    "relu": (_relu, lambda y: (y > 0).astype(y.dtype)),
}


def activation(kind: str, x: np.ndarray) -> np.ndarray:
    """Apply an elementwise nonlinearity ("sigmoid", "tanh" or "relu")."""
    try:
        fn, _ = _ACTIVATIONS[kind]
    except KeyError:
        raise DimensionError(f"Unknown activation: {kind}") from None
    return fn(x)


def activation_derivative(kind: str, y: np.ndarray) -> np.ndarray:
    """Derivative of the activation, evaluated from its output y."""
    try:
        _, grad = _ACTIVATIONS[kind]
    except KeyError:
        raise DimensionError(f"Unknown activation: {kind}") from None
    return grad(y)


def check_finite(name: str, x: np.ndarray) -> np.ndarray:
    """Raise NumericalError if x holds NaN or infinity."""
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"Non-finite values in {name}")
    return x
