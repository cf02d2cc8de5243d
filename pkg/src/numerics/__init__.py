"""Dense numerical kernel: matrices, parameters, Adam and gradient checking."""

from .tensor import activation, activation_derivative, check_finite, matmul, resolve_dtype
from .params import ParamStore, he_uniform, uniform_init
from .optim import AdamState, adam_step
from .gradcheck import grad_check

__all__ = [
    "activation",
    "activation_derivative",
    "check_finite",
    "matmul",
    "resolve_dtype",
    "ParamStore",
    "he_uniform",
    "uniform_init",
    "AdamState",
    "adam_step",
    "grad_check",
]
