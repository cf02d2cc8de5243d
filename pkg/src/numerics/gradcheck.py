"""
Central finite-difference verification of hand-written backward passes.
"""

import logging
from typing import Callable

import numpy as np

from ..errors import NumericalError
from .params import ParamStore

logger = logging.getLogger(__name__)


def grad_check(
    loss_fn: Callable[[ParamStore], float],
    params: ParamStore,
    probe_count: int = 50,
    eps: float = 1e-5,
    seed: int = 0,
) -> float:
    """
    Compare analytic gradients against central differences.

    loss_fn(params) must return the scalar loss and leave the analytic gradient
    in params.grads (accumulated from zero). probe_count coordinates are drawn
    uniformly over all parameter entries. Returns the largest relative error
    |analytic - numeric| / max(|analytic|, |numeric|, 1e-12).
    """
    params.zero_grad()
    base = float(loss_fn(params))
    if not np.isfinite(base):
        raise NumericalError("Loss is not finite at the unperturbed point")
    analytic = {name: grad.copy() for name, grad in params.grads.items()}

    names = params.names()
    sizes = np.array([params[name].size for name in names], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(seed)
    picks = rng.integers(0, int(offsets[-1]), size=probe_count)

    worst = 0.0
    for flat in picks:
        slot = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[slot]
        index = int(flat - offsets[slot])
        value = params[name].reshape(-1)
        original = value[index]

        value[index] = original + eps
        params.zero_grad()
        loss_plus = float(loss_fn(params))
        value[index] = original - eps
        params.zero_grad()
        loss_minus = float(loss_fn(params))
        value[index] = original

        if not (np.isfinite(loss_plus) and np.isfinite(loss_minus)):
            raise NumericalError(f"Non-finite loss when perturbing {name}[{index}]")

        numeric = (loss_plus - loss_minus) / (2.0 * eps)
        exact = float(analytic[name].reshape(-1)[index])
        error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-12)
        if error > worst:
            logger.debug("grad_check %s[%d]: analytic=%g numeric=%g", name, index, exact, numeric)
        worst = max(worst, error)

    params.zero_grad()
    for name, grad in analytic.items():
        params.grads[name][...] = grad
    return worst
