"""
Unidirectional LSTM layer with a hand-written backpropagation-through-time pass.

Gate order inside the stacked 4H weight rows is input, forget, cell, output.
"""

from typing import Optional, Tuple

import numpy as np

from ..errors import DimensionError
from ..numerics import ParamStore, activation, activation_derivative, uniform_init


class LstmLayer:
    """A view onto the wx/wh/bias tensors of one LSTM layer inside a ParamStore."""

    def __init__(self, store: ParamStore, prefix: str, input_size: int, hidden_size: int):
        self.store = store
        self.prefix = prefix
        self.input_size = input_size
        self.hidden_size = hidden_size

    @classmethod
    def create(
        cls, store: ParamStore, prefix: str, input_size: int, hidden_size: int, rng: np.random.Generator
    ) -> "LstmLayer":
        """Uniform(-1/sqrt(H), 1/sqrt(H)) weights, zero bias except forget gate = 1."""
        bound = 1.0 / np.sqrt(hidden_size)
        store.add(f"{prefix}.wx", uniform_init(rng, (4 * hidden_size, input_size), bound))
        store.add(f"{prefix}.wh", uniform_init(rng, (4 * hidden_size, hidden_size), bound))
        bias = np.zeros(4 * hidden_size)
        bias[hidden_size : 2 * hidden_size] = 1.0
        store.add(f"{prefix}.bias", bias)
        return cls(store, prefix, input_size, hidden_size)

    @property
    def wx(self) -> np.ndarray:
        return self.store[f"{self.prefix}.wx"]

    @property
    def wh(self) -> np.ndarray:
        return self.store[f"{self.prefix}.wh"]

    @property
    def bias(self) -> np.ndarray:
        return self.store[f"{self.prefix}.bias"]


class LstmCache:
    """Everything the backward pass needs from a forward pass."""

    def __init__(self, inputs, gates, cells, hiddens, mask):
        self.inputs = inputs
        self.gates = gates
        self.cells = cells
        self.hiddens = hiddens
        self.mask = mask


def _as_batch(x: np.ndarray) -> Tuple[np.ndarray, bool]:
    if x.ndim == 2:
        return x[None], True
    if x.ndim == 3:
        return x, False
    raise DimensionError(f"Expected T x D or B x T x D input, got shape {x.shape}")


def sequence_mask(lengths: Optional[np.ndarray], batch: int, steps: int, dtype) -> np.ndarray:
    """B x T mask with ones at valid frames."""
    if lengths is None:
        return np.ones((batch, steps), dtype=dtype)
    lengths = np.asarray(lengths)
    return (np.arange(steps)[None, :] < lengths[:, None]).astype(dtype)


def lstm_forward(
    layer: LstmLayer, inputs: np.ndarray, lengths: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, LstmCache]:
    """
    Run the recurrence left to right from zero initial states.

    inputs is T x Din or B x T x Din; outputs have the same leading shape with
    width H. Outputs past a sequence's true length are zeroed.
    """
    x, squeeze = _as_batch(inputs)
    batch, steps, width = x.shape
    if width != layer.input_size:
        raise DimensionError(f"LSTM {layer.prefix} expects input width {layer.input_size}, got {width}")
    H = layer.hidden_size
    dtype = layer.wx.dtype
    x = x.astype(dtype, copy=False)

    projected = x @ layer.wx.T + layer.bias
    wh_t = layer.wh.T
    gates = np.empty((batch, steps, 4 * H), dtype=dtype)
    cells = np.empty((batch, steps, H), dtype=dtype)
    hiddens = np.empty((batch, steps, H), dtype=dtype)
    h = np.zeros((batch, H), dtype=dtype)
    c = np.zeros((batch, H), dtype=dtype)
    for t in range(steps):
        a = projected[:, t] + h @ wh_t
        i = activation("sigmoid", a[:, :H])
        f = activation("sigmoid", a[:, H : 2 * H])
        g = activation("tanh", a[:, 2 * H : 3 * H])
        o = activation("sigmoid", a[:, 3 * H :])
        c = f * c + i * g
        h = o * activation("tanh", c)
        gates[:, t, :H] = i
        gates[:, t, H : 2 * H] = f
        gates[:, t, 2 * H : 3 * H] = g
        gates[:, t, 3 * H :] = o
        cells[:, t] = c
        hiddens[:, t] = h

    mask = sequence_mask(lengths, batch, steps, dtype)
    outputs = hiddens * mask[:, :, None]
    cache = LstmCache(x, gates, cells, hiddens, mask)
    return (outputs[0] if squeeze else outputs), cache


def lstm_backward(layer: LstmLayer, cache: LstmCache, grad_outputs: np.ndarray) -> np.ndarray:
    """
    Backpropagate through time, accumulating into the layer's gradient buffers.

    Returns the gradient with respect to the layer inputs, shaped like them.
    """
    dout, squeeze = _as_batch(grad_outputs)
    H = layer.hidden_size
    batch, steps, _ = cache.hiddens.shape
    dout = dout * cache.mask[:, :, None]

    dgates = np.empty((batch, steps, 4 * H), dtype=cache.hiddens.dtype)
    dh_next = np.zeros((batch, H), dtype=cache.hiddens.dtype)
    dc_next = np.zeros((batch, H), dtype=cache.hiddens.dtype)
    wh = layer.wh
    for t in reversed(range(steps)):
        i = cache.gates[:, t, :H]
        f = cache.gates[:, t, H : 2 * H]
        g = cache.gates[:, t, 2 * H : 3 * H]
        o = cache.gates[:, t, 3 * H :]
        c_prev = cache.cells[:, t - 1] if t > 0 else np.zeros_like(dc_next)
        tanh_c = activation("tanh", cache.cells[:, t])

        dh = dout[:, t] + dh_next
        dc = dh * o * activation_derivative("tanh", tanh_c) + dc_next
        dgates[:, t, :H] = dc * g * activation_derivative("sigmoid", i)
        dgates[:, t, H : 2 * H] = dc * c_prev * activation_derivative("sigmoid", f)
        dgates[:, t, 2 * H : 3 * H] = dc * i * activation_derivative("tanh", g)
        dgates[:, t, 3 * H :] = dh * tanh_c * activation_derivative("sigmoid", o)
        dc_next = dc * f
        dh_next = dgates[:, t] @ wh

    h_prev = np.concatenate([np.zeros_like(cache.hiddens[:, :1]), cache.hiddens[:, :-1]], axis=1)
    flat_dgates = dgates.reshape(-1, 4 * H)
    layer.store.accumulate(f"{layer.prefix}.wx", flat_dgates.T @ cache.inputs.reshape(-1, layer.input_size))
    layer.store.accumulate(f"{layer.prefix}.wh", flat_dgates.T @ h_prev.reshape(-1, H))
    layer.store.accumulate(f"{layer.prefix}.bias", flat_dgates.sum(axis=0))
    dx = dgates @ layer.wx
    return dx[0] if squeeze else dx
