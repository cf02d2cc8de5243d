"""
Autoregressive Predictive Coding: stacked unidirectional LSTMs with residual
paths between equal-width layers, and a linear regression head trained to
predict the frame n steps ahead under an L1 loss.
"""

import logging
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from ..data.batching import make_batches
from ..errors import ContractError, DimensionError, EmptyInputError, ShiftError
from ..numerics import AdamState, ParamStore, adam_step, check_finite, uniform_init
from .lstm import LstmCache, LstmLayer, lstm_backward, lstm_forward, sequence_mask
from .schema import ApcTrainConfig, FeatureSequence

logger = logging.getLogger(__name__)


class ApcModel:
    """LSTM stack plus regression head; parameters live in one ParamStore."""

    def __init__(
        self,
        store: ParamStore,
        layers: List[LstmLayer],
        input_dim: int,
        hidden_size: int,
        residual: bool = True,
        n_steps: Optional[int] = None,
    ):
        if not 1 <= len(layers) <= 4:
            raise ContractError(f"APC supports 1 to 4 layers, got {len(layers)}")
        self.store = store
        self.layers = layers
        self.input_dim = input_dim
        self.hidden_size = hidden_size
        self.residual = residual
        self.n_steps = n_steps

    @classmethod
    def create(
        cls,
        input_dim: int,
        hidden_size: int = 512,
        num_layers: int = 3,
        residual: bool = True,
        seed: int = 0,
        precision: str = "float32",
        n_steps: Optional[int] = None,
    ) -> "ApcModel":
        rng = np.random.default_rng(seed)
        store = ParamStore(precision)
        layers = []
        width = input_dim
        for index in range(num_layers):
            layers.append(LstmLayer.create(store, f"lstm.{index}", width, hidden_size, rng))
            width = hidden_size
        bound = 1.0 / np.sqrt(hidden_size)
        store.add("regression.weight", uniform_init(rng, (input_dim, hidden_size), bound))
        store.add("regression.bias", np.zeros(input_dim))
        return cls(store, layers, input_dim, hidden_size, residual, n_steps)

    @classmethod
    def from_config(cls, input_dim: int, cfg: ApcTrainConfig) -> "ApcModel":
        return cls.create(
            input_dim, cfg.hidden_size, cfg.num_layers, cfg.residual, cfg.seed, cfg.precision, cfg.n_steps
        )

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def has_residual(self, index: int) -> bool:
        """Residual paths exist only into layers 2.. whose input width equals H."""
        return self.residual and index > 0 and self.layers[index].input_size == self.hidden_size

    def metadata(self) -> Dict[str, Union[str, int, bool]]:
        return {
            "kind": "apc",
            "input_dim": self.input_dim,
            "hidden_size": self.hidden_size,
            "num_layers": self.num_layers,
            "residual": self.residual,
            "n_steps": self.n_steps if self.n_steps is not None else 0,
            "precision": str(self.store.dtype),
        }


class ApcTrainingResult:
    """A trained model and its per-epoch mean L1 loss."""

    def __init__(self, model: ApcModel, history: List[float]):
        self.model = model
        self.history = history


def _forward(
    model: ApcModel, x: np.ndarray, lengths: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, List[np.ndarray], List[LstmCache]]:
    if x.shape[-1] != model.input_dim:
        raise DimensionError(f"APC expects {model.input_dim}-dim frames, got {x.shape[-1]}")
    inputs = x.astype(model.store.dtype, copy=False)
    hiddens: List[np.ndarray] = []
    caches: List[LstmCache] = []
    for index, layer in enumerate(model.layers):
        outputs, cache = lstm_forward(layer, inputs, lengths)
        if model.has_residual(index):
            outputs = outputs + inputs
        hiddens.append(outputs)
        caches.append(cache)
        inputs = outputs
    predictions = inputs @ model.store["regression.weight"].T + model.store["regression.bias"]
    if lengths is not None:
        mask = sequence_mask(lengths, x.shape[0], x.shape[1], predictions.dtype)
        predictions = predictions * mask[:, :, None]
    return predictions, hiddens, caches


def _backward(model: ApcModel, hiddens: List[np.ndarray], caches: List[LstmCache], grad_y: np.ndarray) -> None:
    top = hiddens[-1]
    weight = model.store["regression.weight"]
    model.store.accumulate("regression.weight", grad_y.reshape(-1, model.input_dim).T @ top.reshape(-1, model.hidden_size))
    model.store.accumulate("regression.bias", grad_y.reshape(-1, model.input_dim).sum(axis=0))
    grad = grad_y @ weight
    for index in reversed(range(model.num_layers)):
        grad_inputs = lstm_backward(model.layers[index], caches[index], grad)
        if model.has_residual(index):
            grad_inputs = grad_inputs + grad
        grad = grad_inputs


def apc_forward(
    model: ApcModel, x: np.ndarray, lengths: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, List[np.ndarray]]:
    """
    Predictions y (same shape as x) and the post-residual outputs of every layer.

    Accepts T x D or padded B x T x D input with per-utterance lengths.
    """
    predictions, hiddens, _ = _forward(model, x, lengths)
    return predictions, hiddens


def apc_loss(x: np.ndarray, y: np.ndarray, n: int) -> float:
    """Sum over i = 1..T-n of |x_{i+n} - y_i| across all dimensions."""
    steps = x.shape[0]
    if y.shape != x.shape:
        raise DimensionError(f"Prediction shape {y.shape} differs from input {x.shape}")
    if not 1 <= n < steps:
        raise ShiftError(f"Shift n={n} requires 1 <= n < T={steps}")
    return float(np.abs(x[n:] - y[: steps - n]).sum())


def masked_l1(
    x: np.ndarray, y: np.ndarray, n: int, lengths: Optional[np.ndarray] = None
) -> Tuple[float, int, np.ndarray]:
    """
    Masked shifted L1 over a padded batch.

    Returns (raw sum, number of valid (i, d) terms, d sum / d y). The
    subgradient of |0| is taken as 0.
    """
    if x.ndim == 2:
        total, count, grad = masked_l1(x[None], y[None], n, None if lengths is None else np.atleast_1d(lengths))
        return total, count, grad[0]
    batch, steps, dim = x.shape
    if not 1 <= n < steps:
        raise ShiftError(f"Shift n={n} requires 1 <= n < T={steps}")
    mask = sequence_mask(lengths, batch, steps, y.dtype)[:, n:, None]
    diff = y[:, : steps - n] - x[:, n:].astype(y.dtype, copy=False)
    total = float((np.abs(diff) * mask).sum(dtype=np.float64))
    count = int(mask.sum()) * dim
    grad = np.zeros_like(y)
    grad[:, : steps - n] = np.sign(diff) * mask
    return total, count, grad


def apc_objective(
    model: ApcModel, x: np.ndarray, n: int, lengths: Optional[np.ndarray] = None, normalize: bool = True
) -> Tuple[float, int]:
    """
    Forward, loss and backward for one batch; gradients accumulate into
    model.store.

    With normalize the loss (and gradient) is divided by the valid-term count;
    otherwise the raw summed loss is returned.
    """
    predictions, hiddens, caches = _forward(model, x, lengths)
    total, count, grad = masked_l1(x, predictions, n, lengths)
    if count == 0:
        raise EmptyInputError("No valid prediction targets in batch")
    scale = 1.0 / count if normalize else 1.0
    _backward(model, hiddens, caches, grad * scale)
    return total * scale, count


def _check_corpus(corpus: List[FeatureSequence], n_steps: int, input_dim: Optional[int] = None) -> None:
    if not corpus:
        raise EmptyInputError("Training corpus is empty")
    for sequence in corpus:
        if sequence.num_frames < n_steps + 1:
            raise ShiftError(
                f"Utterance {sequence.utterance_id} has {sequence.num_frames} frames; n_steps={n_steps} needs at least {n_steps + 1}"
            )
        if input_dim is not None and sequence.dim != input_dim:
            raise DimensionError(f"Utterance {sequence.utterance_id} has {sequence.dim}-dim frames, expected {input_dim}")


def train_apc(
    corpus: List[FeatureSequence], cfg: ApcTrainConfig, model: Optional[ApcModel] = None
) -> ApcTrainingResult:
    """Mini-batch Adam training of APC on a normalized corpus."""
    _check_corpus(corpus, cfg.n_steps)
    model = model or ApcModel.from_config(corpus[0].dim, cfg)
    _check_corpus(corpus, cfg.n_steps, model.input_dim)
    state = AdamState(model.store)
    history: List[float] = []
    for epoch in range(cfg.epochs):
        total, count = 0.0, 0
        for batch in make_batches(corpus, cfg.batch_size, seed=cfg.seed, epoch=epoch):
            model.store.zero_grad()
            loss, terms = apc_objective(model, batch.features, cfg.n_steps, batch.lengths)
            check_finite("APC loss", np.asarray(loss))
            adam_step(model.store, state, cfg.lr)
            total += loss * terms
            count += terms
        history.append(total / count)
        logger.info("APC epoch %d/%d loss %.6f", epoch + 1, cfg.epochs, history[-1])
    model.store.zero_grad()
    return ApcTrainingResult(model, history)


def evaluate_apc(model: ApcModel, corpus: List[FeatureSequence], n: int, batch_size: int = 32) -> float:
    """Mean L1 per valid term with frozen weights."""
    _check_corpus(corpus, n, model.input_dim)
    total, count = 0.0, 0
    for batch in make_batches(corpus, batch_size, shuffle=False):
        predictions, _, _ = _forward(model, batch.features, batch.lengths)
        batch_total, batch_count, _ = masked_l1(batch.features, predictions, n, batch.lengths)
        total += batch_total
        count += batch_count
    return total / count


def copy_baseline_loss(corpus: List[FeatureSequence], n: int) -> float:
    """Mean L1 per term of the copy predictor y_i = x_i."""
    _check_corpus(corpus, n)
    total, count = 0.0, 0
    for sequence in corpus:
        frames = sequence.frames.astype(np.float64)
        total += apc_loss(frames, frames, n)
        count += (sequence.num_frames - n) * sequence.dim
    return total / count


def extract_apc(model: ApcModel, x: np.ndarray, layer: Union[int, str] = -1) -> np.ndarray:
    """
    Post-residual outputs of one layer (1-based), or of all layers
    concatenated when layer is "all". -1 selects the last layer.
    """
    _, hiddens, _ = _forward(model, x)
    if layer == "all":
        return np.concatenate(hiddens, axis=-1)
    if layer == -1:
        layer = model.num_layers
    if not isinstance(layer, (int, np.integer)) or not 1 <= layer <= model.num_layers:
        raise ContractError(f"Layer {layer} out of range 1..{model.num_layers}")
    return hiddens[layer - 1].copy()
