"""
Contrastive Predictive Coding over log-Mel frames: a feed-forward frame
encoder, an LSTM context encoder and step-specific bilinear scorers trained
with an InfoNCE loss against sampled or exhaustive negatives.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from ..data.batching import Batch, make_batches
from ..errors import ContractError, DimensionError, EmptyInputError, SamplingError, ShiftError
from ..numerics import AdamState, ParamStore, activation, activation_derivative, adam_step, check_finite, he_uniform, uniform_init
from .lstm import LstmLayer, lstm_backward, lstm_forward
from .schema import CpcTrainConfig, CpcVariant, FeatureSequence, NegativeStrategy

logger = logging.getLogger(__name__)

ENCODER_DEPTH = 3
SCORER_INIT_SCALE = 0.1


class FrameEncoder:
    """Three affine + ReLU layers applied to every frame independently."""

    def __init__(self, store: ParamStore, input_dim: int, width: int, prefix: str = "encoder"):
        self.store = store
        self.input_dim = input_dim
        self.width = width
        self.prefix = prefix

    @classmethod
    def create(cls, store: ParamStore, input_dim: int, width: int, rng: np.random.Generator) -> "FrameEncoder":
        fan_in = input_dim
        for index in range(ENCODER_DEPTH):
            store.add(f"encoder.{index}.weight", he_uniform(rng, width, fan_in))
            store.add(f"encoder.{index}.bias", np.zeros(width))
            fan_in = width
        return cls(store, input_dim, width)

    def weight(self, index: int) -> np.ndarray:
        return self.store[f"{self.prefix}.{index}.weight"]

    def bias(self, index: int) -> np.ndarray:
        return self.store[f"{self.prefix}.{index}.bias"]


class ContextRnn:
    """Single causal LSTM layer over encoded frames."""

    def __init__(self, layer: LstmLayer):
        self.layer = layer

    @classmethod
    def create(cls, store: ParamStore, input_size: int, hidden_size: int, rng: np.random.Generator) -> "ContextRnn":
        return cls(LstmLayer.create(store, "context", input_size, hidden_size, rng))


class BilinearScorer:
    """One Z x C weight per prediction step; f(z, c) = exp(z^T W_k c)."""

    def __init__(self, store: ParamStore, num_steps: int):
        self.store = store
        self.num_steps = num_steps

    @classmethod
    def create(
        cls, store: ParamStore, num_steps: int, z_dim: int, c_dim: int, rng: np.random.Generator
    ) -> "BilinearScorer":
        bound = SCORER_INIT_SCALE / np.sqrt(z_dim)
        for index in range(num_steps):
            store.add(f"scorer.{index}", uniform_init(rng, (z_dim, c_dim), bound))
        return cls(store, num_steps)

    def weight(self, slot: int) -> np.ndarray:
        return self.store[f"scorer.{slot}"]


class CpcModel:
    """Frame encoder, context RNN and scorer sharing one ParamStore."""

    def __init__(
        self,
        store: ParamStore,
        encoder: FrameEncoder,
        context: ContextRnn,
        scorer: BilinearScorer,
        n_steps: int,
        variant: CpcVariant,
        negatives: int,
    ):
        self.store = store
        self.encoder = encoder
        self.context = context
        self.scorer = scorer
        self.n_steps = n_steps
        self.variant = variant
        self.negatives = negatives

    @classmethod
    def create(
        cls,
        input_dim: int,
        encoder_width: int = 512,
        hidden_size: int = 512,
        n_steps: int = 2,
        variant: CpcVariant = CpcVariant.N9SAME,
        negatives: int = 9,
        seed: int = 0,
        precision: str = "float32",
    ) -> "CpcModel":
        rng = np.random.default_rng(seed)
        store = ParamStore(precision)
        encoder = FrameEncoder.create(store, input_dim, encoder_width, rng)
        context = ContextRnn.create(store, encoder_width, hidden_size, rng)
        slots = n_steps if variant == CpcVariant.CTX_EXHAUST else 1
        scorer = BilinearScorer.create(store, slots, encoder_width, hidden_size, rng)
        return cls(store, encoder, context, scorer, n_steps, variant, negatives)

    @classmethod
    def from_config(cls, input_dim: int, cfg: CpcTrainConfig) -> "CpcModel":
        return cls.create(
            input_dim, cfg.encoder_width, cfg.hidden_size, cfg.n_steps, cfg.variant, cfg.negatives, cfg.seed, cfg.precision
        )

    @property
    def input_dim(self) -> int:
        return self.encoder.input_dim

    @property
    def strategy(self) -> NegativeStrategy:
        return CpcTrainConfig(variant=self.variant).strategy

    @property
    def tap(self) -> str:
        return CpcTrainConfig(variant=self.variant).tap

    def steps(self) -> List[Tuple[int, int]]:
        """(step k, scorer slot) pairs the training loss sums over."""
        if self.scorer.num_steps == 1:
            return [(self.n_steps, 0)]
        return [(k, k - 1) for k in range(1, self.scorer.num_steps + 1)]

    def metadata(self) -> Dict[str, Union[str, int]]:
        return {
            "kind": "cpc",
            "input_dim": self.input_dim,
            "encoder_width": self.encoder.width,
            "hidden_size": self.context.layer.hidden_size,
            "n_steps": self.n_steps,
            "variant": self.variant.value,
            "strategy": self.strategy.value,
            "negatives": self.negatives,
            "scorer_steps": self.scorer.num_steps,
            "precision": str(self.store.dtype),
        }


class CpcTrainingResult:
    """A trained model, its per-epoch loss and the loss before any update."""

    def __init__(self, model: CpcModel, history: List[float], initial_loss: float):
        self.model = model
        self.history = history
        self.initial_loss = initial_loss


def _encode(encoder: FrameEncoder, x: np.ndarray) -> List[np.ndarray]:
    if x.shape[-1] != encoder.input_dim:
        raise DimensionError(f"Frame encoder expects {encoder.input_dim}-dim frames, got {x.shape[-1]}")
    activations = [x.astype(encoder.store.dtype, copy=False)]
    for index in range(ENCODER_DEPTH):
        pre = activations[-1] @ encoder.weight(index).T + encoder.bias(index)
        activations.append(activation("relu", pre))
    return activations


def _encoder_backward(encoder: FrameEncoder, activations: List[np.ndarray], grad: np.ndarray) -> None:
    for index in reversed(range(ENCODER_DEPTH)):
        grad = grad * activation_derivative("relu", activations[index + 1])
        inputs = activations[index]
        encoder.store.accumulate(
            f"{encoder.prefix}.{index}.weight", grad.reshape(-1, grad.shape[-1]).T @ inputs.reshape(-1, inputs.shape[-1])
        )
        encoder.store.accumulate(f"{encoder.prefix}.{index}.bias", grad.reshape(-1, grad.shape[-1]).sum(axis=0))
        if index > 0:
            grad = grad @ encoder.weight(index)


def encode_frames(encoder: FrameEncoder, x: np.ndarray) -> np.ndarray:
    """z_i = E_frm(x_i) for every frame; no mixing across time."""
    return _encode(encoder, x)[-1]


def context_forward(rnn: ContextRnn, z: np.ndarray, lengths: Optional[np.ndarray] = None) -> np.ndarray:
    """c_i = E_ctx(z_1..z_i)."""
    outputs, _ = lstm_forward(rnn.layer, z, lengths)
    return outputs


def info_nce(logits: np.ndarray, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-row -log softmax(logits)[target] and its gradient w.r.t. logits,
    computed in the log domain.
    """
    lse = logsumexp(logits, axis=1)
    rows = np.arange(logits.shape[0])
    losses = lse - logits[rows, targets]
    grad = np.exp(logits - lse[:, None])
    grad[rows, targets] -= 1.0
    return losses, grad


def cpc_loss(c_i: np.ndarray, pos_z: np.ndarray, neg_z: Sequence[np.ndarray], w_k: np.ndarray) -> float:
    """
    InfoNCE for one anchor: -log f(pos) / (f(pos) + sum f(neg)).

    Negative logits are sorted before the reduction, so the value does not
    depend on the order of neg_z.
    """
    if len(neg_z) == 0:
        raise EmptyInputError("cpc_loss needs at least one negative")
    prediction = w_k @ np.asarray(c_i, dtype=np.float64)
    positive = float(np.asarray(pos_z, dtype=np.float64) @ prediction)
    negatives = np.sort(np.asarray(neg_z, dtype=np.float64) @ prediction)
    logits = np.concatenate([[positive], negatives])
    return float(logsumexp(logits) - positive)


class NegativeSampler:
    """Draws negative frame indices according to a proposal strategy."""

    def __init__(self, strategy: NegativeStrategy, k: int = 9, seed: int = 0):
        self.strategy = NegativeStrategy(strategy)
        self.k = k
        self.rng = np.random.default_rng(seed)

    def draw(self, lengths: np.ndarray, utterances: np.ndarray, targets: np.ndarray) -> np.ndarray:
        """
        Indices into the concatenation of all valid batch frames, one row per
        anchor. utterances/targets give each anchor's utterance and target
        position. Sampled strategies return A x k; exhaustive returns every
        frame except the target (single anchor only).
        """
        lengths = np.asarray(lengths, dtype=np.int64)
        utterances = np.atleast_1d(np.asarray(utterances, dtype=np.int64))
        targets = np.atleast_1d(np.asarray(targets, dtype=np.int64))
        offsets = np.concatenate([[0], np.cumsum(lengths)])
        if np.any(targets >= lengths[utterances]) or np.any(targets < 0):
            raise SamplingError("Anchor target lies outside its utterance")

        if self.strategy == NegativeStrategy.EXHAUSTIVE_BATCH:
            if utterances.size != 1:
                raise SamplingError("Exhaustive sampling is defined per anchor")
            target = offsets[utterances[0]] + targets[0]
            everything = np.arange(offsets[-1])
            if everything.size < 2:
                raise SamplingError("Batch has no frame besides the target")
            return np.delete(everything, target)[None]

        if self.strategy == NegativeStrategy.WITHIN_UTTERANCE:
            own = lengths[utterances]
            if np.any(own < 2):
                raise SamplingError("Within-utterance sampling needs at least two frames per utterance")
            draws = self.rng.integers(0, (own - 1)[:, None], size=(utterances.size, self.k))
            draws = draws + (draws >= targets[:, None])
            return offsets[utterances][:, None] + draws

        others = offsets[-1] - lengths[utterances]
        if np.any(others < 1):
            raise SamplingError("Within-batch sampling needs frames from another utterance")
        draws = self.rng.integers(0, others[:, None], size=(utterances.size, self.k))
        start = offsets[utterances][:, None]
        return draws + (draws >= start) * lengths[utterances][:, None]


def sample_negatives(
    batch: List[FeatureSequence], anchor: Tuple[int, int], sampler: NegativeSampler, step: int
) -> np.ndarray:
    """Negative frames (rows) for the anchor (utterance index, time) at step k."""
    if not batch:
        raise SamplingError("Cannot sample from an empty batch")
    utt, time = anchor
    lengths = np.array([s.num_frames for s in batch])
    indices = sampler.draw(lengths, np.array([utt]), np.array([time + step]))[0]
    frames = np.concatenate([s.frames for s in batch], axis=0)
    return frames[indices]


def _anchors(lengths: np.ndarray, steps: int, step: int) -> Tuple[np.ndarray, np.ndarray]:
    valid = np.arange(steps)[None, :] + step < lengths[:, None]
    return np.nonzero(valid)


def _contrastive_objective(
    model: CpcModel,
    features: np.ndarray,
    lengths: np.ndarray,
    sampler: NegativeSampler,
    steps: List[Tuple[int, int]],
    backward: bool = True,
) -> float:
    batch, total_steps, _ = features.shape
    activations = _encode(model.encoder, features)
    z = activations[-1]
    context, ctx_cache = lstm_forward(model.context.layer, z, lengths)
    mask = np.arange(total_steps)[None, :] < lengths[:, None]
    valid_z = z[mask]
    offsets = np.concatenate([[0], np.cumsum(lengths)])

    grad_valid_z = np.zeros_like(valid_z)
    grad_context = np.zeros_like(context)
    loss = 0.0
    for step, slot in steps:
        utts, times = _anchors(lengths, total_steps, step)
        if utts.size == 0:
            raise ShiftError(f"No anchors for step {step}: every utterance is shorter than {step + 1} frames")
        weight = model.scorer.weight(slot)
        anchors_c = context[utts, times]
        prediction = anchors_c @ weight.T
        positives = offsets[utts] + times + step

        if sampler.strategy == NegativeStrategy.EXHAUSTIVE_BATCH:
            logits = prediction @ valid_z.T
            losses, grad_logits = info_nce(logits, positives)
            grad_logits /= utts.size
            grad_prediction = grad_logits @ valid_z
            grad_valid_z += grad_logits.T @ prediction
        else:
            negatives = sampler.draw(lengths, utts, times + step)
            candidates = np.concatenate([positives[:, None], negatives], axis=1)
            cand_z = valid_z[candidates]
            logits = np.einsum("akz,az->ak", cand_z, prediction)
            losses, grad_logits = info_nce(logits, np.zeros(utts.size, dtype=np.int64))
            grad_logits /= utts.size
            grad_prediction = np.einsum("ak,akz->az", grad_logits, cand_z)
            np.add.at(grad_valid_z, candidates, grad_logits[:, :, None] * prediction[:, None, :])

        loss += float(losses.mean(dtype=np.float64))
        if backward:
            model.store.accumulate(f"scorer.{slot}", grad_prediction.T @ anchors_c)
            grad_context[utts, times] += grad_prediction @ weight

    if backward:
        grad_z = np.zeros_like(z)
        grad_z[mask] = grad_valid_z
        grad_z += lstm_backward(model.context.layer, ctx_cache, grad_context)
        _encoder_backward(model.encoder, activations, grad_z)
    return loss


def cpc_objective(model: CpcModel, batch: Batch, sampler: NegativeSampler, backward: bool = True) -> float:
    """Loss of the model's own variant on one batch; gradients accumulate into model.store."""
    return _contrastive_objective(model, batch.features, batch.lengths, sampler, model.steps(), backward)


def cpc_exhaust_loss(batch: Batch, model: CpcModel, n: int, backward: bool = True) -> float:
    """
    Equal-weight sum over k = 1..n of exhaustive-negative InfoNCE losses, each
    with its own W_k. Gradients accumulate into model.store.
    """
    if model.scorer.num_steps < n:
        raise ContractError(f"Model has {model.scorer.num_steps} scorer weights; {n} steps requested")
    sampler = NegativeSampler(NegativeStrategy.EXHAUSTIVE_BATCH)
    steps = [(k, k - 1) for k in range(1, n + 1)]
    return _contrastive_objective(model, batch.features, batch.lengths, sampler, steps, backward)


def _min_batch(strategy: NegativeStrategy) -> int:
    # within-batch negatives need a second utterance in every batch
    return 2 if strategy == NegativeStrategy.WITHIN_BATCH else 1


def _batches(corpus: List[FeatureSequence], cfg: CpcTrainConfig, epoch: int):
    if cfg.variant == CpcVariant.CTX_EXHAUST:
        return make_batches(
            corpus,
            cfg.exhaust_batch_size,
            mode="chunked",
            chunk_frames=cfg.chunk_frames,
            seed=cfg.seed,
            epoch=epoch,
            pad_short=cfg.pad_short_chunks,
        )
    return make_batches(corpus, cfg.batch_size, seed=cfg.seed, epoch=epoch, min_batch=_min_batch(cfg.strategy))


def _check_corpus(corpus: List[FeatureSequence], cfg: CpcTrainConfig) -> None:
    if not corpus:
        raise EmptyInputError("Training corpus is empty")
    if cfg.strategy == NegativeStrategy.WITHIN_BATCH and len(corpus) < 2:
        raise SamplingError("Within-batch negatives need at least two utterances")
    for sequence in corpus:
        if sequence.num_frames < cfg.n_steps + 1:
            raise ShiftError(
                f"Utterance {sequence.utterance_id} has {sequence.num_frames} frames; n_steps={cfg.n_steps} needs at least {cfg.n_steps + 1}"
            )
    if cfg.variant == CpcVariant.CTX_EXHAUST and not cfg.pad_short_chunks:
        shortest = min(corpus, key=lambda s: s.num_frames)
        if shortest.num_frames < cfg.chunk_frames:
            raise ContractError(
                f"Utterance {shortest.utterance_id} has {shortest.num_frames} frames, shorter than chunk_frames={cfg.chunk_frames}; "
                "lower chunk_frames or set pad_short_chunks=true"
            )


def train_cpc(corpus: List[FeatureSequence], cfg: CpcTrainConfig, model: Optional[CpcModel] = None) -> CpcTrainingResult:
    """Mini-batch Adam training of the configured CPC variant."""
    _check_corpus(corpus, cfg)
    model = model or CpcModel.from_config(corpus[0].dim, cfg)
    sampler = NegativeSampler(cfg.strategy, cfg.negatives, seed=cfg.seed + 1)
    state = AdamState(model.store)

    first = next(iter(_batches(corpus, cfg, 0)))
    initial_loss = cpc_objective(model, first, NegativeSampler(cfg.strategy, cfg.negatives, seed=cfg.seed + 2), backward=False)
    logger.info("CPC %s initial loss %.6f", cfg.variant.value, initial_loss)

    history: List[float] = []
    for epoch in range(cfg.epochs):
        losses = []
        for batch in _batches(corpus, cfg, epoch):
            model.store.zero_grad()
            loss = cpc_objective(model, batch, sampler)
            check_finite("CPC loss", np.asarray(loss))
            adam_step(model.store, state, cfg.lr)
            losses.append(loss)
        history.append(float(np.mean(losses)))
        logger.info("CPC %s epoch %d/%d loss %.6f", cfg.variant.value, epoch + 1, cfg.epochs, history[-1])
    model.store.zero_grad()
    return CpcTrainingResult(model, history, initial_loss)


def extract_cpc(model: CpcModel, x: np.ndarray, tap: str = "context") -> np.ndarray:
    """Frame-encoder outputs (tap "frame") or context RNN outputs (tap "context")."""
    if tap not in ("frame", "context"):
        raise ContractError(f"Unknown CPC tap: {tap}")
    z = encode_frames(model.encoder, x)
    if tap == "frame":
        return z
    return context_forward(model.context, z)


def evaluate_cpc(model: CpcModel, corpus: List[FeatureSequence], batch_size: int = 32, seed: int = 0) -> float:
    """Mean variant loss over a corpus with frozen weights and a fixed sampler seed."""
    if not corpus:
        raise EmptyInputError("Evaluation corpus is empty")
    sampler = NegativeSampler(model.strategy, model.negatives, seed=seed)
    losses = [
        cpc_objective(model, batch, sampler, backward=False)
        for batch in make_batches(corpus, batch_size, shuffle=False, min_batch=_min_batch(model.strategy))
    ]
    return float(np.mean(losses))
