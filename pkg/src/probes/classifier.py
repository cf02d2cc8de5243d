"""
Frame-level phone probes trained on frozen representations.

A probe is a small softmax classifier (linear, or an MLP with one or three
512-unit ReLU layers) fitted with Adam and early stopping on a dev split.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ..data.splits import split_utterances
from ..errors import ContractError, DimensionError, EmptyInputError, NumericalError
from ..models.schema import FeatureSequence, ProbeConfig, ProbeKind
from ..numerics import AdamState, ParamStore, activation, activation_derivative, adam_step, he_uniform, uniform_init

logger = logging.getLogger(__name__)

HIDDEN_LAYERS = {ProbeKind.LINEAR: 0, ProbeKind.MLP1: 1, ProbeKind.MLP3: 3}


class FrameClassifier:
    """Stack of affine layers; ReLU between them, softmax on top."""

    def __init__(self, store: ParamStore, kind: ProbeKind, input_dim: int, num_classes: int):
        self.store = store
        self.kind = ProbeKind(kind)
        self.input_dim = input_dim
        self.num_classes = num_classes

    @classmethod
    def create(
        cls,
        kind: ProbeKind,
        input_dim: int,
        num_classes: int,
        hidden_width: int = 512,
        seed: int = 0,
        precision: str = "float32",
    ) -> "FrameClassifier":
        rng = np.random.default_rng(seed)
        store = ParamStore(precision)
        fan_in = input_dim
        depth = HIDDEN_LAYERS[ProbeKind(kind)]
        for index in range(depth):
            store.add(f"probe.{index}.weight", he_uniform(rng, hidden_width, fan_in))
            store.add(f"probe.{index}.bias", np.zeros(hidden_width))
            fan_in = hidden_width
        bound = 1.0 / np.sqrt(fan_in)
        store.add(f"probe.{depth}.weight", uniform_init(rng, (num_classes, fan_in), bound))
        store.add(f"probe.{depth}.bias", np.zeros(num_classes))
        return cls(store, kind, input_dim, num_classes)

    @property
    def depth(self) -> int:
        return HIDDEN_LAYERS[self.kind]

    def logits(self, features: np.ndarray) -> np.ndarray:
        return _forward(self, features)[-1]

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Argmax class per frame; np.argmax keeps the lowest index on ties."""
        return np.argmax(self.logits(features), axis=1)


def _forward(probe: FrameClassifier, features: np.ndarray) -> List[np.ndarray]:
    if features.ndim != 2 or features.shape[1] != probe.input_dim:
        raise DimensionError(f"Probe expects N x {probe.input_dim} features, got shape {features.shape}")
    outputs = [features.astype(probe.store.dtype, copy=False)]
    for index in range(probe.depth + 1):
        pre = outputs[-1] @ probe.store[f"probe.{index}.weight"].T + probe.store[f"probe.{index}.bias"]
        outputs.append(pre if index == probe.depth else activation("relu", pre))
    return outputs


def probe_objective(probe: FrameClassifier, features: np.ndarray, labels: np.ndarray) -> float:
    """Mean cross-entropy on a minibatch; gradients accumulate into probe.store."""
    outputs = _forward(probe, features)
    logits = outputs[-1]
    rows = np.arange(logits.shape[0])
    lse = logsumexp(logits, axis=1)
    loss = float(np.mean(lse - logits[rows, labels], dtype=np.float64))

    grad = np.exp(logits - lse[:, None])
    grad[rows, labels] -= 1.0
    grad /= logits.shape[0]
    for index in reversed(range(probe.depth + 1)):
        if index < probe.depth:
            grad = grad * activation_derivative("relu", outputs[index + 1])
        probe.store.accumulate(f"probe.{index}.weight", grad.T @ outputs[index])
        probe.store.accumulate(f"probe.{index}.bias", grad.sum(axis=0))
        if index > 0:
            grad = grad @ probe.store[f"probe.{index}.weight"]
    return loss


def _check_frames(features: np.ndarray, labels: np.ndarray, num_classes: Optional[int] = None) -> None:
    if features.shape[0] == 0:
        raise EmptyInputError("No frames to train or evaluate on")
    if labels.shape != (features.shape[0],):
        raise DimensionError(f"{labels.shape[0]} labels for {features.shape[0]} frames")
    if not np.all(np.isfinite(features)):
        raise NumericalError("Probe features contain non-finite values")
    if labels.min() < 0 or (num_classes is not None and labels.max() >= num_classes):
        raise ContractError(f"Labels must lie in [0, {num_classes}), got range [{labels.min()}, {labels.max()}]")


def train_probe(
    features: np.ndarray,
    labels: np.ndarray,
    cfg: Optional[ProbeConfig] = None,
    dev_features: Optional[np.ndarray] = None,
    dev_labels: Optional[np.ndarray] = None,
    num_classes: Optional[int] = None,
) -> FrameClassifier:
    """
    Fit a probe of cfg.kind with Adam on minibatches.

    With a dev set, training stops after cfg.patience epochs without a dev
    accuracy improvement and the best parameters are kept.
    """
    cfg = cfg or ProbeConfig()
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.int64)
    if features.shape[0] == 0:
        raise EmptyInputError("No frames to train on")
    num_classes = num_classes or int(labels.max()) + 1
    _check_frames(features, labels, num_classes)
    use_dev = dev_features is not None and dev_labels is not None and len(dev_labels) > 0
    if use_dev:
        dev_labels = np.asarray(dev_labels, dtype=np.int64)
        _check_frames(dev_features, dev_labels, num_classes)

    probe = FrameClassifier.create(cfg.kind, features.shape[1], num_classes, cfg.hidden_width, cfg.seed, cfg.precision)
    state = AdamState(probe.store)
    rng = np.random.default_rng(cfg.seed)
    best_accuracy, best_params, stale = -1.0, None, 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(features.shape[0])
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            rows = order[start : start + cfg.batch_size]
            probe.store.zero_grad()
            losses.append(probe_objective(probe, features[rows], labels[rows]))
            adam_step(probe.store, state, cfg.lr)
        if not use_dev:
            logger.debug("Probe epoch %d loss %.4f", epoch + 1, np.mean(losses))
            continue
        accuracy = 1.0 - frame_error_rate(probe, dev_features, dev_labels)
        logger.debug("Probe epoch %d loss %.4f dev accuracy %.4f", epoch + 1, np.mean(losses), accuracy)
        if accuracy > best_accuracy:
            best_accuracy, best_params, stale = accuracy, probe.store.copy(), 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.info("Probe early stop after epoch %d (best dev accuracy %.4f)", epoch + 1, best_accuracy)
                break
    if best_params is not None:
        probe.store.load(best_params.params)
    probe.store.zero_grad()
    return probe


def frame_error_rate(probe: FrameClassifier, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of frames whose argmax prediction differs from the label."""
    features = np.asarray(features)
    labels = np.asarray(labels, dtype=np.int64)
    _check_frames(features, labels)
    return float(np.mean(probe.predict(features) != labels))


def stack_frames(corpus: List[FeatureSequence]) -> Tuple[np.ndarray, np.ndarray]:
    """Concatenate every utterance's frames and phone labels."""
    if not corpus:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
    missing = [s.utterance_id for s in corpus if s.phone_labels is None]
    if missing:
        raise ContractError(f"Utterances without phone labels: {', '.join(missing[:5])}")
    return (
        np.concatenate([s.frames for s in corpus], axis=0),
        np.concatenate([s.phone_labels for s in corpus]),
    )


class PhoneProbeResult:
    """Frame error rates of a probe fitted on a train/dev/test utterance split."""

    def __init__(self, probe: FrameClassifier, test_error: float, train_error: float, num_test_frames: int):
        self.probe = probe
        self.test_error = test_error
        self.train_error = train_error
        self.num_test_frames = num_test_frames

    @property
    def test_accuracy(self) -> float:
        return 1.0 - self.test_error


def evaluate_phone_probe(corpus: List[FeatureSequence], cfg: Optional[ProbeConfig] = None) -> PhoneProbeResult:
    """Split utterances, fit the probe on train (early stop on dev), report error on test."""
    cfg = cfg or ProbeConfig()
    train, dev, test = split_utterances(corpus, cfg.dev_fraction, cfg.test_fraction, cfg.seed)
    if not test:
        raise ContractError(
            f"test_fraction={cfg.test_fraction} leaves no test utterances out of {len(corpus)}; the error rate would be measured on training data"
        )
    x_train, y_train = stack_frames(train)
    x_dev, y_dev = stack_frames(dev)
    x_test, y_test = stack_frames(test)
    num_classes = int(max(y_train.max(), y_test.max(), y_dev.max() if y_dev.size else 0)) + 1
    probe = train_probe(x_train, y_train, cfg, x_dev if dev else None, y_dev if dev else None, num_classes)
    result = PhoneProbeResult(
        probe,
        frame_error_rate(probe, x_test, y_test),
        frame_error_rate(probe, x_train, y_train),
        int(x_test.shape[0]),
    )
    logger.info("%s probe: train error %.4f, test error %.4f", cfg.kind.value, result.train_error, result.test_error)
    return result
