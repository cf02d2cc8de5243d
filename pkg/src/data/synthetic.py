"""
Synthetic speech-like corpus with known phone and speaker structure.

Each phone has a template vector and each speaker an additive offset. An
utterance is a Markov chain of phone segments with geometric dwell times, and
every frame relaxes towards template + offset:

    x_t = alpha * x_{t-1} + (1 - alpha) * (template + offset) + noise
"""

import logging
from typing import Dict, List

import numpy as np

from ..models.schema import FeatureSequence, Gender, SynthConfig

logger = logging.getLogger(__name__)


class SyntheticCorpus:
    """Generated utterances together with the generating parameters."""

    def __init__(
        self,
        utterances: List[FeatureSequence],
        templates: np.ndarray,
        offsets: Dict[str, np.ndarray],
        genders: Dict[str, Gender],
        config: SynthConfig,
    ):
        self.utterances = utterances
        self.templates = templates
        self.offsets = offsets
        self.genders = genders
        self.config = config
        self.oracle_accuracy = oracle_phone_accuracy(self)

    def __len__(self) -> int:
        return len(self.utterances)

    def speakers(self) -> List[str]:
        return list(self.offsets)


def _phone_sequence(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    labels = np.empty(cfg.frames_per_utterance, dtype=np.int64)
    phone = int(rng.integers(cfg.n_phones))
    position = 0
    while position < cfg.frames_per_utterance:
        dwell = int(rng.geometric(1.0 / cfg.phone_dwell))
        labels[position : position + dwell] = phone
        position += dwell
        if cfg.n_phones > 1:
            step = int(rng.integers(1, cfg.n_phones))
            phone = (phone + step) % cfg.n_phones
    return labels


def gen_synthetic_corpus(cfg: SynthConfig) -> SyntheticCorpus:
    """Generate the corpus deterministically from cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    templates = rng.standard_normal((cfg.n_phones, cfg.feature_dim))
    offsets: Dict[str, np.ndarray] = {}
    genders: Dict[str, Gender] = {}
    for index in range(cfg.n_speakers):
        speaker = f"spk{index:03d}"
        offsets[speaker] = cfg.speaker_offset_scale * rng.standard_normal(cfg.feature_dim)
        genders[speaker] = Gender.FEMALE if index % 2 == 0 else Gender.MALE

    utterances: List[FeatureSequence] = []
    for speaker, offset in offsets.items():
        for u in range(cfg.utterances_per_speaker):
            labels = _phone_sequence(cfg, rng)
            targets = templates[labels] + offset
            noise = cfg.noise_sigma * rng.standard_normal(targets.shape)
            frames = np.empty_like(targets)
            previous = targets[0]
            for t in range(cfg.frames_per_utterance):
                previous = cfg.alpha * previous + (1.0 - cfg.alpha) * targets[t] + noise[t]
                frames[t] = previous
            utterances.append(
                FeatureSequence(
                    utterance_id=f"{speaker}_utt{u:03d}",
                    speaker_id=speaker,
                    frames=frames.astype(np.float32),
                    phone_labels=labels,
                    gender=genders[speaker],
                )
            )
    corpus = SyntheticCorpus(utterances, templates, offsets, genders, cfg)
    logger.info(
        "Generated %d utterances from %d speakers (oracle phone accuracy %.3f)",
        len(utterances),
        cfg.n_speakers,
        corpus.oracle_accuracy,
    )
    return corpus


def oracle_phone_accuracy(corpus: SyntheticCorpus) -> float:
    """
    Frame accuracy of a nearest-template classifier that knows alpha and the
    true speaker offsets: it undoes the smoothing, subtracts the offset and
    picks the closest template.
    """
    alpha = corpus.config.alpha
    correct, total = 0, 0
    for sequence in corpus.utterances:
        frames = sequence.frames.astype(np.float64)
        previous = np.vstack([frames[:1], frames[:-1]])
        unsmoothed = (frames - alpha * previous) / (1.0 - alpha) - corpus.offsets[sequence.speaker_id]
        distances = ((unsmoothed[:, None, :] - corpus.templates[None]) ** 2).sum(axis=-1)
        correct += int((distances.argmin(axis=1) == sequence.phone_labels).sum())
        total += sequence.num_frames
    return correct / total
