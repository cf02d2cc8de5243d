"""
Per-speaker and corpus-wide mean and variance normalization.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np

from ..errors import ContractError, SpeakerLookupError
from ..models.schema import FeatureSequence

logger = logging.getLogger(__name__)

STD_FLOOR = 1e-8


class SpeakerStats:
    """Frozen per-speaker, per-dimension mean and population std."""

    def __init__(self, means: Dict[str, np.ndarray], stds: Dict[str, np.ndarray]):
        self.means = means
        self.stds = stds

    def speakers(self) -> List[str]:
        return sorted(self.means)

    def apply(self, sequence: FeatureSequence) -> FeatureSequence:
        """Normalize one utterance with the stats of its speaker."""
        if sequence.speaker_id not in self.means:
            raise SpeakerLookupError(f"No normalization statistics for speaker {sequence.speaker_id}")
        mean = self.means[sequence.speaker_id]
        std = np.maximum(self.stds[sequence.speaker_id], STD_FLOOR)
        frames = (sequence.frames.astype(np.float64) - mean) / std
        return sequence.with_frames(frames.astype(sequence.frames.dtype))

    def apply_all(self, corpus: List[FeatureSequence]) -> List[FeatureSequence]:
        return [self.apply(sequence) for sequence in corpus]


def compute_speaker_stats(corpus: List[FeatureSequence]) -> SpeakerStats:
    """Two-pass mean/std accumulation per speaker in corpus order."""
    by_speaker: Dict[str, List[np.ndarray]] = {}
    for sequence in corpus:
        by_speaker.setdefault(sequence.speaker_id, []).append(sequence.frames)

    means: Dict[str, np.ndarray] = {}
    stds: Dict[str, np.ndarray] = {}
    for speaker, blocks in by_speaker.items():
        frames = np.concatenate(blocks, axis=0).astype(np.float64)
        if frames.shape[0] < 2:
            raise ContractError(f"Speaker {speaker} contributes {frames.shape[0]} frame(s); at least 2 are required")
        mean = frames.mean(axis=0)
        means[speaker] = mean
        stds[speaker] = np.sqrt(((frames - mean) ** 2).mean(axis=0))
    logger.debug("Computed normalization statistics for %d speakers", len(means))
    return SpeakerStats(means, stds)


def speaker_normalize(corpus: List[FeatureSequence]) -> Tuple[List[FeatureSequence], SpeakerStats]:
    """Z-score every frame with its speaker's statistics; returns the stats for reuse."""
    stats = compute_speaker_stats(corpus)
    return stats.apply_all(corpus), stats


class CorpusStats:
    """One frozen mean and population std shared by every speaker."""

    def __init__(self, mean: np.ndarray, std: np.ndarray):
        self.mean = mean
        self.std = std

    def apply(self, sequence: FeatureSequence) -> FeatureSequence:
        frames = (sequence.frames.astype(np.float64) - self.mean) / np.maximum(self.std, STD_FLOOR)
        return sequence.with_frames(frames.astype(sequence.frames.dtype))

    def apply_all(self, corpus: List[FeatureSequence]) -> List[FeatureSequence]:
        return [self.apply(sequence) for sequence in corpus]


def corpus_normalize(corpus: List[FeatureSequence]) -> Tuple[List[FeatureSequence], CorpusStats]:
    """
    Z-score with statistics pooled over the whole corpus.

    Unlike per-speaker statistics this keeps speaker offsets.
    """
    if not corpus:
        raise ContractError("Cannot normalize an empty corpus")
    frames = np.concatenate([s.frames for s in corpus], axis=0).astype(np.float64)
    if frames.shape[0] < 2:
        raise ContractError(f"Corpus contributes {frames.shape[0]} frame(s); at least 2 are required")
    mean = frames.mean(axis=0)
    stats = CorpusStats(mean, np.sqrt(((frames - mean) ** 2).mean(axis=0)))
    return stats.apply_all(corpus), stats
