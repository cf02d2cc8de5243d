"""
Mini-batch construction: length-bucketed zero padding, or fixed-length random
chunks per utterance.
"""

from typing import Iterator, List, Optional

import numpy as np
from pydantic import Field

from ..errors import ConfigError, ContractError
from ..models.schema import ArrayModel, FeatureSequence


class Batch(ArrayModel):
    """A padded B x Tmax x D tensor with true lengths and metadata."""

    features: np.ndarray = Field(..., description="B x Tmax x D, zero beyond each true length")
    lengths: np.ndarray = Field(..., description="True length of every utterance")
    utterance_ids: List[str] = Field(default_factory=list)
    speaker_ids: List[str] = Field(default_factory=list)
    labels: Optional[np.ndarray] = Field(None, description="B x Tmax phone labels, -1 beyond true length")

    @property
    def size(self) -> int:
        return int(self.features.shape[0])

    def mask(self) -> np.ndarray:
        return np.arange(self.features.shape[1])[None, :] < self.lengths[:, None]


def pad_batch(sequences: List[FeatureSequence]) -> Batch:
    """Stack sequences into one zero-padded batch."""
    lengths = np.array([s.num_frames for s in sequences], dtype=np.int64)
    dim = sequences[0].dim
    features = np.zeros((len(sequences), int(lengths.max()), dim), dtype=sequences[0].frames.dtype)
    with_labels = all(s.phone_labels is not None for s in sequences)
    labels = np.full(features.shape[:2], -1, dtype=np.int64) if with_labels else None
    for row, sequence in enumerate(sequences):
        features[row, : sequence.num_frames] = sequence.frames
        if labels is not None:
            labels[row, : sequence.num_frames] = sequence.phone_labels
    return Batch(
        features=features,
        lengths=lengths,
        utterance_ids=[s.utterance_id for s in sequences],
        speaker_ids=[s.speaker_id for s in sequences],
        labels=labels,
    )


def chunk_sequence(
    sequence: FeatureSequence, length: int, rng: np.random.Generator, pad_short: bool = False
) -> FeatureSequence:
    """Uniformly placed window of exactly length frames (zero-padded only if allowed)."""
    if sequence.num_frames < length:
        if not pad_short:
            raise ContractError(
                f"Utterance {sequence.utterance_id} has {sequence.num_frames} frames, shorter than chunk length {length}"
            )
        return sequence
    start = int(rng.integers(0, sequence.num_frames - length + 1))
    labels = None if sequence.phone_labels is None else sequence.phone_labels[start : start + length]
    return FeatureSequence(
        utterance_id=sequence.utterance_id,
        speaker_id=sequence.speaker_id,
        frames=sequence.frames[start : start + length],
        phone_labels=labels,
        gender=sequence.gender,
    )


def make_batches(
    corpus: List[FeatureSequence],
    batch_size: int,
    mode: str = "padded",
    chunk_frames: Optional[int] = None,
    seed: int = 0,
    epoch: int = 0,
    shuffle: bool = True,
    pad_short: bool = False,
    min_batch: int = 1,
) -> Iterator[Batch]:
    """
    Yield every utterance exactly once per epoch.

    padded: shuffle, bucket by length, zero-pad, shuffle batch order.
    chunked: shuffle, then a uniform chunk_frames window per utterance.
    A trailing batch smaller than min_batch is folded into the one before it.
    The order is a function of (seed, epoch) only.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if mode not in ("padded", "chunked"):
        raise ConfigError(f"Unknown batching mode: {mode}")
    if mode == "chunked" and not chunk_frames:
        raise ConfigError("chunked batching needs chunk_frames")

    rng = np.random.default_rng([seed, epoch])
    order = rng.permutation(len(corpus)) if shuffle else np.arange(len(corpus))

    if mode == "chunked":
        chunks = [chunk_sequence(corpus[i], chunk_frames, rng, pad_short) for i in order]
        for group in _fold_tail(_split(chunks, batch_size), min_batch):
            yield pad_batch(group)
        return

    if shuffle:
        lengths = np.array([corpus[i].num_frames for i in order])
        order = order[np.argsort(lengths, kind="stable")]
    groups = _fold_tail(_split(list(order), batch_size), min_batch)
    group_order = rng.permutation(len(groups)) if shuffle else range(len(groups))
    for g in group_order:
        yield pad_batch([corpus[i] for i in groups[g]])


def _split(items: list, batch_size: int) -> List[list]:
    return [items[start : start + batch_size] for start in range(0, len(items), batch_size)]


def _fold_tail(groups: List[list], min_batch: int) -> List[list]:
    if len(groups) > 1 and len(groups[-1]) < min_batch:
        groups = groups[:-2] + [groups[-2] + groups[-1]]
    return groups
