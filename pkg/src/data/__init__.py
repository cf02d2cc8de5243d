"""Corpus generation, batching and splits."""

from .batching import Batch, chunk_sequence, make_batches, pad_batch
from .synthetic import SyntheticCorpus, gen_synthetic_corpus, oracle_phone_accuracy
from .splits import split_speakers, split_utterances

__all__ = [
    "Batch",
    "chunk_sequence",
    "make_batches",
    "pad_batch",
    "SyntheticCorpus",
    "gen_synthetic_corpus",
    "oracle_phone_accuracy",
    "split_speakers",
    "split_utterances",
]
