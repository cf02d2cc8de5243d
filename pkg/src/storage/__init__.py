"""Artifact storage: feature files, checkpoints, reports and atomic writes."""

from .atomic import atomic_write_bytes, atomic_write_text
from .corpus_store import load_corpus, read_labels, save_corpus, write_labels
from .checkpoint_store import decode_checkpoint, encode_checkpoint, load_checkpoint, load_model, save_checkpoint
from .feature_store import decode_features, encode_features, load_features, save_features
from .reports import (
    format_record,
    plot_loss_history,
    read_loss_history,
    read_report,
    read_speaker_stats,
    write_loss_history,
    write_report,
    write_scores,
    write_speaker_stats,
)

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "load_corpus",
    "read_labels",
    "save_corpus",
    "write_labels",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "load_model",
    "save_checkpoint",
    "decode_features",
    "encode_features",
    "load_features",
    "save_features",
    "format_record",
    "plot_loss_history",
    "read_loss_history",
    "read_report",
    "read_speaker_stats",
    "write_loss_history",
    "write_report",
    "write_scores",
    "write_speaker_stats",
]
