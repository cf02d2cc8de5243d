"""Acoustic front end: log-Mel features and speaker normalization."""

from .mel import frame_signal, hz_to_mel, log_mel, mel_breakpoints, mel_centers, mel_filterbank, mel_to_hz
from .normalize import CorpusStats, SpeakerStats, compute_speaker_stats, corpus_normalize, speaker_normalize

__all__ = [
    "frame_signal",
    "hz_to_mel",
    "log_mel",
    "mel_breakpoints",
    "mel_centers",
    "mel_filterbank",
    "mel_to_hz",
    "CorpusStats",
    "SpeakerStats",
    "compute_speaker_stats",
    "corpus_normalize",
    "speaker_normalize",
]
