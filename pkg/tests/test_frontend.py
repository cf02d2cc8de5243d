"""
Tests for the log-Mel front end and feature normalization.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.errors import ContractError, EmptyInputError, SpeakerLookupError
from src.frontend import (
    compute_speaker_stats,
    corpus_normalize,
    frame_signal,
    hz_to_mel,
    log_mel,
    mel_centers,
    mel_filterbank,
    mel_to_hz,
    speaker_normalize,
)
from src.models.schema import FeatureSequence, MelConfig, Waveform


def make_wave(samples):
    return Waveform(samples=np.asarray(samples, dtype=np.float64), sample_rate=16000)


def make_sequence(frames, speaker="spk000", utterance="utt"):
    return FeatureSequence(utterance_id=utterance, speaker_id=speaker, frames=np.asarray(frames, dtype=np.float64))


def test_frame_counts_at_boundaries():
    """Test the frame count formula at the documented lengths."""
    assert frame_signal(make_wave(np.zeros(400))).shape == (1, 400)
    assert frame_signal(make_wave(np.zeros(1600))).shape == (8, 400)
    with pytest.raises(EmptyInputError):
        frame_signal(make_wave(np.zeros(399)))


@settings(max_examples=200, deadline=None)
@given(length=st.integers(min_value=400, max_value=20000))
def test_frame_count_formula(length):
    """Test floor((len - window) / hop) + 1 frames for arbitrary lengths."""
    frames = frame_signal(make_wave(np.zeros(length)), window=400, hop=160)
    assert frames.shape[0] == (length - 400) // 160 + 1


def test_frames_are_hann_windowed_slices():
    """Test frame i holds samples [i*hop, i*hop + window) times a Hann window."""
    samples = np.arange(1200, dtype=np.float64)
    frames = frame_signal(make_wave(samples), window=400, hop=160)
    window = frames[1] / np.where(samples[160:560] == 0, 1, samples[160:560])
    assert window[0] == 0.0
    assert np.isclose(window[200], 1.0)


def test_waveform_requires_16khz():
    """Test other sample rates are rejected at construction."""
    with pytest.raises(ValueError):
        Waveform(samples=np.zeros(400), sample_rate=8000)


def test_mel_scale_round_trip():
    """Test the HTK Mel conversion and its inverse."""
    freqs = np.array([0.0, 700.0, 1000.0, 8000.0])
    assert np.isclose(hz_to_mel(700.0), 2595.0 * np.log10(2.0))
    assert np.allclose(mel_to_hz(hz_to_mel(freqs)), freqs)


def test_filterbank_peaks_are_one():
    """Test every non-empty filter peaks at exactly 1."""
    bank = mel_filterbank(MelConfig())
    assert bank.shape == (80, 257)
    peaks = bank.max(axis=1)
    assert np.all((peaks == 1.0) | (peaks == 0.0))
    assert np.all(bank >= 0.0)


def test_log_mel_of_silence_hits_the_floor():
    """Test an all-zero wave gives ln(1e-10) everywhere."""
    features = log_mel(make_wave(np.zeros(400)))
    assert features.frames.shape == (1, 80)
    assert np.allclose(features.frames, np.log(1e-10), atol=1e-4)


def test_log_mel_of_a_tone_peaks_near_its_frequency():
    """Test a 1 kHz tone peaks in one of the two filters bracketing 1 kHz."""
    cfg = MelConfig()
    t = np.arange(4000) / 16000.0
    features = log_mel(make_wave(0.5 * np.sin(2 * np.pi * 1000.0 * t)), cfg)
    centers = mel_centers(cfg)
    below = int(np.searchsorted(centers, 1000.0) - 1)
    peaks = features.frames.argmax(axis=1)
    assert set(peaks.tolist()) <= {below, below + 1}


def test_log_mel_is_deterministic_and_80_dimensional():
    """Test repeated calls give bitwise-identical T x 80 output."""
    rng = np.random.default_rng(3)
    wave = make_wave(rng.standard_normal(5000))
    first = log_mel(wave).frames
    second = log_mel(wave).frames
    assert first.shape == ((5000 - 400) // 160 + 1, 80)
    assert first.dtype == np.float32
    assert np.array_equal(first, second)


def test_speaker_normalize_hand_example():
    """Test frames {1, 3} of one speaker normalize to {-1, 1}."""
    normalized, stats = speaker_normalize([make_sequence([[1.0], [3.0]])])
    assert np.allclose(normalized[0].frames, [[-1.0], [1.0]])
    assert np.allclose(stats.means["spk000"], [2.0])
    assert np.allclose(stats.stds["spk000"], [1.0])


def test_speaker_normalize_statistics():
    """Test zero mean and unit std per speaker and dimension, and idempotence."""
    rng = np.random.default_rng(0)
    corpus = [
        make_sequence(rng.normal(loc=3.0 * s, scale=1.0 + s, size=(50, 4)), f"spk{s:03d}", f"u{s}_{u}")
        for s in range(3)
        for u in range(2)
    ]
    normalized, _ = speaker_normalize(corpus)
    for s in range(3):
        frames = np.concatenate([seq.frames for seq in normalized if seq.speaker_id == f"spk{s:03d}"])
        assert np.all(np.abs(frames.mean(axis=0)) < 1e-6)
        assert np.all(np.abs(frames.std(axis=0) - 1.0) < 1e-3)

    again, _ = speaker_normalize(normalized)
    for before, after in zip(normalized, again):
        assert np.allclose(before.frames, after.frames, atol=1e-6)


def test_constant_dimension_normalizes_to_zero():
    """Test a zero-variance dimension maps to 0 instead of blowing up."""
    normalized, _ = speaker_normalize([make_sequence([[5.0, 1.0], [5.0, 2.0], [5.0, 3.0]])])
    assert np.array_equal(normalized[0].frames[:, 0], [0.0, 0.0, 0.0])
    assert np.all(np.isfinite(normalized[0].frames))


def test_stats_reject_unknown_speaker():
    """Test applying frozen stats to a new speaker raises a lookup error."""
    stats = compute_speaker_stats([make_sequence([[1.0], [2.0]], "known")])
    with pytest.raises(SpeakerLookupError, match="stranger"):
        stats.apply(make_sequence([[1.0]], "stranger"))


def test_corpus_normalize_keeps_speaker_offsets():
    """Test pooled statistics: {0, 2} and {4, 6} map to (x - 3) / sqrt(5)."""
    corpus = [make_sequence([[0.0], [2.0]], "a", "a1"), make_sequence([[4.0], [6.0]], "b", "b1")]
    normalized, stats = corpus_normalize(corpus)
    assert np.allclose(stats.mean, [3.0])
    assert np.allclose(stats.std, [np.sqrt(5.0)])
    assert np.allclose(normalized[0].frames, np.array([[-3.0], [-1.0]]) / np.sqrt(5.0))
    assert normalized[0].frames.mean() < 0.0 < normalized[1].frames.mean()
    # frozen stats apply to speakers they never saw
    assert np.allclose(stats.apply(make_sequence([[3.0]], "c")).frames, [[0.0]])


def test_corpus_normalize_rejects_empty_input():
    """Test an empty corpus or a single frame cannot be normalized."""
    with pytest.raises(ContractError):
        corpus_normalize([])
    with pytest.raises(ContractError):
        corpus_normalize([make_sequence([[1.0]])])
