"""
Log-Mel front end: framing, Hann windowing, magnitude spectra and an HTK-scale
triangular filterbank.
"""

import numpy as np
from scipy.signal import get_window

from ..errors import EmptyInputError
from ..models.schema import FeatureSequence, MelConfig, Waveform


def hz_to_mel(freq):
    """HTK Mel scale."""
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * (10.0 ** (np.asarray(mel, dtype=np.float64) / 2595.0) - 1.0)


def mel_breakpoints(cfg: MelConfig) -> np.ndarray:
    """The n_mels + 2 filter edges/centers in Hz, equally spaced in Mel."""
    mels = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    return mel_to_hz(mels)


def mel_centers(cfg: MelConfig) -> np.ndarray:
    """Center frequency of every filter in Hz."""
    return mel_breakpoints(cfg)[1:-1]


def mel_filterbank(cfg: MelConfig) -> np.ndarray:
    """
    Triangular filters over the rfft bins, shape n_mels x (fft_size // 2 + 1).

    Each filter is scaled so its largest weight is 1; filters too narrow to
    cover any bin stay all-zero.
    """
    points = mel_breakpoints(cfg)
    bins = np.arange(cfg.fft_size // 2 + 1) * cfg.sample_rate / cfg.fft_size
    lower, center, upper = points[:-2, None], points[1:-1, None], points[2:, None]
    rising = (bins[None, :] - lower) / (center - lower)
    falling = (upper - bins[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    peaks = weights.max(axis=1, keepdims=True)
    return np.divide(weights, peaks, out=np.zeros_like(weights), where=peaks > 0)


def frame_signal(wave: Waveform, window: int = 400, hop: int = 160) -> np.ndarray:
    """
    Cut a waveform into Hann-windowed frames.

    Frame i covers samples [i*hop, i*hop + window); the frame count is
    floor((len - window) / hop) + 1.
    """
    samples = wave.samples
    if samples.shape[0] < window:
        raise EmptyInputError(f"Waveform has {samples.shape[0]} samples, shorter than the {window}-sample window")
    frames = np.lib.stride_tricks.sliding_window_view(samples, window)[::hop]
    return frames * get_window("hann", window, fftbins=True)


def log_mel(
    wave: Waveform,
    cfg: MelConfig = None,
    utterance_id: str = "utt",
    speaker_id: str = "spk",
) -> FeatureSequence:
    """Compute T x n_mels natural-log Mel energies of a 16 kHz waveform."""
    cfg = cfg or MelConfig()
    frames = frame_signal(wave, cfg.window, cfg.hop)
    magnitude = np.abs(np.fft.rfft(frames, n=cfg.fft_size, axis=1))
    energies = magnitude @ mel_filterbank(cfg).T
    features = np.log(np.maximum(energies, cfg.log_floor))
    return FeatureSequence(utterance_id=utterance_id, speaker_id=speaker_id, frames=features.astype(np.float32))
