"""
Data models for the speech representation pipeline.
Defines utterance containers, run configurations and evaluation records.
"""

from enum import Enum
from typing import List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class Gender(str, Enum):
    """Speaker gender as recorded in manifests."""

    FEMALE = "F"
    MALE = "M"


class CpcVariant(str, Enum):
    """Training variants of the contrastive model."""

    N9ALL = "n9all"
    N9SAME = "n9same"
    CTX_N9SAME = "ctx_n9same"
    CTX_EXHAUST = "ctx_exhaust"


class NegativeStrategy(str, Enum):
    """Proposal distributions for drawing negative frames."""

    WITHIN_BATCH = "within_batch"
    WITHIN_UTTERANCE = "within_utterance"
    EXHAUSTIVE_BATCH = "exhaustive_batch"


class ProbeKind(str, Enum):
    """Frame classifiers used as probes."""

    LINEAR = "linear"
    MLP1 = "mlp1"
    MLP3 = "mlp3"


Precision = Literal["float32", "float64"]


class ArrayModel(BaseModel):
    """Base for models that carry numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True)


class Waveform(ArrayModel):
    """A mono waveform with its sample rate."""

    samples: np.ndarray = Field(..., description="Amplitude samples")
    sample_rate: int = Field(default=16000, description="Sampling rate in Hz")

    @field_validator("samples", mode="before")
    @classmethod
    def _finite_1d(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=np.float64)
        if value.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {value.shape}")
        if not np.all(np.isfinite(value)):
            raise ValueError("samples must be finite")
        return value

    @field_validator("sample_rate")
    @classmethod
    def _sixteen_khz(cls, value: int) -> int:
        if value != 16000:
            raise ValueError(f"Only 16000 Hz waveforms are supported, got {value}")
        return value


class FeatureSequence(ArrayModel):
    """One utterance as a T x D feature matrix plus speaker and phone metadata."""

    utterance_id: str = Field(..., description="Unique utterance identifier")
    speaker_id: str = Field(..., description="Speaker identifier")
    frames: np.ndarray = Field(..., description="T x D feature matrix")
    phone_labels: Optional[np.ndarray] = Field(None, description="Per-frame phone indices")
    gender: Optional[Gender] = Field(None, description="Speaker gender when known")

    @field_validator("frames", mode="before")
    @classmethod
    def _two_dimensional(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value)
        if value.ndim != 2:
            raise ValueError(f"frames must be T x D, got shape {value.shape}")
        return value

    @model_validator(mode="after")
    def _labels_match_frames(self) -> "FeatureSequence":
        if self.phone_labels is not None:
            labels = np.asarray(self.phone_labels, dtype=np.int64)
            if labels.shape != (self.frames.shape[0],):
                raise ValueError(
                    f"{self.utterance_id}: {labels.shape[0] if labels.ndim else 0} labels for "
                    f"{self.frames.shape[0]} frames"
                )
            self.phone_labels = labels
        return self

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])

    @property
    def dim(self) -> int:
        return int(self.frames.shape[1])

    def with_frames(self, frames: np.ndarray) -> "FeatureSequence":
        """Copy of this sequence carrying different frames of the same length."""
        return FeatureSequence(
            utterance_id=self.utterance_id,
            speaker_id=self.speaker_id,
            frames=frames,
            phone_labels=self.phone_labels,
            gender=self.gender,
        )


class StrictModel(BaseModel):
    """Configuration base: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")


class MelConfig(StrictModel):
    """Short-time Fourier and Mel filterbank settings."""

    window: int = Field(default=400, ge=1, description="Window length in samples")
    hop: int = Field(default=160, ge=1, description="Hop length in samples")
    fft_size: int = Field(default=512, ge=1, description="FFT size in bins")
    n_mels: int = Field(default=80, ge=1, description="Number of Mel filters")
    fmin: float = Field(default=0.0, ge=0.0, description="Lowest filter edge in Hz")
    fmax: float = Field(default=8000.0, description="Highest filter edge in Hz")
    log_floor: float = Field(default=1e-10, gt=0.0, description="Energy floor before the log")
    sample_rate: int = Field(default=16000, description="Expected sample rate")

    @model_validator(mode="after")
    def _consistent(self) -> "MelConfig":
        if self.window > self.fft_size:
            raise ValueError(f"window {self.window} exceeds fft_size {self.fft_size}")
        if not self.fmin < self.fmax <= self.sample_rate / 2:
            raise ValueError(f"need 0 <= fmin < fmax <= {self.sample_rate / 2}, got {self.fmin}, {self.fmax}")
        return self


class SynthConfig(StrictModel):
    """Generator settings for the synthetic phone/speaker corpus."""

    n_speakers: int = Field(default=20, ge=1)
    n_phones: int = Field(default=10, ge=1)
    utterances_per_speaker: int = Field(default=20, ge=1)
    frames_per_utterance: int = Field(default=100, ge=1)
    feature_dim: int = Field(default=80, ge=1)
    phone_dwell: float = Field(default=8.0, ge=1.0, description="Mean frames per phone segment")
    speaker_offset_scale: float = Field(default=1.0, ge=0.0)
    noise_sigma: float = Field(default=0.3, ge=0.0)
    alpha: float = Field(default=0.7, ge=0.0, lt=1.0, description="Temporal smoothing coefficient")
    seed: int = Field(default=0)


class ApcTrainConfig(StrictModel):
    """Architecture and optimization settings for APC."""

    n_steps: int = Field(default=3, ge=1, description="Frames ahead to predict")
    num_layers: int = Field(default=3, ge=1, le=4)
    hidden_size: int = Field(default=512, ge=1)
    residual: bool = Field(default=True)
    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=32, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = Field(default=0)
    precision: Precision = Field(default="float32")


class CpcTrainConfig(StrictModel):
    """Architecture and optimization settings for CPC variants."""

    n_steps: int = Field(default=2, ge=1)
    variant: CpcVariant = Field(default=CpcVariant.N9SAME)
    negatives: int = Field(default=9, ge=1, description="Negatives per anchor for sampled variants")
    hidden_size: int = Field(default=512, ge=1, description="Context RNN width")
    encoder_width: int = Field(default=512, ge=1, description="Frame encoder width")
    epochs: int = Field(default=100, ge=1)
    batch_size: int = Field(default=32, ge=1)
    exhaust_batch_size: int = Field(default=8, ge=1)
    chunk_frames: int = Field(default=128, ge=2)
    pad_short_chunks: bool = Field(default=False)
    lr: float = Field(default=1e-3, gt=0.0)
    seed: int = Field(default=0)
    precision: Precision = Field(default="float32")

    @property
    def strategy(self) -> NegativeStrategy:
        return {
            CpcVariant.N9ALL: NegativeStrategy.WITHIN_BATCH,
            CpcVariant.N9SAME: NegativeStrategy.WITHIN_UTTERANCE,
            CpcVariant.CTX_N9SAME: NegativeStrategy.WITHIN_UTTERANCE,
            CpcVariant.CTX_EXHAUST: NegativeStrategy.EXHAUSTIVE_BATCH,
        }[self.variant]

    @property
    def tap(self) -> str:
        return "frame" if self.variant in (CpcVariant.N9ALL, CpcVariant.N9SAME) else "context"


class ProbeConfig(StrictModel):
    """Probe classifier training settings."""

    kind: ProbeKind = Field(default=ProbeKind.LINEAR)
    hidden_width: int = Field(default=512, ge=1)
    epochs: int = Field(default=50, ge=1)
    batch_size: int = Field(default=256, ge=1)
    lr: float = Field(default=1e-3, gt=0.0)
    patience: int = Field(default=5, ge=1, description="Epochs without dev improvement before stopping")
    dev_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.1, ge=0.0, lt=1.0)
    seed: int = Field(default=0)
    precision: Precision = Field(default="float32")


class SpeakerEvalConfig(StrictModel):
    """LDA/cosine speaker verification settings."""

    lda_dim: int = Field(default=24, ge=1)
    lda_speaker_fraction: float = Field(default=0.5, gt=0.0, lt=1.0)
    max_nontarget_per_speaker: int = Field(default=50, ge=1)
    seed: int = Field(default=0)


class SweepConfig(StrictModel):
    """Grid of extractor variants, prediction steps and layers to evaluate."""

    variants: List[str] = Field(default_factory=lambda: ["apc"])
    n_steps: List[int] = Field(default_factory=lambda: [1, 2, 3, 5])
    layers: List[int] = Field(default_factory=lambda: [1, 2, 3])
    include_surface: bool = Field(default=False, description="Also report raw-feature probes")
    apc: ApcTrainConfig = Field(default_factory=ApcTrainConfig)
    cpc: CpcTrainConfig = Field(default_factory=CpcTrainConfig)
    probe: ProbeConfig = Field(default_factory=ProbeConfig)
    speaker: SpeakerEvalConfig = Field(default_factory=SpeakerEvalConfig)

    @field_validator("variants")
    @classmethod
    def _known_variants(cls, value: List[str]) -> List[str]:
        allowed = {"apc"} | {f"cpc_{v.value}" for v in CpcVariant}
        unknown = [v for v in value if v not in allowed]
        if unknown:
            raise ValueError(f"unknown variants {unknown}; choose from {sorted(allowed)}")
        return value


class ManifestRecord(StrictModel):
    """One line of a corpus manifest."""

    utterance_id: str
    feature_path: str
    speaker_id: str
    gender: Gender
    label_path: Optional[str] = None


class Trial(BaseModel):
    """A verification trial between two utterances."""

    utterance_a: str
    utterance_b: str
    same_speaker: bool
    gender_pair: Literal["FF", "MM"]


class TrialList(BaseModel):
    """Ordered collection of verification trials."""

    trials: List[Trial] = Field(default_factory=list)

    def targets(self) -> List[Trial]:
        return [t for t in self.trials if t.same_speaker]

    def nontargets(self) -> List[Trial]:
        return [t for t in self.trials if not t.same_speaker]

    def utterances(self) -> List[str]:
        seen = {}
        for trial in self.trials:
            seen.setdefault(trial.utterance_a, None)
            seen.setdefault(trial.utterance_b, None)
        return list(seen)


class EerResult(BaseModel):
    """Equal error rate at the best threshold of a score sweep."""

    eer: float = Field(..., ge=0.0, le=1.0)
    threshold: float
    far: float
    frr: float
    n_target: int
    n_nontarget: int


class RunRecord(BaseModel):
    """Provenance written next to every command's outputs."""

    command: str
    config: dict = Field(default_factory=dict)
    config_hash: str
    seed: Optional[int] = None
    versions: dict = Field(default_factory=dict)


ConfigModel = Union[
    MelConfig, SynthConfig, ApcTrainConfig, CpcTrainConfig, ProbeConfig, SpeakerEvalConfig, SweepConfig
]
