"""Data models for the speech representation pipeline."""

from .schema import (
    ApcTrainConfig,
    CpcTrainConfig,
    CpcVariant,
    EerResult,
    FeatureSequence,
    Gender,
    ManifestRecord,
    MelConfig,
    NegativeStrategy,
    ProbeConfig,
    ProbeKind,
    RunRecord,
    SpeakerEvalConfig,
    SweepConfig,
    SynthConfig,
    Trial,
    TrialList,
    Waveform,
)

__all__ = [
    "ApcTrainConfig",
    "CpcTrainConfig",
    "CpcVariant",
    "EerResult",
    "FeatureSequence",
    "Gender",
    "ManifestRecord",
    "MelConfig",
    "NegativeStrategy",
    "ProbeConfig",
    "ProbeKind",
    "RunRecord",
    "SpeakerEvalConfig",
    "SweepConfig",
    "SynthConfig",
    "Trial",
    "TrialList",
    "Waveform",
]
