"""Phone and speaker probes on frozen representations."""

from .classifier import (
    FrameClassifier,
    PhoneProbeResult,
    evaluate_phone_probe,
    frame_error_rate,
    probe_objective,
    stack_frames,
    train_probe,
)
from .speaker import (
    LdaModel,
    SpeakerVerificationResult,
    build_trials,
    compute_eer,
    cosine_score,
    evaluate_speaker_verification,
    fit_lda,
    score_trials,
    utterance_embed,
)

__all__ = [
    "FrameClassifier",
    "PhoneProbeResult",
    "evaluate_phone_probe",
    "frame_error_rate",
    "probe_objective",
    "stack_frames",
    "train_probe",
    "LdaModel",
    "SpeakerVerificationResult",
    "build_trials",
    "compute_eer",
    "cosine_score",
    "evaluate_speaker_verification",
    "fit_lda",
    "score_trials",
    "utterance_embed",
]
