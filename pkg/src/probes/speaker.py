"""
Speaker verification on mean-pooled representations: LDA projection, cosine
scoring and the equal error rate over same-gender trials.
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from ..data.splits import split_speakers
from ..errors import ContractError, EmptyInputError, NumericalError
from ..models.schema import EerResult, FeatureSequence, SpeakerEvalConfig, Trial, TrialList

logger = logging.getLogger(__name__)

WITHIN_SCATTER_RIDGE = 1e-6


def utterance_embed(features: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the frames."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] == 0:
        raise EmptyInputError("Cannot embed an empty sequence")
    return features.mean(axis=0)


class LdaModel:
    """Global mean, F x p projection and the speaker vocabulary it was fitted on."""

    def __init__(self, mean: np.ndarray, projection: np.ndarray, classes: List[str], eigenvalues: np.ndarray):
        self.mean = mean
        self.projection = projection
        self.classes = classes
        self.eigenvalues = eigenvalues

    @property
    def out_dim(self) -> int:
        return int(self.projection.shape[1])

    def transform(self, embeddings: np.ndarray) -> np.ndarray:
        return (np.asarray(embeddings, dtype=np.float64) - self.mean) @ self.projection


def fit_lda(embeddings: np.ndarray, labels: Sequence[str], out_dim: int) -> LdaModel:
    """
    Fisher LDA via the generalized symmetric eigenproblem Sb v = lambda Sw v.

    Sw gets a ridge of 1e-6 * trace(Sw) / F on its diagonal. scipy returns
    eigenvectors normalized so that V^T Sw V = I.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels)
    if x.ndim != 2 or x.shape[0] != labels.shape[0]:
        raise ContractError(f"{labels.shape[0]} labels for embeddings of shape {x.shape}")
    classes = sorted(set(labels.tolist()))
    if len(classes) < 2:
        raise ContractError("LDA needs at least two speakers")
    if out_dim < 1 or out_dim > len(classes) - 1 or out_dim > x.shape[1]:
        raise ContractError(f"LDA output dim {out_dim} must lie in [1, min({x.shape[1]}, {len(classes) - 1})]")

    dim = x.shape[1]
    mean = x.mean(axis=0)
    within = np.zeros((dim, dim))
    between = np.zeros((dim, dim))
    for cls in classes:
        members = x[labels == cls]
        if members.shape[0] < 2:
            raise ContractError(f"Speaker {cls} has {members.shape[0]} embedding(s); LDA needs at least 2")
        centered = members - members.mean(axis=0)
        within += centered.T @ centered
        offset = members.mean(axis=0) - mean
        between += members.shape[0] * np.outer(offset, offset)
    within += WITHIN_SCATTER_RIDGE * np.trace(within) / dim * np.eye(dim)

    try:
        values, vectors = scipy.linalg.eigh(between, within)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Within-class scatter is singular: {exc}") from exc
    order = np.argsort(values)[::-1][:out_dim]
    return LdaModel(mean, vectors[:, order], classes, values[order])


def cosine_score(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0.0 (with a warning) when either vector is zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm = np.linalg.norm(a) * np.linalg.norm(b)
    if norm == 0.0:
        logger.warning("Zero-norm embedding in cosine scoring; scoring 0")
        return 0.0
    return float(np.clip(a @ b / norm, -1.0, 1.0))


def compute_eer(target_scores: Sequence[float], nontarget_scores: Sequence[float]) -> EerResult:
    """
    Sweep every distinct score as a threshold.

    FAR counts nontargets scoring >= threshold, FRR targets scoring below it.
    The reported point minimizes |FAR - FRR|, then (FAR + FRR) / 2, and the
    EER is that midpoint.
    """
    targets = np.sort(np.asarray(target_scores, dtype=np.float64))
    nontargets = np.sort(np.asarray(nontarget_scores, dtype=np.float64))
    if targets.size == 0 or nontargets.size == 0:
        raise EmptyInputError("EER needs both target and nontarget scores")

    thresholds = np.unique(np.concatenate([targets, nontargets]))
    far = (nontargets.size - np.searchsorted(nontargets, thresholds, side="left")) / nontargets.size
    frr = np.searchsorted(targets, thresholds, side="left") / targets.size
    gap = np.abs(far - frr)
    midpoint = (far + frr) / 2
    best = np.lexsort((midpoint, gap))[0]
    return EerResult(
        eer=float(midpoint[best]),
        threshold=float(thresholds[best]),
        far=float(far[best]),
        frr=float(frr[best]),
        n_target=int(targets.size),
        n_nontarget=int(nontargets.size),
    )


def build_trials(corpus: List[FeatureSequence], seed: int = 0, max_per_speaker: int = 50) -> TrialList:
    """
    Every same-speaker pair plus up to max_per_speaker sampled pairs between a
    speaker and later speakers of the same gender. Genders with fewer than two
    speakers are skipped.
    """
    by_speaker: Dict[str, List[str]] = {}
    genders: Dict[str, str] = {}
    for sequence in corpus:
        if sequence.gender is None:
            raise ContractError(f"Utterance {sequence.utterance_id} has no speaker gender")
        by_speaker.setdefault(sequence.speaker_id, []).append(sequence.utterance_id)
        genders[sequence.speaker_id] = sequence.gender.value

    rng = np.random.default_rng(seed)
    trials: List[Trial] = []
    for gender in sorted(set(genders.values())):
        speakers = sorted(s for s, g in genders.items() if g == gender)
        if len(speakers) < 2:
            logger.warning("Skipping gender %s: only %d speaker(s)", gender, len(speakers))
            continue
        pair = gender * 2
        for speaker in speakers:
            for a, b in itertools.combinations(by_speaker[speaker], 2):
                trials.append(Trial(utterance_a=a, utterance_b=b, same_speaker=True, gender_pair=pair))
        for position, speaker in enumerate(speakers[:-1]):
            candidates = [
                (a, b) for other in speakers[position + 1 :] for a in by_speaker[speaker] for b in by_speaker[other]
            ]
            chosen = rng.permutation(len(candidates))[:max_per_speaker]
            for index in sorted(chosen):
                a, b = candidates[index]
                trials.append(Trial(utterance_a=a, utterance_b=b, same_speaker=False, gender_pair=pair))
    return TrialList(trials=trials)


def score_trials(trials: TrialList, embeddings: Dict[str, np.ndarray]) -> List[Tuple[Trial, float]]:
    """Cosine score of every trial from precomputed (projected) embeddings."""
    missing = [u for u in trials.utterances() if u not in embeddings]
    if missing:
        raise ContractError(f"Trials reference unknown utterances: {', '.join(missing[:5])}")
    return [(t, cosine_score(embeddings[t.utterance_a], embeddings[t.utterance_b])) for t in trials.trials]


class SpeakerVerificationResult:
    """EER with the fitted LDA and every scored trial."""

    def __init__(self, eer: EerResult, lda: LdaModel, scores: List[Tuple[Trial, float]]):
        self.eer = eer
        self.lda = lda
        self.scores = scores


def evaluate_speaker_verification(
    corpus: List[FeatureSequence], cfg: Optional[SpeakerEvalConfig] = None, trials: Optional[TrialList] = None
) -> SpeakerVerificationResult:
    """
    Mean-pool each utterance, fit LDA on speakers that take no part in the
    trials, project, cosine-score and report the EER.

    Without explicit trials the speakers are split per gender and trials are
    built on the held-out half.
    """
    cfg = cfg or SpeakerEvalConfig()
    if trials is None:
        lda_part, trial_part = split_speakers(corpus, cfg.lda_speaker_fraction, cfg.seed)
        trials = build_trials(trial_part, cfg.seed, cfg.max_nontarget_per_speaker)
    else:
        in_trials = set(trials.utterances())
        trial_speakers = {s.speaker_id for s in corpus if s.utterance_id in in_trials}
        lda_part = [s for s in corpus if s.speaker_id not in trial_speakers]
        trial_part = [s for s in corpus if s.speaker_id in trial_speakers]
    if not trials.targets() or not trials.nontargets():
        raise ContractError("Trial list needs both target and nontarget trials")

    speakers = sorted({s.speaker_id for s in lda_part})
    if len(speakers) < 2:
        raise ContractError(f"LDA training set has {len(speakers)} speaker(s); need at least 2")
    train_x = np.stack([utterance_embed(s.frames) for s in lda_part])
    out_dim = min(cfg.lda_dim, len(speakers) - 1, train_x.shape[1])
    lda = fit_lda(train_x, [s.speaker_id for s in lda_part], out_dim)

    embeddings = {s.utterance_id: lda.transform(utterance_embed(s.frames)) for s in trial_part}
    scores = score_trials(trials, embeddings)
    eer = compute_eer(
        [score for trial, score in scores if trial.same_speaker],
        [score for trial, score in scores if not trial.same_speaker],
    )
    logger.info(
        "Speaker verification: EER %.4f over %d target / %d nontarget trials (LDA dim %d)",
        eer.eer,
        eer.n_target,
        eer.n_nontarget,
        out_dim,
    )
    return SpeakerVerificationResult(eer, lda, scores)
