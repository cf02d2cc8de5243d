"""
Deterministic train/dev/test splits: by utterance for phone probing, by
speaker for verification.
"""

from typing import Dict, List, Tuple

import numpy as np

from ..errors import ContractError
from ..models.schema import FeatureSequence


def split_utterances(
    corpus: List[FeatureSequence], dev_fraction: float, test_fraction: float, seed: int = 0
) -> Tuple[List[FeatureSequence], List[FeatureSequence], List[FeatureSequence]]:
    """Shuffle utterances and cut them into train/dev/test (speakers shared)."""
    if dev_fraction + test_fraction >= 1.0:
        raise ContractError("dev_fraction + test_fraction must be below 1")
    order = np.random.default_rng(seed).permutation(len(corpus))
    n_test = int(round(test_fraction * len(corpus)))
    n_dev = int(round(dev_fraction * len(corpus)))
    test = [corpus[i] for i in order[:n_test]]
    dev = [corpus[i] for i in order[n_test : n_test + n_dev]]
    train = [corpus[i] for i in order[n_test + n_dev :]]
    if not train:
        raise ContractError("Split leaves no training utterances")
    return train, dev, test


def split_speakers(
    corpus: List[FeatureSequence], fraction: float, seed: int = 0
) -> Tuple[List[FeatureSequence], List[FeatureSequence]]:
    """
    Partition utterances into two speaker-disjoint groups. Within each gender
    about `fraction` of the speakers go to the first group.
    """
    by_gender: Dict[str, List[str]] = {}
    for sequence in corpus:
        key = sequence.gender.value if sequence.gender else "?"
        speakers = by_gender.setdefault(key, [])
        if sequence.speaker_id not in speakers:
            speakers.append(sequence.speaker_id)

    rng = np.random.default_rng(seed)
    first: set = set()
    for gender in sorted(by_gender):
        speakers = sorted(by_gender[gender])
        chosen = rng.permutation(len(speakers))[: int(round(fraction * len(speakers)))]
        first.update(speakers[i] for i in chosen)
    return (
        [s for s in corpus if s.speaker_id in first],
        [s for s in corpus if s.speaker_id not in first],
    )
