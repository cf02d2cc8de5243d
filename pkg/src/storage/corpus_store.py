"""
A corpus on disk: one feature file per utterance, optional `.lab` label files
and a manifest tying them to speakers and genders.
"""

import logging
from pathlib import Path
from typing import List

import numpy as np

from ..errors import ContractError, MissingInputError, ParseError
from ..models.schema import FeatureSequence, ManifestRecord
from ..parsers.manifest_parser import ManifestParser, format_manifest
from .atomic import PathLike, atomic_write_text
from .feature_store import load_features, save_features

logger = logging.getLogger(__name__)


def write_labels(path: PathLike, labels: np.ndarray) -> Path:
    """One integer phone index per line."""
    return atomic_write_text(path, "".join(f"{int(v)}\n" for v in labels))


def read_labels(path: PathLike) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Label file not found: {path}")
    values = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            values.append(int(line))
        except ValueError as exc:
            raise ParseError(f"Line {number}: {line!r} is not an integer label", path=str(path)) from exc
    return np.array(values, dtype=np.int64)


def save_corpus(corpus: List[FeatureSequence], out_dir: PathLike, manifest_name: str = "manifest.tsv") -> Path:
    """
    Write features/<utt>.feat, labels/<utt>.lab (when labelled) and the
    manifest under out_dir. Returns the manifest path.
    """
    out_dir = Path(out_dir)
    records = []
    for sequence in corpus:
        if sequence.gender is None:
            raise ContractError(f"Utterance {sequence.utterance_id} has no gender; manifests require one")
        feature_path = Path("features") / f"{sequence.utterance_id}.feat"
        save_features(sequence, out_dir / feature_path)
        label_path = None
        if sequence.phone_labels is not None:
            label_path = Path("labels") / f"{sequence.utterance_id}.lab"
            write_labels(out_dir / label_path, sequence.phone_labels)
        records.append(
            ManifestRecord(
                utterance_id=sequence.utterance_id,
                feature_path=feature_path.as_posix(),
                speaker_id=sequence.speaker_id,
                gender=sequence.gender,
                label_path=label_path.as_posix() if label_path else None,
            )
        )
    manifest = atomic_write_text(out_dir / manifest_name, format_manifest(records))
    logger.info("Saved %d utterances to %s", len(records), manifest)
    return manifest


def load_corpus(manifest_path: PathLike) -> List[FeatureSequence]:
    """Load every utterance a manifest references; labels come from the `.lab` files."""
    manifest_path = Path(manifest_path)
    records = ManifestParser().parse_file(str(manifest_path))
    base = manifest_path.parent
    corpus = []
    for record in records:
        sequence = load_features(base / record.feature_path, record.gender)
        if sequence.utterance_id != record.utterance_id or sequence.speaker_id != record.speaker_id:
            raise ParseError(
                f"Manifest entry {record.utterance_id}/{record.speaker_id} does not match file header "
                f"{sequence.utterance_id}/{sequence.speaker_id}",
                path=str(base / record.feature_path),
            )
        if record.label_path:
            labels = read_labels(base / record.label_path)
            if labels.shape[0] != sequence.num_frames:
                raise ParseError(
                    f"{labels.shape[0]} labels for {sequence.num_frames} frames of {record.utterance_id}",
                    path=str(base / record.label_path),
                )
            sequence = FeatureSequence(
                utterance_id=sequence.utterance_id,
                speaker_id=sequence.speaker_id,
                frames=sequence.frames,
                phone_labels=labels,
                gender=record.gender,
            )
        corpus.append(sequence)
    logger.info("Loaded %d utterances from %s", len(corpus), manifest_path)
    return corpus
