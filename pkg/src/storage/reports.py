"""
Text artifacts: key=value metric reports, trial score files, loss histories,
speaker statistics and the optional loss-curve plot.
"""

import logging
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import MissingInputError, ParseError
from ..frontend.normalize import SpeakerStats
from ..models.schema import Trial
from .atomic import PathLike, atomic_write_text

logger = logging.getLogger(__name__)

Record = Dict[str, object]


def _format_value(value: object) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    text = str(value)
    if any(ch.isspace() for ch in text) or "=" in text:
        raise ParseError(f"Report value {text!r} contains whitespace or '='")
    return text


def format_record(record: Record) -> str:
    """One line of space-separated key=value pairs, keys in insertion order."""
    return " ".join(f"{key}={_format_value(value)}" for key, value in record.items())


def write_report(path: PathLike, records: Sequence[Record]) -> Path:
    """Replace the report at path with one line per record."""
    text = "".join(format_record(r) + "\n" for r in records)
    logger.info("Writing %d report record(s) to %s", len(records), path)
    return atomic_write_text(path, text)


def read_report(path: PathLike) -> List[Dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Report not found: {path}")
    records = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        record = {}
        for field in line.split():
            if "=" not in field:
                raise ParseError(f"Line {number}: field {field!r} is not key=value", path=str(path))
            key, value = field.split("=", 1)
            record[key] = value
        records.append(record)
    return records


def write_scores(path: PathLike, scores: Sequence[Tuple[Trial, float]]) -> Path:
    """Lines of "utt_a utt_b score label" with label 1 for target trials."""
    lines = [
        f"{trial.utterance_a} {trial.utterance_b} {score!r} {int(trial.same_speaker)}\n" for trial, score in scores
    ]
    return atomic_write_text(path, "".join(lines))


def write_loss_history(path: PathLike, history: Sequence[float]) -> Path:
    """Lines of "epoch loss", epochs counted from 1."""
    return atomic_write_text(path, "".join(f"{epoch} {float(loss)!r}\n" for epoch, loss in enumerate(history, 1)))


def read_loss_history(path: PathLike) -> List[float]:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Loss history not found: {path}")
    history = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        try:
            _, loss = line.split()
            history.append(float(loss))
        except ValueError as exc:
            raise ParseError(f"Line {number} is not 'epoch loss'", path=str(path)) from exc
    return history


def plot_loss_history(path: PathLike, history: Sequence[float], title: str = "training loss") -> Path:
    """Render the loss curve as an SVG file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(1, len(history) + 1), history, marker="o", markersize=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    # svg metadata carries a date and element ids a random salt by default
    with matplotlib.rc_context({"svg.hashsalt": "apc-speech"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def write_speaker_stats(path: PathLike, stats: SpeakerStats) -> Path:
    """Lines of "speaker mean|std v1,v2,..." with exact float reprs."""
    lines = []
    for speaker in stats.speakers():
        for kind, values in (("mean", stats.means[speaker]), ("std", stats.stds[speaker])):
            lines.append(f"{speaker} {kind} {','.join(repr(float(v)) for v in values)}\n")
    return atomic_write_text(path, "".join(lines))


def read_speaker_stats(path: PathLike) -> SpeakerStats:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Speaker statistics not found: {path}")
    means: Dict[str, np.ndarray] = {}
    stds: Dict[str, np.ndarray] = {}
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        parts = line.split()
        if len(parts) != 3 or parts[1] not in ("mean", "std"):
            raise ParseError(f"Line {number} is not 'speaker mean|std values'", path=str(path))
        try:
            values = np.array([float(v) for v in parts[2].split(",")])
        except ValueError as exc:
            raise ParseError(f"Line {number} has a non-numeric value", path=str(path)) from exc
        (means if parts[1] == "mean" else stds)[parts[0]] = values
    if set(means) != set(stds):
        raise ParseError("Every speaker needs both a mean and a std line", path=str(path))
    return SpeakerStats(means, stds)
