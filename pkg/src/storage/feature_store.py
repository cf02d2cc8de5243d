"""
Binary feature files.

Layout (little-endian):
    b"FEAT1"
    uint32 length + UTF-8 utterance id
    uint32 length + UTF-8 speaker id
    uint64 T, uint64 D
    T * D float32 frames, row-major
    uint8 label flag, then T int32 phone labels when the flag is 1
"""

import logging
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from ..errors import MissingInputError, ParseError
from ..models.schema import FeatureSequence, Gender
from .atomic import PathLike, atomic_write_bytes

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"FEAT1"


def encode_features(sequence: FeatureSequence) -> bytes:
    """Serialize one utterance; gender lives in the manifest, not the file."""
    parts = [FEATURE_MAGIC]
    for text in (sequence.utterance_id, sequence.speaker_id):
        raw = text.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    frames = np.ascontiguousarray(sequence.frames, dtype="<f4")
    parts.append(struct.pack("<QQ", frames.shape[0], frames.shape[1]))
    parts.append(frames.tobytes())
    if sequence.phone_labels is None:
        parts.append(b"\x00")
    else:
        parts.append(b"\x01")
        parts.append(np.ascontiguousarray(sequence.phone_labels, dtype="<i4").tobytes())
    return b"".join(parts)


class _Reader:
    """Cursor over a byte buffer that reports the offset of any short read."""

    def __init__(self, data: bytes, path: Optional[str] = None):
        self.data = data
        self.offset = 0
        self.path = path

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise ParseError(
                f"Truncated {what}: need {size} bytes, {len(self.data) - self.offset} left", self.offset, self.path
            )
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str, what: str) -> Tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def text(self, what: str) -> str:
        (length,) = self.unpack("<I", f"{what} length")
        start = self.offset
        raw = self.take(length, what)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"{what} is not valid UTF-8", start, self.path) from exc

    def at_end(self) -> bool:
        return self.offset == len(self.data)


def decode_features(data: bytes, path: Optional[str] = None, gender: Optional[Gender] = None) -> FeatureSequence:
    reader = _Reader(data, path)
    magic = reader.take(len(FEATURE_MAGIC), "magic")
    if magic != FEATURE_MAGIC:
        raise ParseError(f"Bad magic {magic!r}, expected {FEATURE_MAGIC!r}", 0, path)
    utterance_id = reader.text("utterance id")
    speaker_id = reader.text("speaker id")
    steps, dim = reader.unpack("<QQ", "frame shape")
    frames = np.frombuffer(reader.take(steps * dim * 4, "frames"), dtype="<f4").reshape(steps, dim)
    flag_offset = reader.offset
    (flag,) = reader.unpack("<B", "label flag")
    labels = None
    if flag == 1:
        labels = np.frombuffer(reader.take(steps * 4, "labels"), dtype="<i4").astype(np.int64)
    elif flag != 0:
        raise ParseError(f"Label flag must be 0 or 1, got {flag}", flag_offset, path)
    if not reader.at_end():
        raise ParseError(f"{len(data) - reader.offset} trailing bytes", reader.offset, path)
    return FeatureSequence(
        utterance_id=utterance_id,
        speaker_id=speaker_id,
        frames=frames.astype(np.float32),
        phone_labels=labels,
        gender=gender,
    )


def save_features(sequence: FeatureSequence, path: PathLike) -> Path:
    return atomic_write_bytes(path, encode_features(sequence))


def load_features(path: PathLike, gender: Optional[Gender] = None) -> FeatureSequence:
    path = Path(path)
    if not path.is_file():
        raise MissingInputError(f"Feature file not found: {path}")
    return decode_features(path.read_bytes(), str(path), gender)
