"""
Parameter checkpoints with a human-readable metadata sidecar.

The binary file is b"APCCKPT1" followed by one record per tensor, sorted by
name: uint64 name length, name bytes, uint64 rank, rank * uint64 dims, then
the values as float32. All integers are little-endian. The sidecar
"<checkpoint>.meta" holds key = value lines describing the architecture.
"""

import logging
import struct
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError, MissingInputError, ParseError
from ..models.apc import ApcModel
from ..models.cpc import CpcModel
from ..models.schema import CpcVariant
from ..numerics import ParamStore
from .atomic import PathLike, atomic_write_bytes, atomic_write_text
from .feature_store import _Reader

logger = logging.getLogger(__name__)

CHECKPOINT_MAGIC = b"APCCKPT1"

Model = Union[ApcModel, CpcModel]


def encode_checkpoint(store: ParamStore) -> bytes:
    parts = [CHECKPOINT_MAGIC]
    for name, value in store.items():
        raw = name.encode("utf-8")
        parts.append(struct.pack("<Q", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<Q", value.ndim))
        parts.append(struct.pack(f"<{value.ndim}Q", *value.shape))
        parts.append(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return b"".join(parts)


def decode_checkpoint(data: bytes, path: Optional[str] = None) -> Dict[str, np.ndarray]:
    reader = _Reader(data, path)
    magic = reader.take(len(CHECKPOINT_MAGIC), "magic")
    if magic != CHECKPOINT_MAGIC:
        raise ParseError(f"Bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}", 0, path)
    tensors: Dict[str, np.ndarray] = {}
    while not reader.at_end():
        start = reader.offset
        (length,) = reader.unpack("<Q", "name length")
        name = reader.take(length, "tensor name").decode("utf-8", errors="replace")
        if name in tensors:
            raise ParseError(f"Duplicate tensor {name}", start, path)
        (rank,) = reader.unpack("<Q", f"rank of {name}")
        shape = reader.unpack(f"<{rank}Q", f"dims of {name}")
        count = int(np.prod(shape, dtype=np.int64))
        values = np.frombuffer(reader.take(count * 4, f"values of {name}"), dtype="<f4")
        tensors[name] = values.reshape(shape).astype(np.float32)
    return tensors


def _format_meta(metadata: Dict[str, object]) -> str:
    lines = []
    for key in sorted(metadata):
        value = metadata[key]
        lines.append(f"{key} = {str(value).lower() if isinstance(value, bool) else value}")
    return "\n".join(lines) + "\n"


def _parse_meta(text: str, path: str) -> Dict[str, str]:
    meta: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"Metadata line {number} is not key = value", path=path)
        key, value = line.split("=", 1)
        meta[key.strip()] = value.strip()
    return meta


def save_checkpoint(model: Model, path: PathLike) -> Path:
    """Write parameters and the metadata sidecar; neither is touched on failure."""
    path = Path(path)
    payload = encode_checkpoint(model.store)
    atomic_write_bytes(path, payload)
    atomic_write_text(path.with_name(path.name + ".meta"), _format_meta(model.metadata()))
    logger.info("Saved %s checkpoint with %d tensors to %s", model.metadata()["kind"], len(model.store), path)
    return path


def load_checkpoint(path: PathLike) -> Tuple[Dict[str, np.ndarray], Dict[str, str]]:
    """Raw tensors plus sidecar metadata."""
    path = Path(path)
    meta_path = path.with_name(path.name + ".meta")
    for required in (path, meta_path):
        if not required.is_file():
            raise MissingInputError(f"Checkpoint file not found: {required}")
    tensors = decode_checkpoint(path.read_bytes(), str(path))
    return tensors, _parse_meta(meta_path.read_text(encoding="utf-8"), str(meta_path))


def load_model(path: PathLike) -> Model:
    """Rebuild an APC or CPC model from a checkpoint and its metadata."""
    tensors, meta = load_checkpoint(path)
    try:
        kind = meta["kind"]
        input_dim = int(meta["input_dim"])
        hidden = int(meta["hidden_size"])
        n_steps = int(meta["n_steps"])
        if kind == "apc":
            model = ApcModel.create(
                input_dim,
                hidden,
                int(meta["num_layers"]),
                meta["residual"] == "true",
                precision="float32",
                n_steps=n_steps or None,
            )
        elif kind == "cpc":
            model = CpcModel.create(
                input_dim,
                int(meta["encoder_width"]),
                hidden,
                n_steps,
                CpcVariant(meta["variant"]),
                int(meta["negatives"]),
                precision="float32",
            )
        else:
            raise ConfigError(f"Unknown model kind {kind!r} in {path}.meta")
    except KeyError as exc:
        raise ParseError(f"Checkpoint metadata lacks {exc.args[0]}", path=f"{path}.meta") from exc
    except ValueError as exc:
        if isinstance(exc, (ConfigError, ParseError)):
            raise
        raise ParseError(f"Invalid checkpoint metadata: {exc}", path=f"{path}.meta") from exc
    model.store.load(tensors)
    return model
