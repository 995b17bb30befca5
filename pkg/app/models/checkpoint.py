"""
Checkpoint codec

Binary layout, all integers and floats little-endian:

    magic        8 bytes   b"SSCMMDCK"
    version      uint32
    step         uint64
    epoch        uint64
    array count  uint32
    per array:
        name length  uint16, name (UTF-8)
        ndim         uint8,  dims uint64 x ndim
        data         float64 x prod(dims), row-major

A JSON sidecar (same path, .json suffix) holds the run configuration.
Both files are written to a temporary name and renamed into place.
"""

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import numpy as np
from loguru import logger

from app.core.exceptions import CheckpointError


MAGIC = b"SSCMMDCK"
VERSION = 1

_HEADER = struct.Struct("<8sIQQI")


@dataclass
class Checkpoint:
    arrays: Dict[str, np.ndarray]
    step: int = 0
    epoch: int = 0
    config: Optional[Dict[str, Any]] = field(default=None)


def sidecar_path(path: Union[str, Path]) -> Path:
    return Path(path).with_suffix(".json")


def _atomic_write(path: Path, payload: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as handle:
        handle.write(payload)
        handle.flush()
        os.fsync(handle.fileno())
    os.replace(tmp, path)


def encode(checkpoint: Checkpoint) -> bytes:
    parts = [_HEADER.pack(MAGIC, VERSION, checkpoint.step, checkpoint.epoch, len(checkpoint.arrays))]
    for name, array in checkpoint.arrays.items():
        array = np.ascontiguousarray(array, dtype="<f8")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<H", len(encoded)) + encoded)
        parts.append(struct.pack("<B", array.ndim) + struct.pack(f"<{array.ndim}Q", *array.shape))
        parts.append(array.tobytes(order="C"))
    return b"".join(parts)


def decode(payload: bytes) -> Checkpoint:
    if len(payload) < _HEADER.size:
        raise CheckpointError("checkpoint truncated before header end")
    magic, version, step, epoch, count = _HEADER.unpack_from(payload, 0)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")

    offset = _HEADER.size
    arrays: Dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", payload, offset)
            offset += 2
            name = payload[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", payload, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}Q", payload, offset)
            offset += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64)) if ndim else 1
            end = offset + 8 * size
            if end > len(payload):
                raise CheckpointError(f"array '{name}' truncated")
            arrays[name] = np.frombuffer(payload[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
            offset = end
    except struct.error as exc:
        raise CheckpointError(f"checkpoint truncated: {exc}") from exc
    if offset != len(payload):
        raise CheckpointError(f"{len(payload) - offset} trailing bytes after last array")
    return Checkpoint(arrays=arrays, step=step, epoch=epoch)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    """Write checkpoint and config sidecar atomically"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _atomic_write(path, encode(checkpoint))
    if checkpoint.config is not None:
        text = json.dumps(checkpoint.config, indent=2, sort_keys=True) + "\n"
        _atomic_write(sidecar_path(path), text.encode("utf-8"))
    logger.debug(f"Checkpoint written: {path} (epoch {checkpoint.epoch}, step {checkpoint.step})")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    checkpoint = decode(path.read_bytes())
    sidecar = sidecar_path(path)
    if sidecar.exists():
        try:
            checkpoint.config = json.loads(sidecar.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise CheckpointError(f"{sidecar}: invalid JSON ({exc})") from exc
    return checkpoint
