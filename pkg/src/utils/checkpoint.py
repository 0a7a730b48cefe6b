"""
Checkpoint container.

Layout (all integers little-endian):

    magic      8 bytes  b"CAMBCKPT"
    version    uint32
    header     uint32 length + UTF-8 JSON (model config, Adam step, parameter count)
    count      uint32 number of named tensors
    per tensor:
        name   uint32 length + UTF-8 bytes
        rank   uint32
        extents rank x uint32
        payload product(extents) x float32 little-endian

Parameters come first in registry order, followed by the Adam moments
("adam.m/<name>", "adam.v/<name>") when an optimizer state is saved.
"""

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple, Union

import numpy as np

from ..interfaces.errors import CheckpointError
from ..models.config import ModelConfig
from ..models.training_state import AdamState

if TYPE_CHECKING:
    from ..services.network import ModelParams

MAGIC = b"CAMBCKPT"
VERSION = 1

_FIRST_MOMENT = "adam.m/"
_SECOND_MOMENT = "adam.v/"


@dataclass(frozen=True)
class Checkpoint:
    """Decoded checkpoint: model config, parameters in registry order, optional Adam state."""

    model: ModelConfig
    params: Dict[str, np.ndarray]
    adam_state: Optional[AdamState]
    header: Dict[str, Any]

    @property
    def parameter_names(self) -> List[str]:
        return list(self.params)

    @property
    def parameter_count(self) -> int:
        return sum(int(a.size) for a in self.params.values())


def encode_checkpoint(
    model: ModelConfig,
    params: Dict[str, np.ndarray],
    adam_state: Optional[AdamState] = None,
) -> bytes:
    entries: List[Tuple[str, np.ndarray]] = list(params.items())
    if adam_state is not None:
        entries += [(_FIRST_MOMENT + name, adam_state.m[name]) for name in params if name in adam_state.m]
        entries += [(_SECOND_MOMENT + name, adam_state.v[name]) for name in params if name in adam_state.v]

    header = {
        "model": model.to_dict(),
        "adam_step": adam_state.step if adam_state is not None else None,
        "parameter_tensors": len(params),
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")

    chunks = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(header_bytes)), header_bytes]
    chunks.append(struct.pack("<I", len(entries)))
    for name, array in entries:
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)) + encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f4").tobytes())
    return b"".join(chunks)


class _Reader:
    def __init__(self, buffer: bytes):
        self.buffer = buffer
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.buffer):
            raise CheckpointError(f"truncated while reading {what}", self.offset)
        chunk = self.buffer[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def uint32(self, what: str) -> int:
        return struct.unpack("<I", self.take(4, what))[0]


def decode_checkpoint(buffer: bytes) -> Checkpoint:
    """
    Parse a checkpoint; nothing is returned unless the whole file is valid.

    Raises:
        CheckpointError: bad magic, unknown version, truncation, duplicate names
    """
    reader = _Reader(buffer)
    if reader.take(len(MAGIC), "magic") != MAGIC:
        raise CheckpointError("bad magic, not a checkpoint", 0)
    version = reader.uint32("version")
    if version != VERSION:
        raise CheckpointError(f"unsupported version {version}, expected {VERSION}", 8)

    header_offset = reader.offset
    header_bytes = reader.take(reader.uint32("header length"), "header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
        model = ModelConfig.from_dict(header["model"])
    except (ValueError, KeyError, TypeError) as exc:
        raise CheckpointError(f"unreadable header: {exc}", header_offset) from None

    tensors: Dict[str, np.ndarray] = {}
    for _ in range(reader.uint32("tensor count")):
        name_offset = reader.offset
        name = reader.take(reader.uint32("name length"), "name").decode("utf-8", errors="replace")
        if name in tensors:
            raise CheckpointError(f"duplicate tensor name {name!r}", name_offset)
        rank = reader.uint32("rank")
        extents = struct.unpack(f"<{rank}I", reader.take(4 * rank, "extents"))
        if any(e < 1 for e in extents):
            raise CheckpointError(f"tensor {name!r} has an empty extent", name_offset)
        payload = reader.take(4 * int(np.prod(extents, dtype=np.int64)), f"payload of {name!r}")
        tensors[name] = np.frombuffer(payload, dtype="<f4").reshape(extents).astype(np.float32)
    if reader.offset != len(buffer):
        raise CheckpointError("trailing bytes after the last tensor", reader.offset)

    params = {n: a for n, a in tensors.items() if not n.startswith(("adam.m/", "adam.v/"))}
    adam_state = None
    if header.get("adam_step") is not None:
        adam_state = AdamState(
            m={n[len(_FIRST_MOMENT):]: a for n, a in tensors.items() if n.startswith(_FIRST_MOMENT)},
            v={n[len(_SECOND_MOMENT):]: a for n, a in tensors.items() if n.startswith(_SECOND_MOMENT)},
            step=int(header["adam_step"]),
        )
    return Checkpoint(model=model, params=params, adam_state=adam_state, header=header)


def save_checkpoint(
    params: "ModelParams",
    adam_state: Optional[AdamState],
    path: Union[str, Path],
) -> None:
    """Write the registry (and optimizer moments) of ``params`` to ``path``."""
    Path(path).write_bytes(encode_checkpoint(params.config, params.arrays(), adam_state))


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes())
