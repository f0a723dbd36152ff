"""Binary checkpoint files.

Layout, all integers little-endian::

    b"DAAN" | u32 version | u64 global step
    u32 count, then per tensor: name | u32 rank | u64 extents | f8 values
                                | u8 has-mask | f8 mask values
    u32 count, then per alias: name | target
    u64 optimizer step | u32 count, then per entry: name | f8 first | f8 second
    config text | vocabulary text
    u32 CRC32 of everything before it

Names and text blocks are a u32 byte length followed by UTF-8 bytes. Saving
a loaded checkpoint reproduces the file byte for byte.
"""

from __future__ import annotations

import io
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy

from tensor_api.optim import AdamState

from dualqa_api.config import ConfigError, ModelConfig
from dualqa_api.model import DualModel
from dualqa_api.registry import ParameterRegistry
from dualqa_api.vocabulary import CharTable, Vocabulary

logger = logging.getLogger(__name__)

MAGIC = b"DAAN"
VERSION = 1
_FLOAT = numpy.dtype("<f8")


class CheckpointError(ValueError):
    """Unreadable, corrupt or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    model: DualModel
    adam_state: AdamState
    global_step: int


class _Writer:
    def __init__(self):
        self.buffer = io.BytesIO()

    def pack(self, fmt: str, *values) -> None:
        self.buffer.write(struct.pack("<" + fmt, *values))

    def text(self, value: str) -> None:
        raw = value.encode("utf-8")
        self.pack("I", len(raw))
        self.buffer.write(raw)

    def array(self, values: numpy.ndarray) -> None:
        self.buffer.write(numpy.ascontiguousarray(values, dtype=_FLOAT).tobytes())

    def getvalue(self) -> bytes:
        return self.buffer.getvalue()


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int) -> bytes:
        if self.offset + size > len(self.data):
            raise CheckpointError("unexpected end of checkpoint data")
        chunk = self.data[self.offset : self.offset + size]
        self.offset += size
        return chunk

    def unpack(self, fmt: str) -> Tuple:
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def text(self) -> str:
        (size,) = self.unpack("I")
        return self.take(size).decode("utf-8")

    def array(self, shape: Tuple[int, ...]) -> numpy.ndarray:
        count = int(numpy.prod(shape, dtype=numpy.int64))
        raw = self.take(count * _FLOAT.itemsize)
        return numpy.frombuffer(raw, dtype=_FLOAT).astype(numpy.float64).reshape(shape)


def checkpoint_bytes(model: DualModel, state: AdamState, global_step: int) -> bytes:
    out = _Writer()
    out.buffer.write(MAGIC)
    out.pack("IQ", VERSION, global_step)

    registry = model.registry
    tensors = registry.physical
    masks = registry.masks
    out.pack("I", len(tensors))
    for name, tensor in tensors.items():
        out.text(name)
        out.pack("I", tensor.ndim)
        for extent in tensor.shape:
            out.pack("Q", extent)
        out.array(tensor.data)
        mask = masks.get(name)
        out.pack("B", int(mask is not None))
        if mask is not None:
            out.array(mask)

    aliases = registry.aliases
    out.pack("I", len(aliases))
    for name, target in aliases.items():
        out.text(name)
        out.text(target)

    out.pack("QI", state.step, len(state.first_moment))
    for name, first in state.first_moment.items():
        if name not in tensors:
            raise CheckpointError(f"optimizer state for unknown parameter '{name}'")
        out.text(name)
        out.array(first)
        out.array(state.second_moment[name])

    out.text(model.config.to_text())
    out.text(model.vocab.to_text())
    body = out.getvalue()
    return body + struct.pack("<I", zlib.crc32(body))


def save_checkpoint(
    path: Union[str, Path], model: DualModel, state: AdamState, global_step: int = None
) -> None:
    step = state.step if global_step is None else global_step
    Path(path).write_bytes(checkpoint_bytes(model, state, step))
    logger.info("saved checkpoint at step %d to %s", step, path)


def parse_checkpoint(data: bytes) -> Checkpoint:
    if len(data) < len(MAGIC) + 4 + 8 + 4:
        raise CheckpointError("checkpoint is truncated")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if zlib.crc32(body) != crc:
        raise CheckpointError("checkpoint checksum mismatch")
    reader = _Reader(body)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file")
    version, global_step = reader.unpack("IQ")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}, expected {VERSION}")

    registry = ParameterRegistry()
    (count,) = reader.unpack("I")
    shapes: Dict[str, Tuple[int, ...]] = {}
    for _ in range(count):
        name = reader.text()
        (rank,) = reader.unpack("I")
        shape = reader.unpack("Q" * rank) if rank else ()
        values = reader.array(shape)
        (has_mask,) = reader.unpack("B")
        mask = reader.array(shape) if has_mask else None
        registry.register(name, values, update_mask=mask)
        shapes[name] = shape

    (count,) = reader.unpack("I")
    for _ in range(count):
        name = reader.text()
        registry.alias(name, reader.text())

    step, count = reader.unpack("QI")
    state = AdamState(step=step)
    for _ in range(count):
        name = reader.text()
        if name not in shapes:
            raise CheckpointError(f"optimizer state for unknown parameter '{name}'")
        state.first_moment[name] = reader.array(shapes[name])
        state.second_moment[name] = reader.array(shapes[name])

    try:
        config = ModelConfig.from_text(reader.text())
    except ConfigError as exc:
        raise CheckpointError(f"stored configuration is invalid: {exc}") from exc
    vocab = Vocabulary.from_text(reader.text(), min_count=config.min_count)
    if reader.offset != len(body):
        raise CheckpointError("trailing bytes after checkpoint data")
    model = DualModel(config, vocab, registry, CharTable(config.max_word_length))
    return Checkpoint(model, state, global_step)


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint '{path}': {exc.strerror}") from exc
    return parse_checkpoint(data)
