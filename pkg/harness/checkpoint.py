"""Single-file training checkpoints.

Little-endian layout::

    "ISK1"  u32 version  32-byte config digest (SHA-256)
    then sections, each: 4-byte tag, u64 payload length, payload, u32 CRC-32

    PARM  u32 count, then per tensor (sorted by name):
          u16 name length, UTF-8 name, u32 rank, u32 extents, f64 values
    ADAM  f64 lr, beta1, beta2, eps; u64 step; first moments; second moments
          (each a tensor list as in PARM)
    RNGS  u64 seed, u64 update counter
    CONF  canonical config text (digest-relevant keys)

Random streams are counter based, so (seed, update) is the complete
generator state.
"""
from __future__ import annotations

import hashlib
import io
import logging
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union

import numpy as np

from beliefnet import BeliefModel
from harness.config import ExperimentConfig, config_from_text
from harness.errors import (
    CheckpointCorruptError, CheckpointFormatError, ConfigDigestError, ConfigError,
)
from numerics.optim import AdamState

logger = logging.getLogger(__name__)

MAGIC = b"ISK1"
VERSION = 1
SECTIONS = (b"PARM", b"ADAM", b"RNGS", b"CONF")


@dataclass
class Checkpoint:
    config: ExperimentConfig
    parameters: dict[str, np.ndarray]
    adam: AdamState
    seed: int
    update: int
    version: int = VERSION

    @property
    def digest(self) -> str:
        return self.config.digest()

    def restore(self, model: BeliefModel) -> AdamState:
        """Load parameters into ``model`` and return the optimizer state with
        moments in the parameters' precision."""
        model.parameters.load(self.parameters)
        for name, p in model.parameters.items():
            if name in self.adam.first:
                self.adam.first[name] = self.adam.first[name].astype(p.values.dtype)
                self.adam.second[name] = self.adam.second[name].astype(p.values.dtype)
        return self.adam


def _encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    out = io.BytesIO()
    out.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        values = np.asarray(tensors[name], dtype="<f8")
        raw = name.encode("utf-8")
        out.write(struct.pack("<H", len(raw)))
        out.write(raw)
        out.write(struct.pack("<I", values.ndim))
        out.write(struct.pack(f"<{values.ndim}I", *values.shape))
        out.write(values.tobytes(order="C"))
    return out.getvalue()


class _Reader:
    def __init__(self, data: bytes, section: str):
        self.data = data
        self.pos = 0
        self.section = section

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointCorruptError(self.section, f"truncated at byte {self.pos} (needed {n} more)")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str) -> tuple:
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def tensors(self) -> dict[str, np.ndarray]:
        (count,) = self.unpack("<I")
        out = {}
        for _ in range(count):
            (length,) = self.unpack("<H")
            name = self.take(length).decode("utf-8")
            (rank,) = self.unpack("<I")
            shape = self.unpack(f"<{rank}I") if rank else ()
            size = int(np.prod(shape)) if rank else 1
            out[name] = np.frombuffer(self.take(8 * size), dtype="<f8").astype(np.float64).reshape(shape)
        return out

    def finish(self) -> None:
        if self.pos != len(self.data):
            raise CheckpointCorruptError(self.section, f"{len(self.data) - self.pos} trailing bytes")


def _section(tag: bytes, payload: bytes) -> bytes:
    return tag + struct.pack("<Q", len(payload)) + payload + struct.pack("<I", zlib.crc32(payload))


def encode_checkpoint(checkpoint: Checkpoint) -> bytes:
    adam = checkpoint.adam
    adam_payload = (
        struct.pack("<4dQ", adam.lr, adam.beta1, adam.beta2, adam.eps, adam.step)
        + _encode_tensors(adam.first)
        + _encode_tensors(adam.second)
    )
    return b"".join([
        MAGIC,
        struct.pack("<I", checkpoint.version),
        bytes.fromhex(checkpoint.digest),
        _section(b"PARM", _encode_tensors(checkpoint.parameters)),
        _section(b"ADAM", adam_payload),
        _section(b"RNGS", struct.pack("<QQ", checkpoint.seed, checkpoint.update)),
        _section(b"CONF", checkpoint.config.canonical_text().encode("utf-8")),
    ])


def decode_checkpoint(data: bytes, expected_digest: Optional[str] = None) -> Checkpoint:
    """Parse checkpoint bytes; ``expected_digest`` guards against config drift."""
    if len(data) < 8 or data[:4] != MAGIC:
        raise CheckpointFormatError(f"not a checkpoint: magic {data[:4]!r}, expected {MAGIC!r}")
    (version,) = struct.unpack("<I", data[4:8])
    if version != VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}, expected {VERSION}")
    if len(data) < 40:
        raise CheckpointCorruptError("header", "truncated digest")
    digest = data[8:40].hex()
    if expected_digest is not None and digest != expected_digest:
        raise ConfigDigestError(f"checkpoint config digest {digest[:12]}… does not match {expected_digest[:12]}…")

    payloads = {}
    pos = 40
    for tag in SECTIONS:
        name = tag.decode("ascii")
        if pos + 12 > len(data):
            raise CheckpointCorruptError(name, "section header truncated")
        if data[pos:pos + 4] != tag:
            raise CheckpointCorruptError(name, f"found tag {data[pos:pos + 4]!r}")
        (length,) = struct.unpack("<Q", data[pos + 4:pos + 12])
        end = pos + 12 + length
        if end + 4 > len(data):
            raise CheckpointCorruptError(name, f"payload of {length} bytes runs past end of file")
        payload = data[pos + 12:end]
        (crc,) = struct.unpack("<I", data[end:end + 4])
        if zlib.crc32(payload) != crc:
            raise CheckpointCorruptError(name, "checksum mismatch")
        payloads[name] = payload
        pos = end + 4
    if pos != len(data):
        raise CheckpointCorruptError("trailer", f"{len(data) - pos} unexpected bytes after the last section")

    parm = _Reader(payloads["PARM"], "PARM")
    parameters = parm.tensors()
    parm.finish()

    adam_reader = _Reader(payloads["ADAM"], "ADAM")
    lr, beta1, beta2, eps, step = adam_reader.unpack("<4dQ")
    adam = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=step)
    adam.first = adam_reader.tensors()
    adam.second = adam_reader.tensors()
    adam_reader.finish()

    rngs = _Reader(payloads["RNGS"], "RNGS")
    seed, update = rngs.unpack("<QQ")
    rngs.finish()

    text = payloads["CONF"].decode("utf-8")
    if hashlib.sha256(payloads["CONF"]).hexdigest() != digest:
        raise CheckpointCorruptError("CONF", "config text does not match the header digest")
    try:
        config = config_from_text(text)
    except ConfigError as e:
        raise CheckpointCorruptError("CONF", str(e)) from None
    return Checkpoint(config=config, parameters=parameters, adam=adam, seed=seed, update=update, version=version)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode_checkpoint(checkpoint))
    tmp.replace(path)
    logger.debug("saved checkpoint at update %d to %s", checkpoint.update, path)
    return path


def load_checkpoint(path: Union[str, Path], expected_digest: Optional[str] = None) -> Checkpoint:
    return decode_checkpoint(Path(path).read_bytes(), expected_digest)
