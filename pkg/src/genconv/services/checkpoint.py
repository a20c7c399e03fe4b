# src/genconv/services/checkpoint.py
"""
GCKP checkpoint files.

Layout (little-endian): magic "GCKP", version u16, config length u32 + UTF-8
JSON, parameter count u64, dtype code u8, parameter blob, optimizer kind u8,
optimizer step u64, first/second moment blobs, epoch u32, RNG state.
"""
from __future__ import annotations

import os
import struct
from typing import Optional

import numpy as np
import orjson
from pydantic import ValidationError

from ..core.numeric import resolve_dtype
from ..core.optim import OptimizerState
from ..domain.models import ModelConfig
from ..errors import CheckpointError, ShapeError
from ..logging import get_component_logger
from .model import GenConvModel, TrainingState, build_model

log = get_component_logger("checkpoint")

MAGIC = b"GCKP"
VERSION = 1
DTYPE_CODES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}
OPTIMIZER_KINDS = {0: None, 1: "adam", 2: "sgd"}


def config_bytes(config: ModelConfig) -> bytes:
    return orjson.dumps(config.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)


# ─────────────────────────────────────────────
# 💾 WRITE
# ─────────────────────────────────────────────
def _rng_bytes(rng_state: Optional[dict]) -> bytes:
    if rng_state is None:
        return struct.pack("<B", 0)
    if rng_state.get("bit_generator") != "PCG64":
        raise CheckpointError(f"unsupported bit generator {rng_state.get('bit_generator')}")
    inner = rng_state["state"]
    return (
        struct.pack("<B", 1)
        + int(inner["state"]).to_bytes(16, "little")
        + int(inner["inc"]).to_bytes(16, "little")
        + struct.pack("<BI", int(rng_state["has_uint32"]), int(rng_state["uinteger"]))
    )


def encode_checkpoint(model: GenConvModel) -> bytes:
    dtype = np.dtype(model.dtype).newbyteorder("<")
    params = model.flat_parameters().astype(dtype, copy=False)
    cfg = config_bytes(model.config)
    state = model.training_state or TrainingState()

    parts = [
        struct.pack("<4sH", MAGIC, VERSION),
        struct.pack("<I", len(cfg)),
        cfg,
        struct.pack("<QB", params.size, dtype.itemsize),
        params.tobytes(),
    ]
    opt = state.optimizer
    if opt is None:
        parts.append(struct.pack("<BQ", 0, 0))
    else:
        kind = {v: k for k, v in OPTIMIZER_KINDS.items()}[opt.kind]
        parts.append(struct.pack("<BQ", kind, opt.step))
        for buffers in (opt.m, opt.v):
            flat = np.concatenate([b.ravel() for b in buffers]) if buffers else np.empty(0)
            parts.append(flat.astype(dtype, copy=False).tobytes())
    parts.append(struct.pack("<I", state.epoch))
    parts.append(_rng_bytes(state.rng_state))
    return b"".join(parts)


def save_checkpoint(model: GenConvModel, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    blob = encode_checkpoint(model)
    with open(path, "wb") as f:
        f.write(blob)
    log.info("checkpoint_saved", path=path, parameters=model.parameter_count, bytes=len(blob))
    return path


# ─────────────────────────────────────────────
# 📂 READ
# ─────────────────────────────────────────────
class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int, what: str) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError(f"checkpoint truncated while reading {what}")
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt: str, what: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))

    def array(self, count: int, dtype: np.dtype, what: str) -> np.ndarray:
        return np.frombuffer(self.take(count * dtype.itemsize, what), dtype=dtype).copy()


def _read_rng(reader: _Reader) -> Optional[dict]:
    (present,) = reader.unpack("<B", "rng flag")
    if not present:
        return None
    state = int.from_bytes(reader.take(16, "rng state"), "little")
    inc = int.from_bytes(reader.take(16, "rng increment"), "little")
    has_uint32, uinteger = reader.unpack("<BI", "rng tail")
    return {
        "bit_generator": "PCG64",
        "state": {"state": state, "inc": inc},
        "has_uint32": has_uint32,
        "uinteger": uinteger,
    }


def decode_checkpoint(data: bytes) -> GenConvModel:
    reader = _Reader(data)
    magic, version = reader.unpack("<4sH", "header")
    if magic != MAGIC:
        raise CheckpointError(f"not a GCKP checkpoint (magic {magic!r})")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")

    (cfg_len,) = reader.unpack("<I", "config length")
    try:
        config = ModelConfig.model_validate(orjson.loads(reader.take(cfg_len, "config")))
    except (orjson.JSONDecodeError, ValidationError) as e:
        raise CheckpointError(f"invalid embedded config: {e}") from e

    count, code = reader.unpack("<QB", "parameter header")
    dtype = DTYPE_CODES.get(code)
    if dtype is None:
        raise CheckpointError(f"unknown parameter dtype code {code}")
    if dtype != resolve_dtype(config.precision):
        raise CheckpointError(
            f"parameter dtype {dtype.name} does not match config precision {config.precision}"
        )
    model = build_model(config)
    if count != model.parameter_count:
        raise CheckpointError(
            f"checkpoint holds {count} parameters, config describes {model.parameter_count}"
        )
    try:
        model.load_flat_parameters(reader.array(count, dtype, "parameters"))
    except ShapeError as e:
        raise CheckpointError(str(e)) from e

    kind_code, step = reader.unpack("<BQ", "optimizer header")
    if kind_code not in OPTIMIZER_KINDS:
        raise CheckpointError(f"unknown optimizer kind {kind_code}")
    optimizer = None
    if OPTIMIZER_KINDS[kind_code] is not None:
        m_flat = reader.array(count, dtype, "first moments")
        v_flat = reader.array(count, dtype, "second moments")
        spec = config.optimizer.model_copy(update={"kind": OPTIMIZER_KINDS[kind_code]})
        optimizer = OptimizerState.for_parameters(model.parameters(), spec)
        optimizer.step = step
        offset = 0
        for m, v in zip(optimizer.m, optimizer.v):
            m[...] = m_flat[offset : offset + m.size].reshape(m.shape)
            v[...] = v_flat[offset : offset + v.size].reshape(v.shape)
            offset += m.size

    (epoch,) = reader.unpack("<I", "epoch")
    rng_state = _read_rng(reader)
    if reader.pos != len(data):
        raise CheckpointError(f"{len(data) - reader.pos} unexpected trailing bytes")

    model.training_state = TrainingState(optimizer=optimizer, epoch=epoch, rng_state=rng_state)
    return model


def load_checkpoint(path: str) -> GenConvModel:
    if not os.path.exists(path):
        raise CheckpointError(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        data = f.read()
    model = decode_checkpoint(data)
    log.info("checkpoint_loaded", path=path, parameters=model.parameter_count)
    return model
