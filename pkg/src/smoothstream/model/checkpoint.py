"""Binary checkpoint container.

Layout (all integers little-endian uint32, floats little-endian float64)::

    b"SSCK"                       magic
    version                       currently 1
    meta_len, meta bytes          UTF-8 "key=value" lines: ModelConfig fields,
                                  then any extra metadata keys
    tensor_count
    repeated tensor_count times:
        name_len, name bytes      UTF-8 tensor name
        ndim, dim_0 .. dim_{ndim-1}
        prod(dims) float64 values, row-major
"""
from __future__ import annotations

import struct
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from ..errors import DataError
from .config import ModelConfig, coerce_fields
from .params import ModelParams

MAGIC = b"SSCK"
VERSION = 1


def _u32(n: int) -> bytes:
    return struct.pack("<I", n)


def encode_meta(values: dict) -> str:
    return "".join(f"{k}={'none' if v is None else v}\n" for k, v in values.items())


def parse_meta(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise DataError(f"expected key=value, got {line!r}")
        out[key.strip()] = value.strip()
    return out


def save_checkpoint(path, params: ModelParams, extra: dict | None = None) -> None:
    meta = asdict(params.config)
    meta.update(extra or {})
    meta_bytes = encode_meta(meta).encode()
    chunks = [MAGIC, _u32(VERSION), _u32(len(meta_bytes)), meta_bytes, _u32(len(params.tensors))]
    for name, t in params.tensors.items():
        nb = name.encode()
        chunks += [_u32(len(nb)), nb, _u32(t.ndim), *(_u32(s) for s in t.shape)]
        chunks.append(np.ascontiguousarray(t, dtype="<f8").tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_checkpoint(path) -> tuple[ModelParams, dict]:
    """Returns the params and the metadata keys that are not ModelConfig fields."""
    buf = Path(path).read_bytes()
    pos = 0

    def u32():
        nonlocal pos
        (v,) = struct.unpack_from("<I", buf, pos)
        pos += 4
        return v

    def raw(n):
        nonlocal pos
        if pos + n > len(buf):
            raise DataError("truncated checkpoint")
        b = buf[pos : pos + n]
        pos += n
        return b

    if raw(4) != MAGIC:
        raise DataError("not a checkpoint (bad magic)")
    version = u32()
    if version != VERSION:
        raise DataError(f"unsupported checkpoint version {version}")
    meta = parse_meta(raw(u32()).decode())
    config = ModelConfig(**coerce_fields(ModelConfig, meta))
    names = {f.name for f in fields(ModelConfig)}
    extra = {k: v for k, v in meta.items() if k not in names}
    tensors = {}
    for _ in range(u32()):
        name = raw(u32()).decode()
        shape = tuple(u32() for _ in range(u32()))
        count = int(np.prod(shape)) if shape else 1
        tensors[name] = np.frombuffer(raw(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if pos != len(buf):
        raise DataError("trailing bytes after checkpoint tensors")
    return ModelParams(config, tensors), extra
