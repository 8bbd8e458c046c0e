"""File formats used by the CLI.

``features.bin``: four little-endian uint32 (magic, version, T, d) followed by
T*d little-endian float64 values, row-major.

``scores.jsonl``: one object per frame,
``{"t": int, "scores": [K+1 floats], "anticipations": [[K+1 floats] * L_a]}``
where the floats are class probabilities.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DataError
from ..model.checkpoint import parse_meta

FEATURES_MAGIC = 0x54465353  # b"SSFT" read as little-endian uint32
FEATURES_VERSION = 1
_HEADER = struct.Struct("<4I")


def write_features(path, features) -> None:
    x = np.ascontiguousarray(features, dtype="<f8")
    if x.ndim != 2:
        raise DataError("features must be a T x d matrix")
    Path(path).write_bytes(_HEADER.pack(FEATURES_MAGIC, FEATURES_VERSION, *x.shape) + x.tobytes())


def read_features(path) -> np.ndarray:
    buf = Path(path).read_bytes()
    if len(buf) < _HEADER.size:
        raise DataError("features file too short for its header")
    magic, version, T, d = _HEADER.unpack_from(buf)
    if magic != FEATURES_MAGIC:
        raise DataError("bad magic in features file")
    if version != FEATURES_VERSION:
        raise DataError(f"unsupported features version {version}")
    body = buf[_HEADER.size :]
    if len(body) != 8 * T * d:
        raise DataError(f"expected {T}x{d} float64 values, found {len(body)} bytes")
    return np.frombuffer(body, dtype="<f8").astype(np.float64).reshape(T, d)


def read_config_file(path) -> dict:
    """Flat ``key=value`` text; ``#`` starts a comment line."""
    return parse_meta(Path(path).read_text())


def score_record(t: int, probs) -> dict:
    probs = np.asarray(probs)
    return {"t": int(t), "scores": probs[0].tolist(), "anticipations": probs[1:].tolist()}


def write_scores_jsonl(path, probs_per_frame) -> None:
    with open(path, "w") as fh:
        for t, probs in enumerate(probs_per_frame):
            fh.write(json.dumps(score_record(t, probs)) + "\n")


def read_scores_jsonl(path) -> list:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
