"""Versioned, byte-stable checkpoint container.

Layout::

    b"SNCK" | uint32 version | uint64 header length | JSON header | float64 blobs

The header is canonical JSON (sorted keys, no whitespace) listing the model
kind, its config, vocabularies with their SHA-256 hashes and every parameter
as ``{name, shape, offset}``. Blobs are little-endian float64 in header order.
"""
from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SNCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def vocab_hash(tokens: list[str]) -> str:
    return hashlib.sha256("\n".join(tokens).encode("utf-8")).hexdigest()


def dumps_checkpoint(kind: str, config: dict, params: dict[str, np.ndarray],
                     vocabularies: dict[str, list[str]], meta: dict | None = None) -> bytes:
    entries = []
    offset = 0
    blobs = []
    for name, value in params.items():
        arr = np.ascontiguousarray(value, dtype="<f8")
        entries.append({"name": name, "shape": list(arr.shape), "offset": offset})
        blobs.append(arr.tobytes())
        offset += arr.nbytes
    header = {
        "kind": kind,
        "config": config,
        "vocabularies": {
            k: {"tokens": list(v), "sha256": vocab_hash(list(v))} for k, v in vocabularies.items()
        },
        "params": entries,
        "meta": meta or {},
    }
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<IQ", VERSION, len(raw)) + raw + b"".join(blobs)


def loads_checkpoint(buf: bytes) -> dict:
    if buf[:4] != MAGIC:
        raise CheckpointError("not a checkpoint (bad magic)")
    if len(buf) < 16:
        raise CheckpointError("truncated checkpoint header")
    version, hlen = struct.unpack("<IQ", buf[4:16])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        header = json.loads(buf[16 : 16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    base = 16 + hlen
    params = {}
    for entry in header["params"]:
        count = int(np.prod(entry["shape"], dtype=np.int64))
        start = base + entry["offset"]
        end = start + 8 * count
        if end > len(buf):
            raise CheckpointError(f"truncated data for parameter {entry['name']}")
        params[entry["name"]] = np.frombuffer(buf[start:end], dtype="<f8").reshape(entry["shape"]).copy()
    for name, vocab in header["vocabularies"].items():
        if vocab_hash(vocab["tokens"]) != vocab["sha256"]:
            raise CheckpointError(f"vocabulary hash mismatch for {name}")
    header["params"] = params
    return header


def save_checkpoint(path, *args, **kwargs) -> bytes:
    data = dumps_checkpoint(*args, **kwargs)
    Path(path).write_bytes(data)
    return data


def load_checkpoint(path) -> dict:
    try:
        buf = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc.strerror}") from None
    return loads_checkpoint(buf)
