"""The ``SNT1`` checkpoint container.

Layout (little-endian throughout)::

    b"SNT1" | u16 format version | u32 metadata length | metadata | payload

``metadata`` is UTF-8 JSON holding the training config, the vocabulary in
id order and a tensor index (name, rank, dims, byte offset into the
payload).  The payload is every tensor as float32, concatenated in index
order.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .textproc import Vocabulary
from .trainer import TrainConfig, build_model

MAGIC = b"SNT1"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHI")


class CheckpointError(ValueError):
    pass


class BadMagicError(CheckpointError):
    pass


class UnsupportedVersionError(CheckpointError):
    def __init__(self, found: int, supported: int = FORMAT_VERSION):
        super().__init__(f"unsupported checkpoint version {found}; this build reads version {supported}")
        self.found = found
        self.supported = supported


class CheckpointSizeError(CheckpointError):
    pass


class CheckpointShapeError(CheckpointError):
    pass


def encode_checkpoint(model, vocab: Vocabulary, cfg: TrainConfig) -> bytes:
    index, chunks, offset = [], [], 0
    for name, t in model.parameters().items():
        raw = np.ascontiguousarray(t.data, dtype="<f4").tobytes()
        index.append({"name": name, "rank": t.data.ndim, "dims": list(t.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    meta = {
        "config": cfg.to_dict(),
        "model": cfg.model,
        "vocab": list(vocab.tokens),
        "vocab_max_size": vocab.max_size,
        "tensors": index,
        "payload_bytes": offset,
    }
    meta_raw = json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return _HEADER.pack(MAGIC, FORMAT_VERSION, len(meta_raw)) + meta_raw + b"".join(chunks)


def save_checkpoint(model, vocab: Vocabulary, cfg: TrainConfig, path: str | Path, force: bool = False) -> None:
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass force=True to overwrite")
    path.write_bytes(encode_checkpoint(model, vocab, cfg))


def _split(blob: bytes) -> tuple[dict[str, Any], memoryview, int]:
    if len(blob) < _HEADER.size:
        raise CheckpointSizeError(f"file is {len(blob)} bytes, shorter than the {_HEADER.size}-byte header")
    magic, version, meta_len = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(version)
    meta_end = _HEADER.size + meta_len
    if len(blob) < meta_end:
        raise CheckpointSizeError(
            f"metadata declared as bytes {_HEADER.size}..{meta_end} but file ends at offset {len(blob)}"
        )
    try:
        meta = json.loads(blob[_HEADER.size : meta_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"unreadable metadata at offset {_HEADER.size}: {exc}") from exc
    return meta, memoryview(blob)[meta_end:], meta_end


def read_metadata(path: str | Path) -> dict[str, Any]:
    meta, _, _ = _split(Path(path).read_bytes())
    return meta


def decode_checkpoint(blob: bytes):
    meta, payload, base = _split(blob)
    declared = meta.get("payload_bytes")
    if declared != len(payload):
        raise CheckpointSizeError(
            f"payload declared as {declared} bytes from offset {base}, found {len(payload)} "
            f"(file ends at offset {base + len(payload)})"
        )
    cfg = TrainConfig.from_dict(meta["config"])
    vocab = Vocabulary(meta["vocab"], max_size=meta["vocab_max_size"])
    model = build_model(cfg, len(vocab))
    params = model.parameters()
    entries = {e["name"]: e for e in meta["tensors"]}
    if set(entries) != set(params):
        missing = sorted(set(params) - set(entries))
        extra = sorted(set(entries) - set(params))
        raise CheckpointShapeError(f"tensor index mismatch: missing {missing}, unexpected {extra}")
    for name, t in params.items():
        e = entries[name]
        dims = tuple(e["dims"])
        if e["rank"] != len(dims) or dims != t.shape:
            raise CheckpointShapeError(
                f"{name}: stored shape {dims} (rank {e['rank']}) at payload offset {e['offset']} "
                f"does not match configured shape {t.shape}"
            )
        nbytes = 4 * int(np.prod(dims))
        start, end = e["offset"], e["offset"] + nbytes
        if e.get("nbytes", nbytes) != nbytes or end > len(payload):
            raise CheckpointSizeError(
                f"{name}: needs payload bytes {start}..{end} (file offsets {base + start}..{base + end}), "
                f"payload has {len(payload)}"
            )
        t.data = np.frombuffer(payload[start:end], dtype="<f4").reshape(dims).astype(np.float32)
    return model, vocab, cfg


def load_checkpoint(path: str | Path):
    """Read a checkpoint; returns ``(model, vocab, cfg)``."""
    return decode_checkpoint(Path(path).read_bytes())
