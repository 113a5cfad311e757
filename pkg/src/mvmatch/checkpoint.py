"""Checkpoint files.

Layout::

    MVMATCH-CKPT\\n
    <manifest as one line of JSON>\\n
    <raw little-endian tensor blocks, in manifest order>

The manifest starts with ``format_version`` and lists every tensor's name,
shape, byte offset (from the start of the data section) and size.  Blocks
are stored in the model precision so 64-bit models round-trip exactly.
"""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .config import ModelConfig
from .embeddings import CharVocabulary, EmbeddingTable, Vocabulary
from .model import MultiViewMatcher
from .typeminer import TypeProfile

MAGIC = b"MVMATCH-CKPT\n"
FORMAT_VERSION = 1
FIXED_ROWS = "embeddings.word.fixed"
SPECIAL_ROWS = "embeddings.word.special"


class CheckpointError(ValueError):
    pass


def _tensors(model: MultiViewMatcher) -> list[tuple[str, np.ndarray]]:
    out = [(name, node.value) for name, node in model.store.items()]
    if not model.table.trainable:
        out.append((SPECIAL_ROWS, model.table.special.value))
    out.append((FIXED_ROWS, model.table.fixed))
    return out


def checkpoint_bytes(model: MultiViewMatcher) -> bytes:
    dtype = np.dtype(model.config.dtype).newbyteorder("<")
    entries, blocks, offset = [], [], 0
    for name, value in _tensors(model):
        raw = np.ascontiguousarray(value, dtype=dtype).tobytes()
        entries.append({"name": name, "shape": list(value.shape), "offset": offset, "nbytes": len(raw)})
        blocks.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": FORMAT_VERSION,
        "dtype": dtype.str,
        "tensors": entries,
        "config": model.config.to_dict(),
        "special_trainable": bool(model.table.trainable),
        "vocab": model.vocab.tokens[model.vocab.n_special:],
        "chars": model.chars.chars[1:],
        "profiles": [[p.relation, list(p.types), p.sample_size]
                     for _, p in sorted(model.profiles.items())],
    }
    header = json.dumps(manifest, ensure_ascii=True, separators=(",", ":")).encode("ascii")
    return MAGIC + header + b"\n" + b"".join(blocks)


def save_checkpoint(model: MultiViewMatcher, path: str | Path) -> None:
    """Write atomically: a crash never leaves a half-written file at ``path``."""
    path = Path(path)
    data = checkpoint_bytes(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(data: bytes) -> tuple[dict, int]:
    if not data.startswith(MAGIC):
        raise CheckpointError("not a checkpoint file (bad magic)")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise CheckpointError("truncated checkpoint header")
    try:
        manifest = json.loads(data[len(MAGIC):end].decode("ascii"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"corrupt manifest: {exc}") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format version {version!r}")
    return manifest, end + 1


def load_checkpoint(path: str | Path) -> MultiViewMatcher:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    manifest, start = read_manifest(data)
    dtype = np.dtype(manifest["dtype"])
    arrays = {}
    for e in manifest["tensors"]:
        lo = start + e["offset"]
        hi = lo + e["nbytes"]
        if hi > len(data):
            raise CheckpointError(f"tensor {e['name']} runs past end of file")
        arrays[e["name"]] = np.frombuffer(data[lo:hi], dtype=dtype).reshape(e["shape"])
    if FIXED_ROWS not in arrays:
        raise CheckpointError("checkpoint lacks the pretrained embedding rows")

    config = ModelConfig.from_dict(manifest["config"])
    vocab = Vocabulary(manifest["vocab"])
    special = arrays.get(SPECIAL_ROWS)
    if special is None:
        raise CheckpointError("checkpoint lacks the special embedding rows")
    table = EmbeddingTable(arrays[FIXED_ROWS].astype(config.dtype), special.astype(config.dtype),
                           trainable=bool(manifest.get("special_trainable", True)))
    profiles = {r: TypeProfile(r, tuple(t), n) for r, t, n in manifest["profiles"]}
    model = MultiViewMatcher(config, vocab, table, CharVocabulary(manifest["chars"]), profiles)

    names = set(model.store)
    missing = names - set(arrays)
    unexpected = set(arrays) - names - {FIXED_ROWS, SPECIAL_ROWS}
    if missing or unexpected:
        raise CheckpointError(f"parameter mismatch: missing {sorted(missing)}, "
                              f"unexpected {sorted(unexpected)}")
    for name, node in model.store.items():
        if node.value.shape != arrays[name].shape:
            raise CheckpointError(f"{name}: shape {arrays[name].shape} != {node.value.shape}")
        node.value[...] = arrays[name]
    return model
