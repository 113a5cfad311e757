import json

import numpy as np
import pytest

from mvmatch import synthetic
from mvmatch.checkpoint import (MAGIC, CheckpointError, checkpoint_bytes, load_checkpoint,
                                read_manifest, save_checkpoint)
from mvmatch.embeddings import EmbeddingTable
from mvmatch.model import build_model


def _model(**kw):
    corpus = synthetic.toy_overfit_corpus()
    return corpus, corpus.model(synthetic.tiny_config(11, **kw))


def test_manifest_layout():
    _, model = _model()
    data = checkpoint_bytes(model)
    assert data.startswith(MAGIC)
    header = data[len(MAGIC):data.index(b"\n", len(MAGIC))]
    assert header.startswith(b'{"format_version":1')
    manifest, start = read_manifest(data)
    last = manifest["tensors"][-1]
    assert start + last["offset"] + last["nbytes"] == len(data)


def test_truncated_file_rejected(tmp_path):
    _, model = _model()
    data = checkpoint_bytes(model)
    p = tmp_path / "t.ckpt"
    p.write_bytes(data[:-8])
    with pytest.raises(CheckpointError, match="past end"):
        load_checkpoint(p)
    p.write_bytes(MAGIC + b'{"format_version":1')
    with pytest.raises(CheckpointError, match="truncated"):
        load_checkpoint(p)


def test_bad_version_and_magic(tmp_path):
    _, model = _model()
    data = checkpoint_bytes(model)
    p = tmp_path / "v.ckpt"
    p.write_bytes(data.replace(b'"format_version":1', b'"format_version":9', 1))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(p)
    p.write_bytes(b"XX" + data)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(p)


def test_shape_mismatch(tmp_path):
    _, model = _model()
    data = checkpoint_bytes(model)
    manifest, start = read_manifest(data)
    manifest["config"]["hidden"] += 1
    p = tmp_path / "s.ckpt"
    p.write_bytes(MAGIC + json.dumps(manifest).encode() + b"\n" + data[start:])
    with pytest.raises(CheckpointError):
        load_checkpoint(p)


def test_float32_round_trip(tmp_path):
    corpus, model = _model(precision=32)
    p = tmp_path / "f32.ckpt"
    save_checkpoint(model, p)
    loaded = load_checkpoint(p)
    assert read_manifest(p.read_bytes())[0]["dtype"] == "<f4"
    for inst in corpus.train:
        np.testing.assert_array_equal(model.score(inst), loaded.score(inst))


def test_no_temp_files_left(tmp_path):
    _, model = _model()
    save_checkpoint(model, tmp_path / "m.ckpt")
    save_checkpoint(model, tmp_path / "m.ckpt")
    assert [f.name for f in tmp_path.iterdir()] == ["m.ckpt"]


def test_resave_is_byte_identical(tmp_path):
    _, model = _model()
    save_checkpoint(model, tmp_path / "a.ckpt")
    save_checkpoint(load_checkpoint(tmp_path / "a.ckpt"), tmp_path / "b.ckpt")
    assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()


def test_untrainable_specials_round_trip(tmp_path):
    corpus = synthetic.toy_overfit_corpus()
    vocab, table = synthetic.table_from_vectors(corpus.vectors)
    table = EmbeddingTable(table.fixed, table.special, trainable=False)
    model = build_model(synthetic.tiny_config(11), vocab, table, corpus.train, corpus.profiles)
    save_checkpoint(model, tmp_path / "u.ckpt")
    loaded = load_checkpoint(tmp_path / "u.ckpt")
    assert not loaded.table.trainable
    np.testing.assert_array_equal(loaded.table.special.value, model.table.special.value)
    np.testing.assert_array_equal(model.score(corpus.train[0]), loaded.score(corpus.train[0]))
