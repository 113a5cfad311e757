import json

import pytest

from mvmatch import kernels, synthetic
from mvmatch.cli import RunConfig, main
from mvmatch.data import dump_dataset


@pytest.fixture(autouse=True)
def _keep_backend():
    before = kernels.name
    yield
    kernels.set_backend(before)


@pytest.fixture
def workspace(tmp_path):
    corpus = synthetic.toy_overfit_corpus()
    synthetic.write_embeddings(tmp_path / "emb.txt", corpus.vectors)
    dump_dataset(corpus.train, tmp_path / "train.tsv")
    dump_dataset(corpus.train[:3], tmp_path / "test.tsv")
    synthetic.toy_kb().dump(tmp_path / "triples.tsv", tmp_path / "types.tsv")
    assert main(["extract-types", "--triples", str(tmp_path / "triples.tsv"),
                 "--types", str(tmp_path / "types.tsv"), "--out", str(tmp_path / "profiles.tsv")]) == 0
    return tmp_path


TINY_FLAGS = ["--hidden", "4", "--perspectives", "2", "--agg-hidden", "3", "--mlp-hidden", "4",
              "--char-dim", "3", "--char-hidden", "2"]


def _train(ws, out="model.ckpt", extra=()):
    return main(["train", "--train", str(ws / "train.tsv"), "--embeddings", str(ws / "emb.txt"),
                 "--profiles", str(ws / "profiles.tsv"), "--out", str(ws / out),
                 "--epochs", "1", "--lr", "1e-3", *TINY_FLAGS, *extra])


def test_extract_types_three_relations(tmp_path, capsys):
    (tmp_path / "tr.tsv").write_text("a\tr.one\tx\nb\tr.two\ty\nc\tr.three\tz\n")
    (tmp_path / "ty.tsv").write_text("x\tt.loc\ny\tt.per\n")
    out = tmp_path / "p.tsv"
    assert main(["extract-types", "--triples", str(tmp_path / "tr.tsv"), "--types",
                 str(tmp_path / "ty.tsv"), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines == ["r.one\tt.loc", "r.three\t__default_type__", "r.two\tt.per"]
    assert "relations\t3" in capsys.readouterr().out


def test_extract_types_missing_file(tmp_path):
    (tmp_path / "tr.tsv").write_text("a\tr\tx\n")
    assert main(["extract-types", "--triples", str(tmp_path / "tr.tsv"), "--types",
                 str(tmp_path / "none.tsv"), "--out", str(tmp_path / "p.tsv")]) == 2
    assert not (tmp_path / "p.tsv").exists()


def test_run_config_defaults():
    rc = RunConfig()
    assert (rc.lr, rc.epochs, rc.hidden, rc.perspectives) == (1e-4, 30, 300, 20)
    assert rc.model_config().views.use_entity_pair


def test_train_is_deterministic(workspace, capsys):
    assert _train(workspace, "a.ckpt") == 0
    assert _train(workspace, "b.ckpt") == 0
    assert (workspace / "a.ckpt").read_bytes() == (workspace / "b.ckpt").read_bytes()
    assert "final_loss" in capsys.readouterr().out


def test_train_missing_embeddings(workspace):
    (workspace / "emb.txt").unlink()
    assert _train(workspace) == 2


def test_config_file_unknown_key(workspace, capsys):
    cfg = workspace / "run.cfg"
    cfg.write_text("lr = 0.01\nlearning_rate = 3\n")
    assert _train(workspace, extra=["--config", str(cfg)]) == 2
    assert "learning_rate" in capsys.readouterr().err


def test_flags_override_config_file(workspace):
    cfg = workspace / "run.cfg"
    cfg.write_text("epochs = 7\nhidden = 5\nmetrics_json = " + str(workspace / "m.json") + "\n")
    assert _train(workspace, extra=["--config", str(cfg)]) == 0
    metrics = json.loads((workspace / "m.json").read_text())
    assert metrics["epochs"] == 1                 # flag beats file
    from mvmatch.checkpoint import load_checkpoint
    assert load_checkpoint(workspace / "model.ckpt").config.hidden == 4


def test_eval_prints_accuracy(workspace, capsys):
    assert _train(workspace) == 0
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(workspace / "model.ckpt"),
                 "--data", str(workspace / "test.tsv")]) == 0
    out = capsys.readouterr().out.strip().splitlines()
    assert len(out) == 1 and out[0].startswith("accuracy\t")
    assert 0.0 <= float(out[0].split("\t")[1]) <= 1.0


def test_eval_bad_magic(workspace):
    (workspace / "bad.ckpt").write_bytes(b"not a checkpoint")
    assert main(["eval", "--checkpoint", str(workspace / "bad.ckpt"),
                 "--data", str(workspace / "test.tsv")]) == 2


def test_eval_empty_dataset(workspace):
    assert _train(workspace) == 0
    (workspace / "empty.tsv").write_text("")
    assert main(["eval", "--checkpoint", str(workspace / "model.ckpt"),
                 "--data", str(workspace / "empty.tsv")]) == 2


def test_predict_top_k(workspace):
    assert _train(workspace) == 0
    out = workspace / "pred.tsv"
    assert main(["predict", "--checkpoint", str(workspace / "model.ckpt"),
                 "--data", str(workspace / "test.tsv"), "--top-k", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    for line in lines:
        cols = line.split("\t")
        assert len(cols) == 3
        scores = [float(c.rsplit(":", 1)[1]) for c in cols[1:]]
        assert scores[0] >= scores[1]


def test_usage_errors():
    assert main([]) == 2
    assert main(["train", "--bogus"]) == 2
    assert main(["--help"]) == 0


def test_gradcheck_passes(capsys):
    assert main(["--backend", "numpy", "gradcheck", "--max-entries", "6"]) == 0
    assert "failed\t0" in capsys.readouterr().out


def test_gradcheck_corrupt_hook_fails():
    assert main(["gradcheck", "--max-entries", "3", "--corrupt-gradient"]) == 1


def test_gradcheck_tiny_tolerance_fails():
    assert main(["gradcheck", "--max-entries", "6", "--tolerance", "1e-14"]) == 1
