import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvmatch.autodiff import backward, leaf, make_optimizer, ops
from mvmatch.embeddings import (ENTITY_ID, PAD_ID, UNKNOWN_ID, CharEmbedder, CharVocabulary,
                                EmbeddingFormatError, EmbeddingTable, InputEmbedder, Vocabulary,
                                load_pretrained)
from mvmatch.encoder import lstm_step
from mvmatch.params import ParamStore
from mvmatch.tokens import DEFAULT_TYPE, ENTITY, PAD, SPECIAL_TOKENS, UNKNOWN


def _write(tmp_path, text, name="emb.txt"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_single_row(tmp_path):
    vocab, table, stats = load_pretrained(_write(tmp_path, "dog 0.1 0.2\n"), dim=2)
    k = vocab.id("dog") - vocab.n_special
    np.testing.assert_array_equal(table.fixed[k], [0.1, 0.2])
    assert stats.loaded == 1 and stats.skipped == 0


def test_load_300_dim_rows(tmp_path):
    rng = np.random.default_rng(0)
    lines = "".join(f"w{k} " + " ".join(f"{x:.4f}" for x in rng.normal(size=300)) + "\n"
                    for k in range(3))
    _, table, _ = load_pretrained(_write(tmp_path, lines), dim=300)
    assert table.fixed.shape == (3, 300)


def test_malformed_line_strict_raises_with_line_number(tmp_path):
    p = _write(tmp_path, "dog 0.1 0.2\ncat 0.1\n")
    with pytest.raises(EmbeddingFormatError) as exc:
        load_pretrained(p, dim=2, strict=True)
    assert exc.value.line_no == 2 and ":2:" in str(exc.value)


def test_malformed_line_lenient_skips_and_counts(tmp_path):
    vocab, table, stats = load_pretrained(_write(tmp_path, "dog 0.1 0.2\ncat 0.1\n"), dim=2)
    assert stats.skipped == 1 and stats.skipped_lines == [2]
    assert "cat" not in vocab and vocab.id("cat") == UNKNOWN_ID


def test_word2vec_header_and_duplicates(tmp_path):
    vocab, table, stats = load_pretrained(_write(tmp_path, "2 2\na 1 2\na 3 4\n<e> 5 6\n"))
    assert table.fixed.shape == (1, 2) and stats.skipped == 2


def test_empty_file(tmp_path):
    with pytest.raises(EmbeddingFormatError):
        load_pretrained(_write(tmp_path, ""))


def test_vocabulary_special_ids():
    v = Vocabulary(["dog", "cat", "dog"])
    assert v.tokens[:len(SPECIAL_TOKENS)] == list(SPECIAL_TOKENS)
    assert v.id(PAD) == PAD_ID == 0 and v.id(ENTITY) == ENTITY_ID and v.id(UNKNOWN) == UNKNOWN_ID
    assert len({v.id(t) for t in SPECIAL_TOKENS}) == len(SPECIAL_TOKENS)
    assert sorted(v.index.values()) == list(range(len(v)))
    assert v.id("never-seen") == UNKNOWN_ID and DEFAULT_TYPE in v


def _embedder(tmp_path, use_char=True, words="dog cat a"):
    text = "dog 0.1 0.2 0.3\ncat -0.2 0.4 0.0\na 0.5 0.5 0.5\n"
    vocab, table, _ = load_pretrained(_write(tmp_path, text))
    store = ParamStore(seed=0)
    table.bind(store)
    chars = CharVocabulary.from_words(words.split())
    ce = CharEmbedder(store, chars, char_dim=4, hidden=5)
    return InputEmbedder(vocab, table, ce, use_char), store


def test_unknown_row_is_mean(tmp_path):
    emb, _ = _embedder(tmp_path, use_char=False)
    np.testing.assert_allclose(emb.embed_token("zebra"),
                               np.mean([[0.1, 0.2, 0.3], [-0.2, 0.4, 0.0], [0.5, 0.5, 0.5]], axis=0))


def test_pad_maps_to_zero(tmp_path):
    emb, _ = _embedder(tmp_path)
    assert not emb.embed_token(PAD).any()


def test_use_char_off_length(tmp_path):
    emb, _ = _embedder(tmp_path, use_char=False)
    assert emb.embed_token("dog").shape == (3,)


def test_single_char_word_is_one_lstm_step(tmp_path):
    emb, _ = _embedder(tmp_path)
    ce = emb.chars
    x = leaf(ce.table.value[ce.chars.ids("a")[0]])
    zero = leaf(np.zeros(ce.dim))
    h, _ = lstm_step(x, zero, zero, ce.lstm)
    vec = emb.embed_token("a")
    np.testing.assert_allclose(vec[3:], h.value, rtol=0, atol=1e-15)
    np.testing.assert_array_equal(vec[:3], [0.5, 0.5, 0.5])


def test_padding_positions_are_zero(tmp_path):
    emb, _ = _embedder(tmp_path)
    X, lengths = emb.embed_sequences([["dog", "cat", "a"], ["cat"]])
    assert X.value.shape == (2, 3, 8) and list(lengths) == [3, 1]
    assert not X.value[1, 1:].any()


@settings(max_examples=60, deadline=None)
@given(st.text(min_size=0, max_size=12))
def test_embed_token_total_deterministic_constant_length(tmp_path_factory, word):
    emb, _ = _embedder(tmp_path_factory.mktemp("e"))
    a, b = emb.embed_token(word), emb.embed_token(word)
    assert a.shape == (8,) and np.array_equal(a, b) and np.all(np.isfinite(a))


def test_fixed_rows_unchanged_by_training_step(tmp_path):
    emb, store = _embedder(tmp_path)
    fixed_before = emb.table.fixed.copy()
    special_before = emb.table.special.value.copy()
    X, _ = emb.embed_sequences([["dog", "zebra", "cat"]])
    loss = ops.reduce_sum(ops.tanh(X) * leaf(np.random.default_rng(0).normal(size=X.value.shape)))
    params = store.as_dict()
    grads = backward(loss, params.values())
    make_optimizer("sgd", params, 0.5).step({k: grads[v] for k, v in params.items()})
    assert np.array_equal(emb.table.fixed, fixed_before)
    # the unknown row is trainable and moved; PAD never does
    assert not np.array_equal(emb.table.special.value[UNKNOWN_ID], special_before[UNKNOWN_ID])
    assert not emb.table.special.value[PAD_ID].any()


def test_untrainable_special_rows_are_constant(tmp_path):
    text = "dog 0.1 0.2\n"
    vocab, table, _ = load_pretrained(_write(tmp_path, text))
    table = EmbeddingTable(table.fixed, table.special, trainable=False)
    store = ParamStore()
    table.bind(store)
    assert "embeddings.word.special" not in store


def test_char_vocabulary_unknown_char():
    cv = CharVocabulary.from_words(["ab"])
    assert cv.ids("abz") == [1, 2, 0]
