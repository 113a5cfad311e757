"""Word + character-composed input embeddings."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .autodiff import Node, leaf, ops
from .encoder import LstmParams
from .params import ParamStore
from .tokens import ENTITY, PAD, SPECIAL_TOKENS, UNKNOWN

log = logging.getLogger(__name__)

PAD_ID = SPECIAL_TOKENS.index(PAD)
UNKNOWN_ID = SPECIAL_TOKENS.index(UNKNOWN)
ENTITY_ID = SPECIAL_TOKENS.index(ENTITY)


class EmbeddingFormatError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {msg}")


class Vocabulary:
    """Dense token ids; the special tokens occupy the first ids."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.tokens: list[str] = list(SPECIAL_TOKENS)
        self.index: dict[str, int] = {t: k for k, t in enumerate(self.tokens)}
        for t in tokens:
            self.add(t)

    @property
    def n_special(self) -> int:
        return len(SPECIAL_TOKENS)

    def add(self, token: str) -> int:
        if token not in self.index:
            self.index[token] = len(self.tokens)
            self.tokens.append(token)
        return self.index[token]

    def id(self, token: str) -> int:
        return self.index.get(token, UNKNOWN_ID)

    def ids(self, tokens: Sequence[str]) -> list[int]:
        return [self.index.get(t, UNKNOWN_ID) for t in tokens]

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index


@dataclass
class EmbeddingTable:
    """Frozen pretrained rows plus a trainable block for the special tokens."""

    fixed: np.ndarray
    special: np.ndarray | Node
    trainable: bool = True

    @property
    def dim(self) -> int:
        return self.fixed.shape[1]

    def bind(self, store: ParamStore, name: str = "embeddings.word.special") -> Node:
        """Register the special rows with ``store`` (as a constant when not trainable)."""
        self.fixed = np.asarray(self.fixed, dtype=store.dtype)
        if not isinstance(self.special, Node):
            if self.trainable:
                self.special = store.add(name, self.special)
            else:
                self.special = leaf(np.asarray(self.special, dtype=store.dtype), name=name)
        return self.special

    def lookup(self, ids) -> Node:
        special = self.special if isinstance(self.special, Node) else leaf(self.special)
        return ops.embedding_lookup(special, ids, fixed=self.fixed, pad_id=PAD_ID)


@dataclass
class LoadStats:
    loaded: int = 0
    skipped: int = 0
    skipped_lines: list[int] = field(default_factory=list)


def load_pretrained(path: str | Path, dim: int | None = None, strict: bool = False,
                    seed: int = 0, init_scale: float = 0.08,
                    ) -> tuple[Vocabulary, EmbeddingTable, LoadStats]:
    """Read a whitespace-separated ``token v1 ... vD`` file.

    ``dim`` defaults to the width of the first line.  Lines with the wrong
    number of values raise in strict mode and are skipped (and counted)
    otherwise; duplicate tokens and tokens that collide with the reserved
    specials are always skipped.
    """
    vocab = Vocabulary()
    rows: list[np.ndarray] = []
    stats = LoadStats()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            parts = line.rstrip().split(" ")
            if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                continue  # word2vec-style "count dim" header
            if not parts or not parts[0]:
                if line.strip():
                    _reject(path, line_no, "empty token", strict, stats)
                continue
            if dim is None:
                dim = len(parts) - 1
            if len(parts) - 1 != dim:
                _reject(path, line_no, f"expected {dim} values, found {len(parts) - 1}", strict, stats)
                continue
            token = parts[0]
            if token in vocab:
                _reject(path, line_no, f"duplicate or reserved token {token!r}", False, stats)
                continue
            try:
                vec = np.array(parts[1:], dtype=np.float64)
            except ValueError:
                _reject(path, line_no, "non-numeric value", strict, stats)
                continue
            vocab.add(token)
            rows.append(vec)
            stats.loaded += 1
    if dim is None:
        raise EmbeddingFormatError(path, 0, "no embedding rows found")
    fixed = np.vstack(rows) if rows else np.zeros((0, dim))
    if stats.skipped:
        log.warning("%s: skipped %d line(s)", path, stats.skipped)
    return vocab, EmbeddingTable(fixed, init_special_rows(fixed, seed, init_scale)), stats


def _reject(path, line_no, msg, strict, stats):
    if strict:
        raise EmbeddingFormatError(path, line_no, msg)
    stats.skipped += 1
    stats.skipped_lines.append(line_no)


def init_special_rows(fixed: np.ndarray, seed: int = 0, scale: float = 0.08) -> np.ndarray:
    """PAD is zero, UNKNOWN is the mean pretrained row, the rest small uniform."""
    dim = fixed.shape[1]
    rng = np.random.default_rng(seed)
    special = rng.uniform(-scale, scale, size=(len(SPECIAL_TOKENS), dim))
    special[PAD_ID] = 0.0
    special[UNKNOWN_ID] = fixed.mean(axis=0) if len(fixed) else 0.0
    return special


class CharVocabulary:
    """Character ids; id 0 is the unknown character."""

    def __init__(self, chars: Iterable[str] = ()):
        self.chars: list[str] = ["\0"]
        self.index: dict[str, int] = {}
        for ch in chars:
            self.add(ch)

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "CharVocabulary":
        seen = sorted({ch for w in words for ch in w})
        return cls(seen)

    def add(self, ch: str) -> int:
        if ch not in self.index:
            self.index[ch] = len(self.chars)
            self.chars.append(ch)
        return self.index[ch]

    def ids(self, word: str) -> list[int]:
        return [self.index.get(ch, 0) for ch in word]

    def __len__(self) -> int:
        return len(self.chars)


class CharEmbedder:
    """Final hidden state of a unidirectional LSTM over a word's characters."""

    def __init__(self, store: ParamStore, chars: CharVocabulary, char_dim: int = 20,
                 hidden: int = 50, prefix: str = "embeddings.char"):
        self.chars = chars
        self.table = store.uniform(f"{prefix}.table", (len(chars), char_dim))
        self.lstm = LstmParams.create(store, f"{prefix}.lstm", char_dim, hidden)

    @property
    def dim(self) -> int:
        return self.lstm.hidden

    def embed_words(self, words: Sequence[str]) -> Node:
        """(len(words), hidden); an empty string gives a zero row."""
        lengths = np.array([len(w) for w in words], dtype=np.int64)
        T = max(1, int(lengths.max(initial=0)))
        ids = np.zeros((len(words), T), dtype=np.int64)
        for k, w in enumerate(words):
            ids[k, :len(w)] = self.chars.ids(w)
        X = ops.getitem(self.table, ids)
        H = ops.lstm(X, *self.lstm.stacked(), lengths=lengths, reverse=False)
        last = np.maximum(lengths - 1, 0)
        # padded positions are never written, so H[k, 0] is zero for empty words
        return ops.getitem(H, (np.arange(len(words)), last))


class InputEmbedder:
    """Per-token vectors: [pretrained word vector ; char-LSTM vector]."""

    def __init__(self, vocab: Vocabulary, table: EmbeddingTable,
                 chars: CharEmbedder | None = None, use_char: bool = True):
        self.vocab = vocab
        self.table = table
        self.chars = chars
        self.use_char = use_char and chars is not None

    @property
    def dim(self) -> int:
        return self.table.dim + (self.chars.dim if self.use_char else 0)

    def embed_sequences(self, sequences: Sequence[Sequence[str]]) -> tuple[Node, np.ndarray]:
        """Zero-padded (B, T, dim) inputs plus the true lengths."""
        lengths = np.array([len(s) for s in sequences], dtype=np.int64)
        T = max(1, int(lengths.max(initial=0)))
        ids = np.full((len(sequences), T), PAD_ID, dtype=np.int64)
        for k, seq in enumerate(sequences):
            ids[k, :len(seq)] = self.vocab.ids(seq)
        words = self.table.lookup(ids)
        if not self.use_char:
            return words, lengths
        uniq: dict[str, int] = {}
        for seq in sequences:
            for t in seq:
                if t != PAD:
                    uniq.setdefault(t, len(uniq))
        word_list = list(uniq)
        char_rows = self.chars.embed_words(word_list) if word_list else None
        zero = leaf(np.zeros((1, self.chars.dim), dtype=self.table.fixed.dtype))
        pool = ops.concat([char_rows, zero], axis=0) if char_rows is not None else zero
        cidx = np.full((len(sequences), T), len(word_list), dtype=np.int64)
        for k, seq in enumerate(sequences):
            for j, t in enumerate(seq):
                if t != PAD:
                    cidx[k, j] = uniq[t]
        return ops.concat([words, ops.getitem(pool, cidx)], axis=2), lengths

    def embed_token(self, word: str) -> np.ndarray:
        X, _ = self.embed_sequences([[word]])
        return X.value[0, 0].copy()
