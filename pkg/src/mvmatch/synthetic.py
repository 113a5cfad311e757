"""Small synthetic corpora and embeddings for tests, gradient checks and demos."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ModelConfig, ViewConfig
from .embeddings import EmbeddingTable, Vocabulary, init_special_rows
from .model import MultiViewMatcher, QuestionInstance, build_model
from .typeminer import TripleStore, TypeProfile, mine_profiles

TINY = dict(hidden=8, perspectives=2, agg_hidden=4, mlp_hidden=6, char_dim=4, char_hidden=3)


def random_vectors(words: Iterable[str], dim: int, seed: int = 0,
                   centroids: dict[str, np.ndarray] | None = None, noise: float = 0.3
                   ) -> dict[str, np.ndarray]:
    """Seeded vectors; words listed in ``centroids`` sit near their centroid."""
    rng = np.random.default_rng(seed)
    out = {}
    for w in sorted(set(words)):
        v = rng.normal(size=dim)
        if centroids and w in centroids:
            v = centroids[w] + noise * v
        out[w] = np.round(v, 6)
    return out


def write_embeddings(path: str | Path, vectors: dict[str, np.ndarray]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for w, v in vectors.items():
            fh.write(w + " " + " ".join(f"{x:.6f}" for x in v) + "\n")


def table_from_vectors(vectors: dict[str, np.ndarray], seed: int = 0) -> tuple[Vocabulary, EmbeddingTable]:
    vocab = Vocabulary(vectors)
    fixed = np.vstack([vectors[w] for w in vectors]) if vectors else np.zeros((0, 1))
    return vocab, EmbeddingTable(fixed, init_special_rows(fixed, seed))


@dataclass
class Corpus:
    train: list[QuestionInstance]
    dev: list[QuestionInstance]
    profiles: dict[str, TypeProfile]
    vectors: dict[str, np.ndarray]

    def words(self) -> set[str]:
        return set(self.vectors)

    def model(self, config: ModelConfig) -> MultiViewMatcher:
        vocab, table = table_from_vectors(self.vectors, config.seed)
        return build_model(config, vocab, table, self.train + self.dev, self.profiles)


# -- toy KB with the running example ---------------------------------------

TOY_RELATIONS = {
    "location.location.contains": "location",
    "book.written_work.author": "person",
    "people.person.date_of_birth": "date",
    "location.statistical_region.population": "number",
}

_TOY_QUESTIONS = [
    ("what country is located in the balkan peninsula", (6, 8), "balkan peninsula",
     "location.location.contains"),
    ("which city is located in france", (5, 6), "france", "location.location.contains"),
    ("who wrote the audacity of hope", (2, 6), "the audacity of hope", "book.written_work.author"),
    ("who is the author of dune", (5, 6), "dune", "book.written_work.author"),
    ("when was barack obama born", (2, 4), "barack obama", "people.person.date_of_birth"),
    ("what is the birth date of marie curie", (6, 8), "marie curie", "people.person.date_of_birth"),
    ("how many people live in paris", (5, 6), "paris", "location.statistical_region.population"),
    ("what is the population of tokyo", (5, 6), "tokyo", "location.statistical_region.population"),
]


def toy_kb(extra_per_relation: int = 20, seed: int = 0) -> TripleStore:
    """Triples and types for the toy relations plus location.adjoins (``adjoin_s``).

    Every tail of a relation carries the relation's type; half of them also
    carry a distractor type so the 95% rule has something to prune.
    """
    rng = np.random.default_rng(seed)
    store = TripleStore()
    rels = dict(TOY_RELATIONS)
    rels["location.location.adjoin_s"] = "location"
    for rel, typ in rels.items():
        for k in range(extra_per_relation):
            obj = f"m.{rel.split('.')[-1]}_{k}"
            store.add_triple(f"m.subj_{rng.integers(1000)}", rel, obj)
            store.add_type(obj, typ)
            if k % 2 == 0:
                store.add_type(obj, "common.topic_" + typ)
    return store


def toy_overfit_corpus(dim: int = 6, seed: int = 0) -> Corpus:
    """Eight questions over four relations whose tail types tell them apart."""
    from .tokens import relation_tokens, split_name, tokenize_question
    profiles = {p.relation: p for p in mine_profiles(toy_kb(seed=seed))}
    cands = list(TOY_RELATIONS)
    train = []
    for q, span, alias, gold in _TOY_QUESTIONS:
        train.append(QuestionInstance(tokenize_question(q), span, tokenize_question(alias), gold, cands))
    words = set()
    for inst in train:
        words.update(inst.tokens)
        words.update(inst.alias)
    for r in list(cands) + ["location.location.adjoin_s"]:
        words.update(relation_tokens(r))
    for p in profiles.values():
        for t in p.types:
            words.update(split_name(t))
    return Corpus(train, [], profiles, random_vectors(words, dim, seed))


# -- typed ablation corpus -------------------------------------------------

TYPE_CUES = {
    "location": ["where", "located", "place", "region"],
    "person": ["who", "whom", "someone", "somebody"],
    "date": ["when", "year", "time", "day"],
    "number": ["many", "much", "count", "amount"],
    "organization": ["company", "team", "group", "agency"],
    "language": ["language", "tongue", "spoken", "dialect"],
}
FILLER = ["what", "is", "the", "of", "a", "in", "did", "does", "was", "for", "to", "by"]


def typed_corpus(n_train: int = 150, n_dev: int = 50, k: int = 4, dim: int = 8,
                 train_relations: int = 30, dev_relations: int = 18, seed: int = 0) -> Corpus:
    """Corpus where only the tail type links a question to its gold relation.

    Questions contain a cue word for the gold relation's type.  Relation
    names are random word pairs and the dev relations never occur in
    training, so relation names alone cannot generalise.
    """
    rng = np.random.default_rng(seed)
    types = list(TYPE_CUES)
    if k > len(types):
        raise ValueError("k cannot exceed the number of types")
    name_words = [f"nw{j}" for j in range(40)]
    entity_words = [f"ent{j}" for j in range(60)]

    def relations(n, tag):
        out = {}
        for j in range(n):
            a, b = rng.choice(len(name_words), size=2, replace=False)
            out[f"{tag}{j}.{name_words[a]}_{name_words[b]}"] = types[j % len(types)]
        return out

    train_rel = relations(train_relations, "kb")
    dev_rel = relations(dev_relations, "kbx")
    profiles = {r: TypeProfile(r, (t,), 1) for r, t in {**train_rel, **dev_rel}.items()}

    def sample(n, rels):
        by_type: dict[str, list[str]] = {}
        for r, t in rels.items():
            by_type.setdefault(t, []).append(r)
        out = []
        for _ in range(n):
            chosen = rng.choice(types, size=k, replace=False)
            picks = [by_type[t][rng.integers(len(by_type[t]))] for t in chosen]
            gold_type = chosen[0]
            cue = TYPE_CUES[gold_type][rng.integers(4)]
            left = list(rng.choice(FILLER, size=rng.integers(1, 3)))
            mid = list(rng.choice(FILLER, size=rng.integers(1, 3)))
            mention = list(rng.choice(entity_words, size=rng.integers(1, 3), replace=False))
            tokens = left + [cue] + mid + mention
            s = len(left) + 1 + len(mid)
            cands = [picks[j] for j in rng.permutation(k)]
            out.append(QuestionInstance(tokens, (s, s + len(mention)), list(mention), picks[0], cands))
        return out

    train = sample(n_train, train_rel)
    dev = sample(n_dev, dev_rel)
    centroids_by_type = {t: rng.normal(size=dim) * 1.5 for t in types}
    centroids = {}
    for t, cues in TYPE_CUES.items():
        centroids[t] = centroids_by_type[t]
        for c in cues:
            centroids[c] = centroids_by_type[t]
    words = set(name_words) | set(entity_words) | set(FILLER) | set(centroids)
    words |= {r.split(".")[0] for r in profiles}
    return Corpus(train, dev, profiles, random_vectors(words, dim, seed + 1, centroids))


def uniform_corpus(n: int = 500, k: int = 5, n_relations: int = 40, dim: int = 6,
                   seed: int = 0) -> Corpus:
    """Questions whose gold label is drawn uniformly from k random candidates."""
    rng = np.random.default_rng(seed)
    words = [f"w{j}" for j in range(50)]
    rels = [f"d{j % 7}.rel{j}_{words[j % 50]}" for j in range(n_relations)]
    profiles = {r: TypeProfile(r, (f"t{j % 5}",), 1) for j, r in enumerate(rels)}
    out = []
    for _ in range(n):
        L = int(rng.integers(3, 7))
        tokens = [words[j] for j in rng.integers(len(words), size=L)]
        s = int(rng.integers(L))
        cands = [rels[j] for j in rng.choice(n_relations, size=k, replace=False)]
        gold = cands[int(rng.integers(k))]
        out.append(QuestionInstance(tokens, (s, s + 1), [tokens[s]], gold, cands))
    vocab_words = set(words) | {f"t{j}" for j in range(5)} | {f"d{j}" for j in range(7)}
    return Corpus(out, [], profiles, random_vectors(vocab_words, dim, seed))


def tiny_config(views: ViewConfig | int = 11, seed: int = 0, **overrides) -> ModelConfig:
    if isinstance(views, int):
        views = ViewConfig.from_table_row(views)
    return ModelConfig(**{**TINY, **overrides}, seed=seed, views=views)


def gradcheck_corpus(seed: int = 0, dim: int = 6) -> Corpus:
    """One short question (5 tokens) with two candidates, for finite-difference checks."""
    inst = QuestionInstance(["who", "wrote", "the", "hobbit", "novel"], (3, 4), ["hobbit"],
                            "book.written_work.author", ["book.written_work.author",
                                                          "location.location.contains"])
    profiles = {"book.written_work.author": TypeProfile("book.written_work.author", ("person",), 1),
                "location.location.contains": TypeProfile("location.location.contains",
                                                          ("location",), 1)}
    words = set(inst.tokens) | {"book", "written", "work", "author", "location", "contains", "person"}
    return Corpus([inst], [], profiles, random_vectors(words, dim, seed))
