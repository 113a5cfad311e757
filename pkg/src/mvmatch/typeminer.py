"""Mine tail-entity-type profiles per relation from offline KB dumps.

For each relation, sample at most ``cap`` triples, look up the types of the
(distinct) tail entities, and keep the types shared by at least
``threshold`` of them.  Relations without any surviving type get the
default type token.
"""
from __future__ import annotations

import math
import random
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .tokens import DEFAULT_TYPE, split_name

DEFAULT_CAP = 500
DEFAULT_THRESHOLD = 0.95


class TsvFormatError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {msg}")


class UnknownRelationError(KeyError):
    pass


class TripleStore:
    def __init__(self, triples: Iterable[tuple[str, str, str]] = (),
                 types: Iterable[tuple[str, str]] = ()):
        self._by_relation: dict[str, list[tuple[str, str]]] = defaultdict(list)
        self._types: dict[str, list[str]] = defaultdict(list)
        for s, r, o in triples:
            self.add_triple(s, r, o)
        for e, t in types:
            self.add_type(e, t)

    def add_triple(self, subject: str, relation: str, obj: str) -> None:
        self._by_relation[relation].append((subject, obj))

    def add_type(self, entity: str, type_: str) -> None:
        if type_ not in self._types[entity]:
            self._types[entity].append(type_)

    @classmethod
    def load(cls, triples_path: str | Path, types_path: str | Path) -> "TripleStore":
        store = cls()
        for line_no, cols in _read_tsv(triples_path, 3):
            store.add_triple(*cols)
        for line_no, cols in _read_tsv(types_path, 2):
            store.add_type(*cols)
        return store

    def dump(self, triples_path: str | Path, types_path: str | Path) -> None:
        with open(triples_path, "w", encoding="utf-8") as fh:
            for r in self.relations():
                for s, o in self._by_relation[r]:
                    fh.write(f"{s}\t{r}\t{o}\n")
        with open(types_path, "w", encoding="utf-8") as fh:
            for e, ts in self._types.items():
                for t in ts:
                    fh.write(f"{e}\t{t}\n")

    def relations(self) -> list[str]:
        return sorted(self._by_relation)

    def triples(self, relation: str) -> list[tuple[str, str]]:
        return list(self._by_relation.get(relation, ()))

    def objects(self, relation: str) -> list[str]:
        return [o for _, o in self._by_relation.get(relation, ())]

    def types_of(self, entity: str) -> list[str]:
        return list(self._types.get(entity, ()))

    def __contains__(self, relation: str) -> bool:
        return relation in self._by_relation

    def __len__(self) -> int:
        return sum(len(v) for v in self._by_relation.values())


def _read_tsv(path, n_cols):
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) != n_cols or not all(cols):
                raise TsvFormatError(path, line_no, f"expected {n_cols} non-empty tab-separated fields")
            yield line_no, cols


@dataclass(frozen=True)
class TypeProfile:
    relation: str
    types: tuple[str, ...]
    sample_size: int

    def __post_init__(self):
        if not self.types:
            object.__setattr__(self, "types", (DEFAULT_TYPE,))

    @property
    def is_default(self) -> bool:
        return self.types == (DEFAULT_TYPE,)


def _rng(seed: int, relation: str) -> random.Random:
    # per-relation stream so results do not depend on processing order
    return random.Random(f"{seed}:{relation}")


def sample_instances(store: TripleStore, relation: str, cap: int = DEFAULT_CAP,
                     seed: int = 0) -> list[str]:
    """Tail entities of at most ``cap`` triples of ``relation``.

    All of them (in file order) when the relation has no more than ``cap``
    triples, otherwise a seeded uniform sample without replacement, kept in
    file order.
    """
    if relation not in store:
        raise UnknownRelationError(relation)
    if cap < 1:
        raise ValueError(f"cap must be positive, got {cap}")
    objs = store.objects(relation)
    if len(objs) <= cap:
        return objs
    picked = sorted(_rng(seed, relation).sample(range(len(objs)), cap))
    return [objs[k] for k in picked]


def required_count(threshold: float, n: int) -> int:
    """ceil(threshold * n), immune to float noise such as 0.95 * 100."""
    return math.ceil(round(threshold * n, 9))


def extract_tail_types(store: TripleStore, relation: str,
                       threshold: float = DEFAULT_THRESHOLD, cap: int = DEFAULT_CAP,
                       seed: int = 0) -> TypeProfile:
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if relation not in store or not store.objects(relation):
        return TypeProfile(relation, (), 0)
    entities = list(dict.fromkeys(sample_instances(store, relation, cap, seed)))
    counts: dict[str, int] = defaultdict(int)
    for e in entities:
        for t in store.types_of(e):
            counts[t] += 1
    need = required_count(threshold, len(entities))
    kept = sorted(t for t, c in counts.items() if c >= need)
    return TypeProfile(relation, tuple(kept), len(entities))


def mine_profiles(store: TripleStore, threshold: float = DEFAULT_THRESHOLD,
                  cap: int = DEFAULT_CAP, seed: int = 0) -> list[TypeProfile]:
    return [extract_tail_types(store, r, threshold, cap, seed) for r in store.relations()]


def type_to_token_sequence(profile: TypeProfile) -> list[str]:
    if profile.is_default:
        return [DEFAULT_TYPE]
    out: list[str] = []
    for t in profile.types:
        out.extend(split_name(t))
    return out or [DEFAULT_TYPE]


def format_profiles(profiles: Iterable[TypeProfile]) -> str:
    return "".join(f"{p.relation}\t{'|'.join(p.types)}\n" for p in profiles)


def parse_profiles(path: str | Path) -> dict[str, TypeProfile]:
    out = {}
    for line_no, (rel, types) in _read_tsv(path, 2):
        out[rel] = TypeProfile(rel, tuple(t for t in types.split("|") if t), -1)
    return out


def profile_map(profiles: Iterable[TypeProfile] | Mapping[str, TypeProfile]) -> dict[str, TypeProfile]:
    if isinstance(profiles, Mapping):
        return dict(profiles)
    return {p.relation: p for p in profiles}
