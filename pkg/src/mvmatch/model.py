"""Multi-view relation scorer: views -> shared BiLSTM -> BiMPM -> aggregation -> MLP."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .autodiff import Node, leaf, ops
from .config import ModelConfig, ViewConfig
from .embeddings import CharEmbedder, CharVocabulary, EmbeddingTable, InputEmbedder, Vocabulary
from .encoder import BiLSTM, ContextualEncoding
from .matcher import PerspectiveWeights, bimpm_match
from .params import ParamStore
from .tokens import DEFAULT_TYPE, ENTITY, SEP, last_hop, relation_tokens
from .typeminer import TypeProfile, type_to_token_sequence

DEFAULT_MARGIN = 0.5


@dataclass
class QuestionInstance:
    tokens: list[str]
    mention: tuple[int, int]          # token span, end exclusive
    alias: list[str]
    gold: str
    candidates: list[str]

    def __post_init__(self):
        self.mention = (int(self.mention[0]), int(self.mention[1]))

    @property
    def mention_tokens(self) -> list[str]:
        s, e = self.mention
        return self.tokens[s:e]


@dataclass
class RelationCandidate:
    relation: str
    name_tokens: list[str]
    type_tokens: list[str]
    score: float = float("nan")


@dataclass
class Views:
    """Matched (anchor, target) token pairs plus the optional entity pair."""

    pairs: list[tuple[tuple[str, ...], tuple[str, ...]]]
    entity_pair: tuple[tuple[str, ...], tuple[str, ...]] | None = None


class SpanError(ValueError):
    pass


def abstract_question(tokens: Sequence[str], mention: tuple[int, int]) -> list[str]:
    """Replace the mention span by a single entity placeholder."""
    s, e = mention
    if not 0 <= s < e <= len(tokens):
        raise SpanError(f"mention span {s}:{e} invalid for {len(tokens)} tokens")
    return list(tokens[:s]) + [ENTITY] + list(tokens[e:])


def question_view(instance: QuestionInstance, views: ViewConfig) -> list[str]:
    if views.abstract_question:
        return abstract_question(instance.tokens, instance.mention)
    s, e = instance.mention
    if not 0 <= s < e <= len(instance.tokens):
        raise SpanError(f"mention span {s}:{e} invalid for {len(instance.tokens)} tokens")
    return list(instance.tokens)


def build_views(instance: QuestionInstance, candidate: RelationCandidate,
                views: ViewConfig) -> Views:
    q = tuple(question_view(instance, views))
    name = tuple(candidate.name_tokens)
    types = tuple(candidate.type_tokens) or (DEFAULT_TYPE,)
    if views.concat_relation_and_type:
        pairs = [(q, name + (SEP,) + types)]
    else:
        pairs = [(q, name)]
        if views.use_type_view:
            pairs.append((q, types))
    ep = None
    if views.use_entity_pair:
        ep = (tuple(instance.alias), tuple(instance.mention_tokens))
    return Views(pairs, ep)


def aggregate_sequences(match_seqs: Sequence[Node], aggregator: BiLSTM) -> Node:
    """Run the aggregation BiLSTM over each match sequence independently.

    Returns (S, 2 * d_agg): [forward state at the last step ; backward state
    at the first position] for each sequence.
    """
    if not match_seqs or any(m.value.shape[0] == 0 for m in match_seqs):
        raise ValueError("aggregation needs non-empty match sequences")
    lengths = np.array([m.value.shape[0] for m in match_seqs], dtype=np.int64)
    X = ops.pad_stack(list(match_seqs))
    Hf, Hb = aggregator.run(X, lengths)
    rows = np.arange(len(match_seqs))
    return ops.concat([ops.getitem(Hf, (rows, lengths - 1)), Hb[:, 0]], axis=1)


def aggregate_view(match_fwd: Node, match_rev: Node, aggregator: BiLSTM) -> Node:
    """Fixed-length (4 * d_agg) summary of one view's two match sequences."""
    out = aggregate_sequences([match_fwd, match_rev], aggregator)
    return ops.reshape(out, (-1,))


def pair_features(alias_vec: Node, mention_vec: Node) -> Node:
    """[a ; m ; a*m ; |a - m|]."""
    return ops.concat([alias_vec, mention_vec, alias_vec * mention_vec,
                       ops.absolute(alias_vec - mention_vec)], axis=0)


def ranking_loss(score_gold, scores_negative, margin: float = DEFAULT_MARGIN) -> Node:
    """Hinge against the hardest negative: max(0, margin - gold + max(neg))."""
    gold = score_gold if isinstance(score_gold, Node) else leaf(score_gold)
    neg = scores_negative if isinstance(scores_negative, Node) else leaf(scores_negative)
    if neg.value.size == 0:
        raise ValueError("ranking_loss needs at least one negative score")
    hardest = ops.reduce_max(ops.reshape(neg, (-1,)))
    return ops.relu(ops.add(hardest - ops.reshape(gold, ()), margin))


def rank_order(relations: Sequence[str], scores: Sequence[float]) -> list[int]:
    """Indices by descending score; equal scores fall back to relation id."""
    return sorted(range(len(relations)), key=lambda k: (-float(scores[k]), relations[k]))


class MLP:
    def __init__(self, store: ParamStore, in_dim: int, hidden: int, prefix: str = "mlp"):
        self.W1 = store.uniform(f"{prefix}.W1", (in_dim, hidden))
        self.b1 = store.zeros(f"{prefix}.b1", (hidden,))
        self.W2 = store.uniform(f"{prefix}.W2", (hidden, 1))
        self.b2 = store.zeros(f"{prefix}.b2", (1,))

    def __call__(self, features: Node) -> Node:
        h = ops.tanh(features @ self.W1 + self.b1)
        out = h @ self.W2 + self.b2
        return ops.reshape(out, (features.value.shape[0],))


@dataclass
class _GraphCache:
    encodings: dict[tuple[str, ...], ContextualEncoding] = field(default_factory=dict)


class MultiViewMatcher:
    """Scores candidate relations for a question.

    All views share one input embedder, one encoder, one set of perspective
    weights and one aggregation BiLSTM.
    """

    def __init__(self, config: ModelConfig, vocab: Vocabulary, table: EmbeddingTable,
                 chars: CharVocabulary | None = None,
                 profiles: Mapping[str, TypeProfile] | None = None):
        self.config = config
        views = config.views
        self.store = ParamStore(seed=config.seed, dtype=config.dtype, init_scale=config.init_scale)
        self.vocab = vocab
        self.table = table
        table.bind(self.store)
        self.chars = chars if chars is not None else CharVocabulary()
        char_embedder = None
        if views.use_char:
            char_embedder = CharEmbedder(self.store, self.chars, config.char_dim, config.char_hidden)
        self.embedder = InputEmbedder(vocab, table, char_embedder, views.use_char)
        self.encoder = BiLSTM(self.store, "encoder", self.embedder.dim, config.hidden)
        self.matcher = PerspectiveWeights.create(self.store, config.hidden, config.perspectives)
        self.aggregator = BiLSTM(self.store, "aggregator", 8 * config.perspectives, config.agg_hidden)
        self.mlp = MLP(self.store, self.feature_dim, config.mlp_hidden)
        self.profiles: dict[str, TypeProfile] = dict(profiles or {})

    @property
    def feature_dim(self) -> int:
        v = self.config.views
        width = v.n_matched_views * 4 * self.config.agg_hidden
        if v.use_entity_pair:
            width += 8 * self.config.hidden
        return width

    @property
    def params(self) -> dict[str, Node]:
        return self.store.as_dict()

    def candidate(self, relation: str) -> RelationCandidate:
        profile = self.profiles.get(last_hop(relation))
        types = type_to_token_sequence(profile) if profile else [DEFAULT_TYPE]
        return RelationCandidate(relation, relation_tokens(relation), types)

    def views(self, instance: QuestionInstance, relation: str) -> Views:
        return build_views(instance, self.candidate(relation), self.config.views)

    def encode(self, sequences: Sequence[Sequence[str]]) -> list[ContextualEncoding]:
        X, lengths = self.embedder.embed_sequences(sequences)
        return self.encoder.encode_batch(X, lengths)

    def entity_pair_features(self, alias: Sequence[str], mention: Sequence[str]) -> Node:
        if not alias or not mention:
            raise ValueError("entity pair needs a non-empty alias and mention")
        a, m = self.encode([alias, mention])
        return pair_features(a.last_step(), m.last_step())

    def score_graph(self, instance: QuestionInstance, relations: Sequence[str] | None = None) -> Node:
        """Scores for ``relations`` (default: the instance's candidates) as one (C,) node."""
        relations = list(instance.candidates if relations is None else relations)
        if not relations:
            raise ValueError("no candidate relations to score")
        views = [self.views(instance, r) for r in relations]

        seq_index: dict[tuple[str, ...], int] = {}
        for v in views:
            for a, t in v.pairs:
                seq_index.setdefault(a, len(seq_index))
                seq_index.setdefault(t, len(seq_index))
        ep = views[0].entity_pair
        if ep is not None:
            if not ep[0] or not ep[1]:
                raise ValueError("entity pair needs a non-empty alias and mention")
            for s in ep:
                seq_index.setdefault(s, len(seq_index))
        seqs = list(seq_index)
        enc = self.encode(seqs)

        pair_slot: dict[tuple[int, int], int] = {}
        match_seqs: list[Node] = []
        cand_slots = []
        for v in views:
            slots = []
            for a, t in v.pairs:
                key = (seq_index[a], seq_index[t])
                if key not in pair_slot:
                    pair_slot[key] = len(match_seqs) // 2
                    match_seqs.extend(bimpm_match(enc[key[0]], enc[key[1]], self.matcher))
                slots.append(pair_slot[key])
            cand_slots.append(slots)

        summaries = aggregate_sequences(match_seqs, self.aggregator)      # (S, 2 d_agg)
        P = len(match_seqs) // 2
        per_pair = ops.reshape(summaries, (P, 4 * self.config.agg_hidden))
        C = len(relations)
        idx = np.array(cand_slots, dtype=np.int64)                        # (C, V)
        feats = ops.reshape(ops.getitem(per_pair, idx), (C, idx.shape[1] * 4 * self.config.agg_hidden))
        if ep is not None:
            a, m = enc[seq_index[ep[0]]], enc[seq_index[ep[1]]]
            pf = pair_features(a.last_step(), m.last_step())
            tiled = ops.getitem(ops.reshape(pf, (1, -1)), np.zeros(C, dtype=np.int64))
            feats = ops.concat([feats, tiled], axis=1)
        return self.mlp(feats)

    def score(self, instance: QuestionInstance, relations: Sequence[str] | None = None) -> np.ndarray:
        return self.score_graph(instance, relations).value.copy()

    def score_candidate(self, instance: QuestionInstance, relation: str) -> float:
        return float(self.score(instance, [relation])[0])

    def loss_graph(self, instance: QuestionInstance, margin: float = DEFAULT_MARGIN) -> Node:
        """Ranking loss with every non-gold candidate as a negative."""
        relations = list(instance.candidates)
        if instance.gold not in relations:
            raise ValueError(f"gold relation {instance.gold!r} not among the candidates")
        negatives = [k for k, r in enumerate(relations) if r != instance.gold]
        if not negatives:
            raise ValueError("instance has no negative candidates")
        scores = self.score_graph(instance, relations)
        gold = scores[relations.index(instance.gold)]
        return ranking_loss(gold, ops.getitem(scores, np.array(negatives)), margin)

    def rank_candidates(self, instance: QuestionInstance,
                        relations: Sequence[str] | None = None) -> list[RelationCandidate]:
        relations = list(instance.candidates if relations is None else relations)
        scores = self.score(instance, relations)
        out = []
        for k in rank_order(relations, scores):
            cand = self.candidate(relations[k])
            cand.score = float(scores[k])
            out.append(cand)
        return out


def rank_candidates(instance: QuestionInstance, model: MultiViewMatcher) -> list[RelationCandidate]:
    return model.rank_candidates(instance)


def score_candidate(instance: QuestionInstance, relation: str, model: MultiViewMatcher) -> float:
    return model.score_candidate(instance, relation)


def corpus_words(instances: Sequence[QuestionInstance],
                 profiles: Mapping[str, TypeProfile] | None = None) -> list[str]:
    """Every token the model can see for these instances (for the character vocabulary)."""
    words: set[str] = set()
    for inst in instances:
        words.update(inst.tokens)
        words.update(inst.alias)
        for r in inst.candidates:
            words.update(relation_tokens(r))
    for p in (profiles or {}).values():
        words.update(type_to_token_sequence(p))
    return sorted(words)


def build_model(config: ModelConfig, vocab: Vocabulary, table: EmbeddingTable,
                instances: Sequence[QuestionInstance],
                profiles: Mapping[str, TypeProfile] | None = None) -> MultiViewMatcher:
    chars = CharVocabulary.from_words(corpus_words(instances, profiles))
    return MultiViewMatcher(config, vocab, table, chars, profiles)
