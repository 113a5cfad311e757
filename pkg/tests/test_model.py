import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from mvmatch import synthetic
from mvmatch.autodiff import leaf
from mvmatch.config import TrainConfig, ViewConfig
from mvmatch.encoder import BiLSTM
from mvmatch.model import (QuestionInstance, RelationCandidate, SpanError, abstract_question,
                           aggregate_view, build_views, rank_candidates, rank_order, ranking_loss)
from mvmatch.params import ParamStore
from mvmatch.tokens import DEFAULT_TYPE, ENTITY, SEP
from mvmatch.training import TrainingError, train

BALKAN = "what country is located in the balkan peninsula".split()


def test_abstract_question_balkan():
    assert abstract_question(BALKAN, (6, 8)) == ["what", "country", "is", "located", "in", "the", ENTITY]


def test_abstract_whole_question():
    assert abstract_question(["obama"], (0, 1)) == [ENTITY]


@pytest.mark.parametrize("span", [(3, 3), (5, 4), (0, 9), (-1, 2)])
def test_abstract_invalid_span(span):
    with pytest.raises(SpanError):
        abstract_question(BALKAN, span)


def _instance():
    return QuestionInstance(BALKAN, (6, 8), ["balkan", "peninsula"], "location.location.contains",
                            ["location.location.contains", "location.location.adjoin_s"])


def _candidate():
    return RelationCandidate("location.location.contains", ["location", "location", "contains"],
                             ["location"])


def test_build_views_row_11():
    v = build_views(_instance(), _candidate(), ViewConfig.from_table_row(11))
    q = tuple(BALKAN[:6]) + (ENTITY,)
    assert v.pairs == [(q, ("location", "location", "contains")), (q, ("location",))]
    assert v.entity_pair == (("balkan", "peninsula"), ("balkan", "peninsula"))


def test_build_views_row_6_concatenates():
    v = build_views(_instance(), _candidate(), ViewConfig.from_table_row(6))
    assert len(v.pairs) == 1 and v.entity_pair is None
    assert v.pairs[0][1] == ("location", "location", "contains", SEP, "location")


def test_build_views_row_4_and_8():
    v4 = build_views(_instance(), _candidate(), ViewConfig.from_table_row(4))
    assert len(v4.pairs) == 1 and v4.pairs[0][0][-1] == ENTITY
    v8 = build_views(_instance(), _candidate(), ViewConfig.from_table_row(8))
    assert v8.pairs[0][0] == tuple(BALKAN)


def test_build_views_default_type():
    cand = RelationCandidate("r", ["r"], [])
    v = build_views(_instance(), cand, ViewConfig.from_table_row(9))
    assert v.pairs[1][1] == (DEFAULT_TYPE,)


def test_conflicting_view_flags():
    with pytest.raises(ValueError):
        ViewConfig(use_type_view=True, concat_relation_and_type=True)


def _lists(p):
    return {k: getattr(p, k).value.tolist() for k in p.__dataclass_fields__}


def test_aggregate_view_oracle(rng):
    agg = BiLSTM(ParamStore(seed=2, init_scale=0.5), "agg", 4, 3)
    m1, m2 = rng.normal(size=(3, 4)), rng.normal(size=(1, 4))
    out = aggregate_view(leaf(m1), leaf(m2), agg).value
    assert out.shape == (12,)
    want = []
    for m in (m1, m2):
        f, b = oracles.bilstm(m.tolist(), _lists(agg.fwd), _lists(agg.bwd), 3)
        want += f[-1] + b[0]
    np.testing.assert_allclose(out, want, rtol=0, atol=1e-14)


def _model(row=11, **kw):
    corpus = synthetic.toy_overfit_corpus()
    return corpus, corpus.model(synthetic.tiny_config(row, **kw))


def test_entity_pair_features_identical_inputs():
    _, model = _model()
    f = model.entity_pair_features(["balkan", "peninsula"], ["balkan", "peninsula"]).value
    d2 = 2 * model.config.hidden
    assert f.shape == (4 * d2,)
    assert not f[3 * d2:].any()
    np.testing.assert_array_equal(f[:d2], f[d2:2 * d2])
    np.testing.assert_allclose(f[2 * d2:3 * d2], f[:d2] ** 2)


def test_identical_views_identical_scores():
    _, model = _model()
    inst = _instance()
    s = model.score(inst, ["location.location.contains", "location.location.contains"])
    assert s[0] == s[1]


def _oracle_scores(model, inst, relations):
    """Independent forward pass built from the pure-Python reference pieces."""
    cfg = model.config
    d = cfg.hidden

    def encode(tokens):
        xs = [model.embedder.embed_token(t).tolist() for t in tokens]
        return oracles.bilstm(xs, _lists(model.encoder.fwd), _lists(model.encoder.bwd), d)

    def agg(seq):
        f, b = oracles.bilstm(seq, _lists(model.aggregator.fwd), _lists(model.aggregator.bwd),
                              cfg.agg_hidden)
        return f[-1] + b[0]

    Ws = [w.value.tolist() for w in model.matcher.slots]
    W1, b1 = model.mlp.W1.value, model.mlp.b1.value
    W2, b2 = model.mlp.W2.value, model.mlp.b2.value
    out = []
    for r in relations:
        views = model.views(inst, r)
        feats = []
        for a, t in views.pairs:
            m1, m2 = oracles.bimpm(encode(a), encode(t), Ws)
            feats += agg(m1) + agg(m2)
        if views.entity_pair:
            (af, ab), (mf, mb) = (encode(s) for s in views.entity_pair)
            av, mv = af[-1] + ab[0], mf[-1] + mb[0]
            feats += av + mv + [x * y for x, y in zip(av, mv)] + [abs(x - y) for x, y in zip(av, mv)]
        h = [math.tanh(sum(feats[i] * W1[i, j] for i in range(len(feats))) + b1[j])
             for j in range(W1.shape[1])]
        out.append(sum(h[j] * W2[j, 0] for j in range(len(h))) + b2[0])
    return out


@pytest.mark.parametrize("row", [11, 12, 6])
def test_score_matches_independent_oracle(row):
    corpus, model = _model(row)
    inst = corpus.train[0]
    np.testing.assert_allclose(model.score(inst), _oracle_scores(model, inst, inst.candidates),
                               rtol=0, atol=1e-12)


@pytest.mark.parametrize("gold,neg,expected", [
    (2.0, [0.1, 0.5], 0.0),
    (0.4, [0.2, 0.6], 0.7),
    (1.0, [1.0], 0.5),
])
def test_ranking_loss_examples(gold, neg, expected):
    assert float(ranking_loss(gold, np.array(neg)).value) == pytest.approx(expected, abs=1e-15)


def test_ranking_loss_needs_negative():
    with pytest.raises(ValueError):
        ranking_loss(1.0, np.array([]))


def test_zero_epochs_leave_parameters():
    corpus, model = _model()
    before = model.store.snapshot()
    result = train(model, corpus.train, TrainConfig(epochs=0))
    assert result.history == []
    assert all(np.array_equal(before[k], v.value) for k, v in model.params.items())


def test_epoch_loss_deterministic():
    losses = []
    for _ in range(2):
        corpus, model = _model()
        losses.append(train(model, corpus.train, TrainConfig(lr=1e-3, epochs=1)).history[0].loss)
    assert losses[0] == losses[1]


def test_rank_candidates_sorted_and_complete():
    corpus, model = _model()
    inst = corpus.train[0]
    ranked = rank_candidates(inst, model)
    assert sorted(c.relation for c in ranked) == sorted(inst.candidates)
    scores = [c.score for c in ranked]
    assert scores == sorted(scores, reverse=True)
    assert ranked[0].score == max(model.score(inst))


def test_rank_order_ties_by_relation_id():
    assert rank_order(["b", "a", "c"], [1.0, 1.0, 2.0]) == [2, 1, 0]


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.text(min_size=1, max_size=4), st.floats(-5, 5)), min_size=1,
                max_size=8, unique_by=lambda x: x[0]), st.randoms())
def test_top_choice_invariant_to_order(items, rnd):
    rels, scores = zip(*items)
    top = rels[rank_order(rels, scores)[0]]
    shuffled = list(items)
    rnd.shuffle(shuffled)
    r2, s2 = zip(*shuffled)
    assert r2[rank_order(r2, s2)[0]] == top


def test_parameters_registered_once():
    _, model = _model()
    names = list(model.params)
    assert len(names) == len(set(names))
    ids = [id(n) for n in model.params.values()]
    assert len(ids) == len(set(ids))
    # one encoder and one matcher serve every view
    assert sum(n.startswith("encoder.") for n in names) == 24
    assert sum(n.startswith("matcher.") for n in names) == 8


def test_abstraction_changes_scores_only_through_mention():
    corpus, model = _model(9)
    inst = corpus.train[0]
    other = QuestionInstance(inst.tokens[:6] + ["tokyo"], (6, 7), ["tokyo"], inst.gold,
                             inst.candidates)
    # with Q' both questions reduce to the same token sequence
    np.testing.assert_array_equal(model.score(inst), model.score(other))


def test_non_finite_loss_raises():
    corpus, model = _model()
    model.mlp.b2.value[:] = np.nan
    with pytest.raises(TrainingError):
        train(model, corpus.train, TrainConfig(epochs=1))


def test_training_rejects_bad_instances():
    corpus, model = _model()
    bad = QuestionInstance(["x"], (0, 1), ["x"], "g", ["g"])
    with pytest.raises(ValueError):
        train(model, [bad], TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train(model, [], TrainConfig(epochs=1))
