import itertools
import logging

import pytest

from mvmatch import synthetic
from mvmatch.data import DatasetFormatError, dump_dataset, evaluate, load_dataset, parse_line
from mvmatch.model import QuestionInstance, RelationCandidate

LINE = "what country is located in the balkan peninsula\t6:8\tbalkan peninsula\tlocation.location.contains\tlocation.location.contains|location.location.adjoin_s\n"


def _write(tmp_path, text):
    p = tmp_path / "d.tsv"
    p.write_text(text, encoding="utf-8")
    return p


def test_single_line_file(tmp_path):
    ds = load_dataset(_write(tmp_path, LINE))
    assert len(ds) == 1
    inst = ds.instances[0]
    assert inst.mention_tokens == ["balkan", "peninsula"]
    assert inst.candidates == ["location.location.contains", "location.location.adjoin_s"]


def test_empty_candidate_list_names_line(tmp_path):
    bad = LINE.rsplit("\t", 1)[0] + "\t\n"
    with pytest.raises(DatasetFormatError) as exc:
        load_dataset(_write(tmp_path, LINE + bad))
    assert exc.value.line_no == 2 and ":2:" in str(exc.value)


@pytest.mark.parametrize("line", ["a\tb\n", "q w\t0:5\tx\tr\tr|s\n", "q w\tx:y\tx\tr\tr\n",
                                  "\t0:1\tx\tr\tr\n"])
def test_malformed_lines(line):
    with pytest.raises(DatasetFormatError):
        parse_line(line)


def test_duplicates_removed_and_counted(tmp_path):
    line = LINE.replace("adjoin_s\n", "adjoin_s|location.location.contains\n")
    ds = load_dataset(_write(tmp_path, line))
    assert ds.deduplicated == 1 and len(ds.instances[0].candidates) == 2


def test_missing_gold_in_train_warns_and_skips(tmp_path, caplog):
    line = LINE.replace("\tlocation.location.contains\t", "\tpeople.person.born\t")
    with caplog.at_level(logging.WARNING):
        ds = load_dataset(_write(tmp_path, line + LINE))
    assert ds.skipped == 1 and len(ds) == 1 and "missing" in caplog.text
    assert len(load_dataset(_write(tmp_path, line), split="test")) == 1


def test_round_trip(tmp_path):
    ds = load_dataset(_write(tmp_path, LINE * 2))
    out = tmp_path / "again.tsv"
    dump_dataset(ds, out)
    assert load_dataset(out).instances == ds.instances


def test_evaluate_empty():
    with pytest.raises(ValueError):
        evaluate(None, [])


class _Oracle:
    """Ranks the gold relation first, whatever the candidate order."""

    def __init__(self, scores=None):
        self.scores = scores

    def rank_candidates(self, inst):
        if self.scores is None:
            order = sorted(inst.candidates, key=lambda r: r != inst.gold)
        else:
            order = sorted(inst.candidates, key=lambda r: (-self.scores[r], r))
        return [RelationCandidate(r, [], []) for r in order]


def test_all_correct_stub_scores_one():
    corpus = synthetic.toy_overfit_corpus()
    assert evaluate(_Oracle(), corpus.train) == 1.0


def test_accuracy_invariant_under_candidate_permutation():
    corpus = synthetic.toy_overfit_corpus()
    model = corpus.model(synthetic.tiny_config(11))
    base = evaluate(model, corpus.train)
    for perm in itertools.islice(itertools.permutations(range(4)), 5):
        shuffled = [QuestionInstance(i.tokens, i.mention, i.alias, i.gold,
                                     [i.candidates[k] for k in perm]) for i in corpus.train]
        assert evaluate(model, shuffled) == base
