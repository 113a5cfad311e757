"""Dataset files and evaluation.

One instance per line::

    question <TAB> start:end <TAB> entity alias <TAB> gold relation <TAB> cand1|cand2|...

``start:end`` is a token span over the whitespace-tokenised question (end
exclusive).  Multi-hop candidates join their relations with ``->``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .model import MultiViewMatcher, QuestionInstance
from .tokens import tokenize_question

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")


class DatasetFormatError(ValueError):
    def __init__(self, path, line_no: int, msg: str):
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {msg}")


@dataclass
class DatasetFile:
    instances: list[QuestionInstance]
    split: str = "train"
    path: str | None = None
    skipped: int = 0
    deduplicated: int = 0
    warnings: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


def parse_line(line: str, path="<string>", line_no: int = 1) -> tuple[QuestionInstance, int]:
    """Parse one TSV line; returns the instance and the number of duplicate candidates dropped."""
    cols = line.rstrip("\n").rstrip("\r").split("\t")
    if len(cols) != 5:
        raise DatasetFormatError(path, line_no, f"expected 5 tab-separated fields, found {len(cols)}")
    question, span, alias, gold, cands = cols
    tokens = tokenize_question(question)
    if not tokens:
        raise DatasetFormatError(path, line_no, "empty question")
    try:
        s, e = (int(x) for x in span.split(":"))
    except ValueError:
        raise DatasetFormatError(path, line_no, f"bad mention span {span!r}") from None
    if not 0 <= s < e <= len(tokens):
        raise DatasetFormatError(path, line_no, f"mention span {s}:{e} outside {len(tokens)} tokens")
    gold = gold.strip()
    if not gold:
        raise DatasetFormatError(path, line_no, "empty gold relation")
    raw = [c.strip() for c in cands.split("|") if c.strip()]
    if not raw:
        raise DatasetFormatError(path, line_no, "empty candidate list")
    unique = list(dict.fromkeys(raw))
    inst = QuestionInstance(tokens, (s, e), tokenize_question(alias), gold, unique)
    return inst, len(raw) - len(unique)


def load_dataset(path: str | Path, split: str = "train") -> DatasetFile:
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    out = DatasetFile([], split=split, path=str(path))
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            inst, dups = parse_line(line, path, line_no)
            if dups:
                out.deduplicated += dups
                log.info("%s:%d: dropped %d duplicate candidate(s)", path, line_no, dups)
            if split == "train" and inst.gold not in inst.candidates:
                msg = f"{path}:{line_no}: gold {inst.gold!r} missing from candidates; skipped"
                log.warning(msg)
                out.warnings.append(msg)
                out.skipped += 1
                continue
            out.instances.append(inst)
    if out.deduplicated:
        log.info("%s: %d duplicate candidate(s) removed in total", path, out.deduplicated)
    return out


def format_instance(inst: QuestionInstance) -> str:
    s, e = inst.mention
    return "\t".join([" ".join(inst.tokens), f"{s}:{e}", " ".join(inst.alias), inst.gold,
                      "|".join(inst.candidates)])


def dump_dataset(instances: Iterable[QuestionInstance], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(format_instance(inst) + "\n")


def evaluate(model: MultiViewMatcher, dataset: DatasetFile | list[QuestionInstance]) -> float:
    """Fraction of instances whose top-ranked candidate is the gold relation."""
    instances = list(dataset)
    if not instances:
        raise ValueError("cannot evaluate on an empty dataset")
    hits = 0
    for inst in instances:
        ranked = model.rank_candidates(inst)
        hits += ranked[0].relation == inst.gold
    return hits / len(instances)
