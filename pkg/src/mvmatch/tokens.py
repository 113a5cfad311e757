"""Special tokens and tokenisation rules shared by every view."""
from __future__ import annotations

import re

PAD = "<pad>"
UNKNOWN = "<unk>"
ENTITY = "<e>"
DEFAULT_TYPE = "__default_type__"
SEP = "<sep>"
PATH = "<path>"

# fixed id order; PAD must stay at 0
SPECIAL_TOKENS = (PAD, UNKNOWN, ENTITY, DEFAULT_TYPE, SEP, PATH)

# separates hops of a multi-relation candidate inside one candidate field
PATH_SEPARATOR = "->"

_NAME_SPLIT = re.compile(r"[./_]+")


def tokenize_question(text: str) -> list[str]:
    return text.lower().split()


def split_name(name: str) -> list[str]:
    """Split a KB identifier such as ``location.location.contains`` into words."""
    return [w for w in _NAME_SPLIT.split(name.lower()) if w]


def relation_tokens(relation: str) -> list[str]:
    hops = relation.split(PATH_SEPARATOR)
    out: list[str] = []
    for k, hop in enumerate(hops):
        if k:
            out.append(PATH)
        out.extend(split_name(hop))
    return out or [UNKNOWN]


def last_hop(relation: str) -> str:
    return relation.split(PATH_SEPARATOR)[-1]
