"""Gradient-check cases: every op, the BiLSTM, each matching strategy and the full model."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .autodiff import Node, leaf, ops
from .autodiff.gradcheck import GradCheckResult, check_gradients
from .encoder import BiLSTM, ContextualEncoding
from .matcher import (PerspectiveWeights, attentive_matching, bimpm_match, full_matching,
                      max_attentive_matching, max_pooling_matching)
from .params import ParamStore


@dataclass
class GradCase:
    name: str
    loss: Node
    leaves: dict[str, Node]


def _project(out: Node, rng: np.random.Generator) -> Node:
    """Random linear functional of ``out``, so every output entry matters."""
    R = leaf(rng.normal(size=out.value.shape))
    return ops.reduce_sum(out * R)


def _op_cases(rng: np.random.Generator) -> Iterator[tuple[str, Callable[..., Node], list[np.ndarray]]]:
    n = lambda *s: rng.normal(size=s)
    yield "add", ops.add, [n(3, 4), n(4)]
    yield "sub", ops.sub, [n(3, 1), n(3, 4)]
    yield "mul", ops.mul, [n(2, 3), n(2, 3)]
    yield "neg", ops.neg, [n(5)]
    yield "tanh", ops.tanh, [n(3, 3)]
    yield "sigmoid", ops.sigmoid, [n(3, 3)]
    yield "relu", ops.relu, [n(4, 3)]
    yield "abs", ops.absolute, [n(4, 3)]
    yield "matmul", ops.matmul, [n(3, 4), n(4, 2)]
    yield "matmul_batched", ops.matmul, [n(2, 3, 4), n(4, 5)]
    yield "matmul_vector", ops.matmul, [n(4), n(4, 3)]
    yield "sum", lambda a: ops.reduce_sum(a, axis=1, keepdims=True), [n(3, 4)]
    yield "max", lambda a: ops.reduce_max(a, axis=0), [n(4, 3)]
    yield "reshape", lambda a: ops.reshape(a, (6, 2)), [n(3, 4)]
    yield "concat", lambda a, b: ops.concat([a, b], axis=1), [n(2, 3), n(2, 2)]
    yield "getitem", lambda a: ops.getitem(a, (np.array([0, 2, 2]), slice(1, 3))), [n(3, 4)]
    yield "pad_stack", lambda a, b: ops.pad_stack([a, b]), [n(3, 2), n(1, 2)]
    yield "cosine", ops.cosine, [n(5), n(5)]
    yield "mp_cosine", ops.mp_cosine, [n(3, 4), n(2, 4), n(2, 4)]
    yield "mp_cosine_rows", ops.mp_cosine_rows, [n(3, 4), n(3, 4), n(2, 4)]
    yield "safe_divide", ops.safe_divide, [n(3, 2), n(3, 1) + 3.0]
    yield "select_by_argmax", lambda t: ops.select_by_argmax(leaf(n(3, 4)), t), [n(4, 2)]
    yield ("embedding_lookup",
           lambda s: ops.embedding_lookup(s, np.array([[0, 1, 5], [2, 4, 3]]), fixed=n(3, 2)),
           [n(3, 2)])
    lengths = np.array([3, 1])
    for rev in (False, True):
        yield (f"lstm_{'reverse' if rev else 'forward'}",
               lambda X, W, U, b, rev=rev: ops.lstm(X, W, U, b, lengths=lengths, reverse=rev),
               [n(2, 3, 2), 0.5 * n(2, 12), 0.5 * n(3, 12), 0.1 * n(12)])


def op_cases(seed: int = 0) -> list[GradCase]:
    rng = np.random.default_rng(seed)
    cases = []
    for name, fn, inputs in _op_cases(rng):
        leaves = {f"{name}.x{k}": leaf(x, requires_grad=True) for k, x in enumerate(inputs)}
        out = fn(*leaves.values())
        cases.append(GradCase(name, _project(out, rng), leaves))
    return cases


def module_cases(seed: int = 0, hidden: int = 8, perspectives: int = 2,
                 lengths: tuple[int, int] = (4, 3), input_dim: int = 5) -> list[GradCase]:
    """BiLSTM and matching cases; inputs and parameters are the checked leaves."""
    rng = np.random.default_rng(seed)
    cases = []

    store = ParamStore(seed=seed, init_scale=0.5)
    enc = BiLSTM(store, "bilstm", input_dim, hidden)
    X = leaf(rng.normal(size=(2, input_dim)), requires_grad=True, name="x")
    e = enc.encode(X)
    leaves = {"x": X, **store.as_dict()}
    cases.append(GradCase("bilstm", _project(e.combined, rng), leaves))

    def encoding(M, tag):
        f = leaf(rng.normal(size=(M, hidden)), requires_grad=True, name=f"{tag}.fwd")
        b = leaf(rng.normal(size=(M, hidden)), requires_grad=True, name=f"{tag}.bwd")
        return ContextualEncoding(f, b), {f.name: f, b.name: b}

    strategies = {
        "full_matching": full_matching,
        "max_pooling_matching": max_pooling_matching,
        "attentive_matching": attentive_matching,
        "max_attentive_matching": max_attentive_matching,
    }
    for name, fn in strategies.items():
        a, la = encoding(lengths[0], "anchor")
        t, lt = encoding(lengths[1], "target")
        W1 = leaf(rng.uniform(-1, 1, size=(perspectives, hidden)), requires_grad=True, name="W_fwd")
        W2 = leaf(rng.uniform(-1, 1, size=(perspectives, hidden)), requires_grad=True, name="W_bwd")
        out = fn(a, t, W1, W2)
        cases.append(GradCase(name, _project(out, rng), {**la, **lt, "W_fwd": W1, "W_bwd": W2}))

    a, la = encoding(lengths[0], "p")
    t, lt = encoding(lengths[1], "q")
    store = ParamStore(seed=seed, init_scale=1.0)
    weights = PerspectiveWeights.create(store, hidden, perspectives)
    m1, m2 = bimpm_match(a, t, weights)
    loss = ops.add(_project(m1, rng), _project(m2, rng))
    cases.append(GradCase("bimpm_match", loss, {**la, **lt, **store.as_dict()}))
    return cases


def model_case(seed: int = 0, row: int = 11, **config) -> GradCase:
    """Full ranking loss of a tiny model on a 5-token, 2-candidate instance."""
    from .synthetic import gradcheck_corpus, tiny_config
    corpus = gradcheck_corpus(seed)
    model = corpus.model(tiny_config(row, seed=seed, **config))
    return GradCase(f"model_row{row}", model.loss_graph(corpus.train[0]), model.params)


def run_suite(cases: list[GradCase], tolerance: float = 1e-4, max_entries: int | None = None,
              corrupt: bool = False, seed: int = 0) -> list[tuple[str, GradCheckResult]]:
    out = []
    for case in cases:
        for r in check_gradients(case.loss, case.leaves, tolerance=tolerance,
                                 max_entries=max_entries, seed=seed, corrupt=corrupt):
            out.append((case.name, r))
    return out
