"""Multi-perspective matching between two encoded sequences.

A directed pass matches every anchor position against the whole target with
four strategies (full, max-pooling, attentive, max-attentive), each in both
LSTM directions, giving ``8 * l`` values per anchor position.  Running it
both ways yields the bilateral pair of match sequences.
"""
from __future__ import annotations

from dataclasses import dataclass

from .autodiff import Node, ops
from .autodiff.graph import ShapeError
from .encoder import ContextualEncoding
from .params import ParamStore

STRATEGIES = ("full", "max_pool", "attentive", "max_attentive")

# denominator floor for the attention-weighted mean
ATTENTION_EPS = 1e-8


@dataclass
class PerspectiveWeights:
    """Eight (l, d) matrices: one per (strategy, direction) slot."""

    slots: tuple[Node, ...]

    @classmethod
    def create(cls, store: ParamStore, hidden: int, perspectives: int,
               prefix: str = "matcher") -> "PerspectiveWeights":
        slots = tuple(store.uniform(f"{prefix}.W{k}", (perspectives, hidden))
                      for k in range(1, 9))
        return cls(slots)

    @property
    def perspectives(self) -> int:
        return self.slots[0].value.shape[0]

    def pair(self, strategy: str) -> tuple[Node, Node]:
        k = STRATEGIES.index(strategy)
        return self.slots[2 * k], self.slots[2 * k + 1]


def f_m(v1: Node, v2: Node, W: Node) -> Node:
    """m_k = cosine(W_k * v1, W_k * v2) for every perspective row k."""
    if v1.value.ndim != 1 or v1.value.shape != v2.value.shape:
        raise ShapeError("f_m", v1.value.shape, v2.value.shape, W.value.shape)
    d = v1.value.shape[0]
    out = ops.mp_cosine_rows(ops.reshape(v1, (1, d)), ops.reshape(v2, (1, d)), W)
    return ops.reshape(out, (W.value.shape[0],))


def _check_target(target: ContextualEncoding, what: str) -> None:
    if target.length == 0:
        raise ValueError(f"{what}: empty target sequence")


def _against_one(A: Node, v: Node, W: Node) -> Node:
    """Match every row of A against the single row v -> (M, l)."""
    M = A.value.shape[0]
    return ops.reshape(ops.mp_cosine(A, v, W), (M, W.value.shape[0]))


def full_matching(anchor: ContextualEncoding, target: ContextualEncoding,
                  W1: Node, W2: Node) -> Node:
    """Forward states vs the target's last forward state, backward states vs its first."""
    _check_target(target, "full_matching")
    N = target.length
    fwd = _against_one(anchor.forward_states, target.forward_states[N - 1:N], W1)
    bwd = _against_one(anchor.backward_states, target.backward_states[0:1], W2)
    return ops.concat([fwd, bwd], axis=1)


def max_pooling_matching(anchor: ContextualEncoding, target: ContextualEncoding,
                         W3: Node, W4: Node) -> Node:
    _check_target(target, "max_pooling_matching")
    fwd = ops.reduce_max(ops.mp_cosine(anchor.forward_states, target.forward_states, W3), axis=1)
    bwd = ops.reduce_max(ops.mp_cosine(anchor.backward_states, target.backward_states, W4), axis=1)
    return ops.concat([fwd, bwd], axis=1)


def attention_weights(anchor: Node, target: Node) -> Node:
    """Raw cosine between every anchor row and every target row, (M, N)."""
    return ops.cosine_matrix(anchor, target)


def _attentive(A: Node, T: Node, W: Node, alpha: Node | None = None) -> Node:
    alpha = attention_weights(A, T) if alpha is None else alpha
    weighted = ops.matmul(alpha, T)
    total = ops.reduce_sum(alpha, axis=1, keepdims=True)
    mean = ops.safe_divide(weighted, total, eps=ATTENTION_EPS)
    return ops.mp_cosine_rows(A, mean, W)


def attentive_matching(anchor: ContextualEncoding, target: ContextualEncoding,
                       W5: Node, W6: Node, alphas: tuple[Node, Node] | None = None) -> Node:
    """Each anchor state vs the cosine-weighted mean of the target states.

    Weights are the raw cosines (they may be negative); a sum smaller in
    magnitude than ATTENTION_EPS is floored with its sign kept.
    """
    _check_target(target, "attentive_matching")
    af, ab = alphas if alphas is not None else (None, None)
    fwd = _attentive(anchor.forward_states, target.forward_states, W5, af)
    bwd = _attentive(anchor.backward_states, target.backward_states, W6, ab)
    return ops.concat([fwd, bwd], axis=1)


def max_attentive_matching(anchor: ContextualEncoding, target: ContextualEncoding,
                           W7: Node, W8: Node, alphas: tuple[Node, Node] | None = None) -> Node:
    """Each anchor state vs the most cosine-similar target state (lowest index on ties)."""
    _check_target(target, "max_attentive_matching")
    if alphas is None:
        alphas = (attention_weights(anchor.forward_states, target.forward_states),
                  attention_weights(anchor.backward_states, target.backward_states))
    fwd = ops.mp_cosine_rows(anchor.forward_states,
                             ops.select_by_argmax(alphas[0], target.forward_states), W7)
    bwd = ops.mp_cosine_rows(anchor.backward_states,
                             ops.select_by_argmax(alphas[1], target.backward_states), W8)
    return ops.concat([fwd, bwd], axis=1)


def directed_match(anchor: ContextualEncoding, target: ContextualEncoding,
                   weights: PerspectiveWeights) -> Node:
    """(M, 8l) match sequence: full | max-pool | attentive | max-attentive."""
    _check_target(target, "directed_match")
    if anchor.forward_states.value.shape[1] != target.forward_states.value.shape[1]:
        raise ShapeError("directed_match", anchor.forward_states.value.shape,
                         target.forward_states.value.shape)
    alphas = (attention_weights(anchor.forward_states, target.forward_states),
              attention_weights(anchor.backward_states, target.backward_states))
    parts = [
        full_matching(anchor, target, *weights.pair("full")),
        max_pooling_matching(anchor, target, *weights.pair("max_pool")),
        attentive_matching(anchor, target, *weights.pair("attentive"), alphas=alphas),
        max_attentive_matching(anchor, target, *weights.pair("max_attentive"), alphas=alphas),
    ]
    return ops.concat(parts, axis=1)


def bimpm_match(seq_a: ContextualEncoding, seq_b: ContextualEncoding,
                weights: PerspectiveWeights) -> tuple[Node, Node]:
    """Match sequences for a->b (length of a) and b->a (length of b)."""
    return directed_match(seq_a, seq_b, weights), directed_match(seq_b, seq_a, weights)
