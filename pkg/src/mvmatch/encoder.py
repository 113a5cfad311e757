"""Shared bidirectional LSTM encoder."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Node, ops
from .autodiff.graph import ShapeError
from .params import ParamStore

GATES = ("i", "f", "o", "c")


@dataclass
class LstmParams:
    """Input-to-hidden W_* (n x d), hidden-to-hidden U_* (d x d), biases b_* (d)."""

    W_i: Node
    W_f: Node
    W_o: Node
    W_c: Node
    U_i: Node
    U_f: Node
    U_o: Node
    U_c: Node
    b_i: Node
    b_f: Node
    b_o: Node
    b_c: Node

    @classmethod
    def create(cls, store: ParamStore, prefix: str, input_dim: int, hidden: int) -> "LstmParams":
        kw = {}
        for g in GATES:
            kw[f"W_{g}"] = store.uniform(f"{prefix}.W_{g}", (input_dim, hidden))
        for g in GATES:
            kw[f"U_{g}"] = store.uniform(f"{prefix}.U_{g}", (hidden, hidden))
        for g in GATES:
            kw[f"b_{g}"] = store.zeros(f"{prefix}.b_{g}", (hidden,))
        return cls(**kw)

    @property
    def input_dim(self) -> int:
        return self.W_i.value.shape[0]

    @property
    def hidden(self) -> int:
        return self.U_i.value.shape[0]

    def stacked(self) -> tuple[Node, Node, Node]:
        """Gate blocks side by side in i, f, o, c order."""
        W = ops.concat([getattr(self, f"W_{g}") for g in GATES], axis=1)
        U = ops.concat([getattr(self, f"U_{g}") for g in GATES], axis=1)
        b = ops.concat([getattr(self, f"b_{g}") for g in GATES], axis=0)
        return W, U, b


def lstm_step(x_t: Node, h_prev: Node, c_prev: Node, p: LstmParams) -> tuple[Node, Node]:
    """One standard LSTM step built from primitive ops."""
    if x_t.value.shape != (p.input_dim,) or h_prev.value.shape != (p.hidden,) \
            or c_prev.value.shape != (p.hidden,):
        raise ShapeError("lstm_step", x_t.value.shape, h_prev.value.shape, c_prev.value.shape)

    def pre(g):
        return x_t @ getattr(p, f"W_{g}") + h_prev @ getattr(p, f"U_{g}") + getattr(p, f"b_{g}")

    i = ops.sigmoid(pre("i"))
    f = ops.sigmoid(pre("f"))
    o = ops.sigmoid(pre("o"))
    cand = ops.tanh(pre("c"))
    c = f * c_prev + i * cand
    h = o * ops.tanh(c)
    return h, c


@dataclass
class ContextualEncoding:
    forward_states: Node    # (M, d)
    backward_states: Node   # (M, d)

    @property
    def length(self) -> int:
        return self.forward_states.value.shape[0]

    @property
    def combined(self) -> Node:
        return ops.concat([self.forward_states, self.backward_states], axis=1)

    def last_step(self) -> Node:
        """[forward state at the end ; backward state at the start]."""
        return ops.concat([self.forward_states[self.length - 1], self.backward_states[0]], axis=0)


class BiLSTM:
    def __init__(self, store: ParamStore, prefix: str, input_dim: int, hidden: int):
        self.fwd = LstmParams.create(store, f"{prefix}.fwd", input_dim, hidden)
        self.bwd = LstmParams.create(store, f"{prefix}.bwd", input_dim, hidden)

    @property
    def hidden(self) -> int:
        return self.fwd.hidden

    def run(self, X: Node, lengths) -> tuple[Node, Node]:
        """Both directions over a padded (B, T, n) batch -> two (B, T, d) nodes."""
        lengths = np.asarray(lengths, dtype=np.int64)
        Hf = ops.lstm(X, *self.fwd.stacked(), lengths=lengths, reverse=False)
        Hb = ops.lstm(X, *self.bwd.stacked(), lengths=lengths, reverse=True)
        return Hf, Hb

    def encode_batch(self, X: Node, lengths) -> list[ContextualEncoding]:
        if any(int(n) <= 0 for n in lengths):
            raise ValueError("cannot encode an empty sequence")
        Hf, Hb = self.run(X, lengths)
        return [ContextualEncoding(Hf[k, :int(n)], Hb[k, :int(n)]) for k, n in enumerate(lengths)]

    def encode(self, inputs: Node) -> ContextualEncoding:
        return bilstm_encode(inputs, self)


def bilstm_encode(inputs: Node, encoder: BiLSTM) -> ContextualEncoding:
    """Encode one (M, n) sequence with the shared encoder."""
    if inputs.value.ndim != 2 or inputs.value.shape[0] == 0:
        raise ValueError(f"bilstm_encode needs a non-empty (M, n) sequence, got {inputs.value.shape}")
    M = inputs.value.shape[0]
    X = ops.reshape(inputs, (1,) + inputs.value.shape)
    return encoder.encode_batch(X, [M])[0]
