"""Graph nodes and the forward/backward passes.

Every node keeps the op that produced it, its inputs and the cache the op
needs for its vector-Jacobian product.  Nodes are created eagerly (the value
is available right after construction) but the whole graph can be
re-evaluated in place with :func:`forward`, which is what the finite
difference checker relies on.
"""
from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np


class GraphError(Exception):
    pass


class ShapeError(GraphError, ValueError):
    """Operand shapes are incompatible for an op."""

    def __init__(self, op: str, *shapes: tuple[int, ...], detail: str = ""):
        self.op = op
        self.shapes = shapes
        shown = " vs ".join(str(tuple(s)) for s in shapes)
        msg = f"{op}: incompatible shapes {shown}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class Op:
    """Base class for differentiable operations.

    Subclasses implement ``forward(*values, **attrs) -> (value, cache)`` and
    ``backward(grad, cache, *values, **attrs) -> tuple`` returning one
    gradient (or None) per input.
    """

    name = "op"

    @staticmethod
    def forward(*values, **attrs):  # pragma: no cover - interface
        raise NotImplementedError

    @staticmethod
    def backward(grad, cache, *values, **attrs):  # pragma: no cover - interface
        raise NotImplementedError

    @staticmethod
    def branches(value, cache, *values, **attrs):
        """Which smooth piece the op evaluated on (None for smooth ops)."""
        return None


class Node:
    __slots__ = ("value", "grad", "op", "inputs", "attrs", "cache", "requires_grad", "name")

    def __init__(self, value, op: type[Op] | None = None, inputs: tuple["Node", ...] = (),
                 attrs: dict | None = None, cache: Any = None,
                 requires_grad: bool = False, name: str | None = None):
        self.value = value
        self.op = op
        self.inputs = inputs
        self.attrs = attrs or {}
        self.cache = cache
        self.requires_grad = requires_grad
        self.name = name
        self.grad = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def is_leaf(self) -> bool:
        return self.op is None

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def __repr__(self) -> str:
        tag = self.name or (self.op.name if self.op else "leaf")
        return f"Node({tag}, shape={self.value.shape})"

    # arithmetic sugar, resolved lazily to avoid a circular import
    def __add__(self, other):
        from . import ops
        return ops.add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops
        return ops.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other):
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index):
        from . import ops
        return ops.getitem(self, index)


def leaf(value, requires_grad: bool = False, name: str | None = None, dtype=None) -> Node:
    arr = np.array(value, dtype=dtype if dtype is not None else np.float64)
    node = Node(arr, requires_grad=requires_grad, name=name)
    node.grad = np.zeros_like(arr)
    return node


def as_node(x, like: Node | None = None) -> Node:
    if isinstance(x, Node):
        return x
    dtype = like.value.dtype if like is not None else np.float64
    return leaf(x, dtype=dtype)


def apply(op: type[Op], *inputs: Node, **attrs) -> Node:
    value, cache = op.forward(*(n.value for n in inputs), **attrs)
    requires_grad = any(n.requires_grad for n in inputs)
    return Node(value, op=op, inputs=inputs, attrs=attrs, cache=cache,
                requires_grad=requires_grad)


def topological_order(root: Node) -> list[Node]:
    """Post-order over the inputs of ``root``; deterministic for a given graph."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in reversed(node.inputs):
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def forward(root: Node) -> np.ndarray:
    """Recompute every non-leaf value reachable from ``root`` once, in order."""
    for node in topological_order(root):
        if node.op is None:
            continue
        node.value, node.cache = node.op.forward(*(p.value for p in node.inputs), **node.attrs)
    return root.value


def backward(loss: Node, wrt: Iterable[Node] | None = None) -> dict[Node, np.ndarray]:
    """Reverse-mode sweep from a scalar ``loss``.

    Leaf gradients are reset and then accumulated over all paths.  Returns a
    map from leaf to gradient; with ``wrt`` the map covers exactly those
    leaves (zeros for leaves that do not reach the loss).
    """
    if loss.value.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    order = topological_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
    loss.grad = np.ones_like(loss.value)    # interior grads are not kept, the root's is
    leaves: list[Node] = []
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if node.op is None:
            if node.requires_grad:
                node.grad = g if g is not None else np.zeros_like(node.value)
                leaves.append(node)
            continue
        if g is None or not node.requires_grad:
            continue
        in_grads = node.op.backward(g, node.cache, *(p.value for p in node.inputs), **node.attrs)
        for parent, pg in zip(node.inputs, in_grads):
            if pg is None or not parent.requires_grad:
                continue
            prev = grads.get(id(parent))
            grads[id(parent)] = pg if prev is None else prev + pg
    if wrt is None:
        return {n: n.grad for n in leaves}
    out = {}
    reached = {id(n) for n in leaves}
    for n in wrt:
        if id(n) not in reached:
            n.grad = np.zeros_like(n.value)
        out[n] = n.grad
    return out


def values(nodes: Sequence[Node]) -> list[np.ndarray]:
    return [n.value for n in nodes]
