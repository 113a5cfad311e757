"""Differentiable operations.

Small elementwise/linear-algebra ops plus a handful of fused ops (LSTM
direction, multi-perspective cosine) whose backward passes run through the
kernels in :mod:`mvmatch.kernels`.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..kernels.numpy_kernels import NORM_EPS, sigmoid as _sigmoid
from .graph import Node, Op, ShapeError, apply, as_node


def _unbroadcast(grad, shape):
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, a.shape, b.shape) from None


class Add(Op):
    name = "add"

    @staticmethod
    def forward(a, b):
        _broadcast("add", a, b)
        return a + b, None

    @staticmethod
    def backward(g, cache, a, b):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)


class Sub(Op):
    name = "sub"

    @staticmethod
    def forward(a, b):
        _broadcast("sub", a, b)
        return a - b, None

    @staticmethod
    def backward(g, cache, a, b):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)


class Mul(Op):
    name = "mul"

    @staticmethod
    def forward(a, b):
        _broadcast("mul", a, b)
        return a * b, None

    @staticmethod
    def backward(g, cache, a, b):
        return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


class Neg(Op):
    name = "neg"

    @staticmethod
    def forward(a):
        return -a, None

    @staticmethod
    def backward(g, cache, a):
        return (-g,)


class Tanh(Op):
    name = "tanh"

    @staticmethod
    def forward(a):
        t = np.tanh(a)
        return t, t

    @staticmethod
    def backward(g, t, a):
        return (g * (1.0 - t * t),)


class Sigmoid(Op):
    name = "sigmoid"

    @staticmethod
    def forward(a):
        s = _sigmoid(np.atleast_1d(a)).reshape(np.shape(a))
        return s, s

    @staticmethod
    def backward(g, s, a):
        return (g * s * (1.0 - s),)


class Relu(Op):
    name = "relu"

    @staticmethod
    def forward(a):
        return np.maximum(a, 0.0), None

    @staticmethod
    def backward(g, cache, a):
        return (g * (a > 0),)

    @staticmethod
    def branches(value, cache, a):
        return a > 0


class Abs(Op):
    name = "abs"

    @staticmethod
    def forward(a):
        return np.abs(a), None

    @staticmethod
    def backward(g, cache, a):
        return (g * np.sign(a),)

    @staticmethod
    def branches(value, cache, a):
        return a >= 0


class MatMul(Op):
    """a @ b for a of rank 1-3 and b of rank 1-2."""

    name = "matmul"

    @staticmethod
    def forward(a, b):
        if a.ndim == 0 or b.ndim == 0 or b.ndim > 2 or a.ndim > 3 or a.shape[-1] != b.shape[0]:
            raise ShapeError("matmul", a.shape, b.shape)
        return a @ b, None

    @staticmethod
    def backward(g, cache, a, b):
        if a.ndim == 1 and b.ndim == 1:
            return g * b, g * a
        if b.ndim == 1:
            return np.multiply.outer(g, b), np.tensordot(a, g, axes=(tuple(range(a.ndim - 1)),
                                                                        tuple(range(g.ndim))))
        if a.ndim == 1:
            return b @ g, np.outer(a, g)
        ga = g @ b.T
        gb = a.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        return ga, gb


class Sum(Op):
    name = "sum"

    @staticmethod
    def forward(a, axis=None, keepdims=False):
        return np.sum(a, axis=axis, keepdims=keepdims), None

    @staticmethod
    def backward(g, cache, a, axis=None, keepdims=False):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)


class Max(Op):
    """Max along one axis; ties go to the lowest index, which alone gets gradient."""

    name = "max"

    @staticmethod
    def forward(a, axis=None):
        if a.size == 0:
            raise ShapeError("max", a.shape, detail="empty operand")
        if axis is None:
            idx = np.argmax(a.reshape(-1))
            return np.asarray(a.reshape(-1)[idx]), idx
        idx = np.expand_dims(np.argmax(a, axis=axis), axis)
        return np.take_along_axis(a, idx, axis=axis).squeeze(axis), idx

    @staticmethod
    def backward(g, idx, a, axis=None):
        out = np.zeros_like(a)
        if axis is None:
            out.reshape(-1)[idx] = g
        else:
            np.put_along_axis(out, idx, np.expand_dims(g, axis), axis=axis)
        return (out,)

    @staticmethod
    def branches(value, idx, a, axis=None):
        return idx


class Reshape(Op):
    name = "reshape"

    @staticmethod
    def forward(a, shape):
        try:
            return a.reshape(shape), None
        except ValueError:
            raise ShapeError("reshape", a.shape, tuple(shape)) from None

    @staticmethod
    def backward(g, cache, a, shape):
        return (g.reshape(a.shape),)


class Concat(Op):
    name = "concat"

    @staticmethod
    def forward(*parts, axis=0):
        try:
            return np.concatenate(parts, axis=axis), None
        except ValueError:
            raise ShapeError("concat", *(p.shape for p in parts), detail=f"axis={axis}") from None

    @staticmethod
    def backward(g, cache, *parts, axis=0):
        bounds = np.cumsum([p.shape[axis] for p in parts])[:-1]
        return tuple(np.split(g, bounds, axis=axis))


def _is_basic(index):
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


class GetItem(Op):
    name = "getitem"

    @staticmethod
    def forward(a, index):
        try:
            return a[index], None
        except IndexError as err:
            raise ShapeError("getitem", a.shape, detail=str(err)) from None

    @staticmethod
    def backward(g, cache, a, index):
        out = np.zeros_like(a)
        if _is_basic(index):
            out[index] = g
        else:
            np.add.at(out, index, g)
        return (out,)


class PadStack(Op):
    """Stack (len_i, k) sequences into a zero-padded (B, T, k) block."""

    name = "pad_stack"

    @staticmethod
    def forward(*seqs):
        widths = {s.shape[1:] for s in seqs}
        if len(widths) != 1 or any(s.ndim != 2 for s in seqs):
            raise ShapeError("pad_stack", *(s.shape for s in seqs))
        T = max(s.shape[0] for s in seqs)
        out = np.zeros((len(seqs), T, seqs[0].shape[1]), dtype=seqs[0].dtype)
        for k, s in enumerate(seqs):
            out[k, :s.shape[0]] = s
        return out, None

    @staticmethod
    def backward(g, cache, *seqs):
        return tuple(g[k, :s.shape[0]] for k, s in enumerate(seqs))


class Cosine(Op):
    name = "cosine"

    @staticmethod
    def forward(a, b):
        if a.ndim != 1 or a.shape != b.shape:
            raise ShapeError("cosine", a.shape, b.shape)
        na = np.sqrt(a @ a)
        nb = np.sqrt(b @ b)
        if na < NORM_EPS or nb < NORM_EPS:
            return np.zeros((), dtype=a.dtype), (na, nb, 0.0)
        c = (a @ b) / (na * nb)
        return np.asarray(c), (na, nb, c)

    @staticmethod
    def backward(g, cache, a, b):
        na, nb, c = cache
        if na < NORM_EPS or nb < NORM_EPS:
            return np.zeros_like(a), np.zeros_like(b)
        ga = g * (b / (na * nb) - c * a / (na * na))
        gb = g * (a / (na * nb) - c * b / (nb * nb))
        return ga, gb

    @staticmethod
    def branches(value, cache, a, b):
        return cache[0] < NORM_EPS, cache[1] < NORM_EPS


def _check_mp(op, A, B, W, rows=False):
    if A.ndim != 2 or B.ndim != 2 or W.ndim != 2 or not (A.shape[1] == B.shape[1] == W.shape[1]):
        raise ShapeError(op, A.shape, B.shape, W.shape)
    if rows and A.shape[0] != B.shape[0]:
        raise ShapeError(op, A.shape, B.shape, detail="row counts differ")


class MPCosine(Op):
    """All-pairs multi-perspective cosine: (M,d), (N,d), (l,d) -> (M,N,l)."""

    name = "mp_cosine"

    @staticmethod
    def forward(A, B, W):
        _check_mp("mp_cosine", A, B, W)
        cos, na, nb = kernels.mp_cosine_forward(A, B, W)
        return cos, (cos, na, nb)

    @staticmethod
    def backward(g, cache, A, B, W):
        cos, na, nb = cache
        return kernels.mp_cosine_backward(g, A, B, W, cos, na, nb)

    @staticmethod
    def branches(value, cache, A, B, W):
        return cache[1] < NORM_EPS, cache[2] < NORM_EPS


class MPCosineRows(Op):
    """Row-aligned multi-perspective cosine: (M,d), (M,d), (l,d) -> (M,l)."""

    name = "mp_cosine_rows"

    @staticmethod
    def forward(A, B, W):
        _check_mp("mp_cosine_rows", A, B, W, rows=True)
        W2 = W * W
        na = np.sqrt((A * A) @ W2.T)
        nb = np.sqrt((B * B) @ W2.T)
        valid = (na >= NORM_EPS) & (nb >= NORM_EPS)
        num = (A * B) @ W2.T
        cos = np.where(valid, num / np.where(valid, na * nb, 1.0), 0.0)
        return cos, (na, nb, valid, cos)

    @staticmethod
    def backward(g, cache, A, B, W):
        na, nb, valid, cos = cache
        W2 = W * W
        sa = np.where(valid, na, 1.0)
        sb = np.where(valid, nb, 1.0)
        R = np.where(valid, g / (sa * sb), 0.0)
        Cg = np.where(valid, g * cos, 0.0)
        ca = Cg / (sa * sa)
        cb = Cg / (sb * sb)
        RW = R @ W2
        dA = RW * B - A * (ca @ W2)
        dB = RW * A - B * (cb @ W2)
        dW = W * (2.0 * (R.T @ (A * B)) - ca.T @ (A * A) - cb.T @ (B * B))
        return dA, dB, dW

    @staticmethod
    def branches(value, cache, A, B, W):
        return cache[2]


class SafeDivide(Op):
    """num / den with |den| floored at eps, keeping the sign of den.

    Where the floor is active the denominator is treated as a constant.
    """

    name = "safe_divide"

    @staticmethod
    def forward(num, den, eps=1e-8):
        _broadcast("safe_divide", num, den)
        guarded = np.abs(den) < eps
        den_g = np.where(guarded, np.where(den < 0, -eps, eps), den)
        return num / den_g, (den_g, guarded)

    @staticmethod
    def backward(g, cache, num, den, eps=1e-8):
        den_g, guarded = cache
        gnum = _unbroadcast(g / den_g, num.shape)
        gden = _unbroadcast(-g * num / (den_g * den_g), den.shape)
        gden = np.where(guarded, 0.0, gden)
        return gnum, gden

    @staticmethod
    def branches(value, cache, num, den, eps=1e-8):
        return cache[1]


class SelectByArgmax(Op):
    """Row i of the output is target[argmax_j scores[i, j]] (lowest index on ties)."""

    name = "select_by_argmax"

    @staticmethod
    def forward(scores, target):
        if scores.ndim != 2 or target.ndim != 2 or scores.shape[1] != target.shape[0]:
            raise ShapeError("select_by_argmax", scores.shape, target.shape)
        idx = np.argmax(scores, axis=1)
        return target[idx], idx

    @staticmethod
    def backward(g, idx, scores, target):
        gt = np.zeros_like(target)
        np.add.at(gt, idx, g)
        return None, gt

    @staticmethod
    def branches(value, idx, scores, target):
        return idx


class EmbeddingLookup(Op):
    """Rows from a trainable block (ids < n_special) or a frozen table.

    ``pad_id`` always maps to zeros and never receives gradient.
    """

    name = "embedding_lookup"

    @staticmethod
    def forward(special, ids, fixed, pad_id=0):
        n_special, dim = special.shape
        if fixed is not None and fixed.shape[1] != dim:
            raise ShapeError("embedding_lookup", special.shape, fixed.shape)
        out = np.zeros(ids.shape + (dim,), dtype=special.dtype)
        sp = (ids < n_special) & (ids != pad_id)
        out[sp] = special[ids[sp]]
        fx = ids >= n_special
        if fx.any():
            out[fx] = fixed[ids[fx] - n_special]
        return out, sp

    @staticmethod
    def backward(g, sp, special, ids, fixed, pad_id=0):
        gs = np.zeros_like(special)
        np.add.at(gs, ids[sp], g[sp])
        return (gs,)


class LSTM(Op):
    """One LSTM direction over a padded batch; output is (B, T, d) hidden states."""

    name = "lstm"

    @staticmethod
    def forward(X, W, U, b, lengths, reverse=False):
        if X.ndim != 3 or W.shape[0] != X.shape[2] or U.shape[1] != W.shape[1] \
                or U.shape[1] != 4 * U.shape[0] or b.shape != (W.shape[1],):
            raise ShapeError("lstm", X.shape, W.shape, U.shape, b.shape)
        if len(lengths) != X.shape[0] or (len(lengths) and (max(lengths) > X.shape[1] or min(lengths) < 0)):
            raise ShapeError("lstm", X.shape, detail=f"bad lengths {list(lengths)}")
        H, C, G = kernels.lstm_forward(X, lengths, W, U, b, reverse)
        return H, (H, C, G)

    @staticmethod
    def backward(g, cache, X, W, U, b, lengths, reverse=False):
        H, C, G = cache
        return kernels.lstm_backward(g, X, lengths, W, U, H, C, G, reverse)


# -- user-facing helpers ---------------------------------------------------

def add(a, b):
    a = as_node(a, b if isinstance(b, Node) else None)
    return apply(Add, a, as_node(b, a))


def sub(a, b):
    a = as_node(a, b if isinstance(b, Node) else None)
    return apply(Sub, a, as_node(b, a))


def mul(a, b):
    a = as_node(a, b if isinstance(b, Node) else None)
    return apply(Mul, a, as_node(b, a))


def neg(a):
    return apply(Neg, a)


def tanh(a):
    return apply(Tanh, a)


def sigmoid(a):
    return apply(Sigmoid, a)


def relu(a):
    return apply(Relu, a)


def absolute(a):
    return apply(Abs, a)


def matmul(a, b):
    a = as_node(a, b if isinstance(b, Node) else None)
    return apply(MatMul, a, as_node(b, a))


def reduce_sum(a, axis=None, keepdims=False):
    return apply(Sum, a, axis=axis, keepdims=keepdims)


def reduce_max(a, axis=None):
    return apply(Max, a, axis=axis)


def reshape(a, shape):
    return apply(Reshape, a, shape=tuple(shape))


def concat(parts, axis=0):
    return apply(Concat, *parts, axis=axis)


def getitem(a, index):
    return apply(GetItem, a, index=index)


def pad_stack(seqs):
    return apply(PadStack, *seqs)


def cosine(a, b):
    return apply(Cosine, a, b)


def cosine_matrix(A, B):
    """Plain cosine between every row pair, (M,d) x (N,d) -> (M,N)."""
    ones = as_node(np.ones((1, A.value.shape[-1])), A)
    return reshape(mp_cosine(A, B, ones), (A.value.shape[0], B.value.shape[0]))


def mp_cosine(A, B, W):
    return apply(MPCosine, A, B, W)


def mp_cosine_rows(A, B, W):
    return apply(MPCosineRows, A, B, W)


def safe_divide(num, den, eps=1e-8):
    return apply(SafeDivide, num, den, eps=eps)


def select_by_argmax(scores, target):
    return apply(SelectByArgmax, scores, target)


def embedding_lookup(special, ids, fixed=None, pad_id=0):
    return apply(EmbeddingLookup, special, ids=np.asarray(ids, dtype=np.int64),
                 fixed=fixed, pad_id=pad_id)


def lstm(X, W, U, b, lengths, reverse=False):
    return apply(LSTM, X, W, U, b, lengths=np.asarray(lengths, dtype=np.int64), reverse=reverse)
