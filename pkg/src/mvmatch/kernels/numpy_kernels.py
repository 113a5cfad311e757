"""Vectorised numpy kernels (reference path, always available)."""
from __future__ import annotations

import numpy as np

NORM_EPS = 1e-12


def sigmoid(x):
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _positions(lengths, step, reverse):
    if reverse:
        return lengths - 1 - step
    return np.full_like(lengths, step)


def lstm_forward(X, lengths, W, U, b, reverse):
    """Run one LSTM direction over a padded batch.

    X is (B, T, n), W (n, 4d), U (d, 4d), b (4d,), gate order i, f, o, c.
    Position t of sequence k is only visited when t < lengths[k]; the
    reverse direction starts at lengths[k] - 1.  Returns hidden states,
    cell states and post-activation gates, all zero on padding.
    """
    B, T, _ = X.shape
    d = U.shape[0]
    H = np.zeros((B, T, d), dtype=X.dtype)
    C = np.zeros((B, T, d), dtype=X.dtype)
    G = np.zeros((B, T, 4 * d), dtype=X.dtype)
    h = np.zeros((B, d), dtype=X.dtype)
    c = np.zeros((B, d), dtype=X.dtype)
    XW = X @ W + b
    lengths = np.asarray(lengths, dtype=np.int64)
    for s in range(T):
        rows = np.nonzero(s < lengths)[0]
        if rows.size == 0:
            break
        p = _positions(lengths[rows], s, reverse)
        z = XW[rows, p] + h[rows] @ U
        gates = np.empty_like(z)
        gates[:, :3 * d] = sigmoid(z[:, :3 * d])
        gates[:, 3 * d:] = np.tanh(z[:, 3 * d:])
        i, f, o, g = gates[:, :d], gates[:, d:2 * d], gates[:, 2 * d:3 * d], gates[:, 3 * d:]
        c_new = f * c[rows] + i * g
        h_new = o * np.tanh(c_new)
        H[rows, p] = h_new
        C[rows, p] = c_new
        G[rows, p] = gates
        h[rows] = h_new
        c[rows] = c_new
    return H, C, G


def lstm_backward(dH, X, lengths, W, U, H, C, G, reverse):
    B, T, n = X.shape
    d = U.shape[0]
    lengths = np.asarray(lengths, dtype=np.int64)
    dXW = np.zeros((B, T, 4 * d), dtype=X.dtype)
    dU = np.zeros_like(U)
    dh = np.zeros((B, d), dtype=X.dtype)
    dc = np.zeros((B, d), dtype=X.dtype)
    for s in range(T - 1, -1, -1):
        rows = np.nonzero(s < lengths)[0]
        if rows.size == 0:
            continue
        p = _positions(lengths[rows], s, reverse)
        gates = G[rows, p]
        i, f, o, g = gates[:, :d], gates[:, d:2 * d], gates[:, 2 * d:3 * d], gates[:, 3 * d:]
        c_t = C[rows, p]
        if s > 0:
            q = p + 1 if reverse else p - 1
            h_prev = H[rows, q]
            c_prev = C[rows, q]
        else:
            h_prev = np.zeros((rows.size, d), dtype=X.dtype)
            c_prev = h_prev
        dh_t = dH[rows, p] + dh[rows]
        tc = np.tanh(c_t)
        dct = dc[rows] + dh_t * o * (1.0 - tc * tc)
        dz = np.empty((rows.size, 4 * d), dtype=X.dtype)
        dz[:, :d] = dct * g * i * (1.0 - i)
        dz[:, d:2 * d] = dct * c_prev * f * (1.0 - f)
        dz[:, 2 * d:3 * d] = dh_t * tc * o * (1.0 - o)
        dz[:, 3 * d:] = dct * i * (1.0 - g * g)
        dc[rows] = dct * f
        dXW[rows, p] = dz
        dU += h_prev.T @ dz
        dh[rows] = dz @ U.T
    dX = dXW @ W.T
    flat = dXW.reshape(-1, 4 * d)
    dW = X.reshape(-1, n).T @ flat
    db = flat.sum(axis=0)
    return dX, dW, dU, db


def mp_cosine_forward(A, B, W):
    """Multi-perspective cosine between every row of A and every row of B.

    Returns cos (M, N, l) plus the weighted norms (M, l), (N, l).  Pairs
    where either weighted norm is below NORM_EPS score 0.
    """
    W2 = W * W
    na = np.sqrt((A * A) @ W2.T)
    nb = np.sqrt((B * B) @ W2.T)
    num = np.einsum("md,kd,nd->mnk", A, W2, B, optimize=True)
    den = na[:, None, :] * nb[None, :, :]
    valid = (na[:, None, :] >= NORM_EPS) & (nb[None, :, :] >= NORM_EPS)
    cos = np.where(valid, num / np.where(valid, den, 1.0), 0.0)
    return cos, na, nb


def mp_cosine_backward(G, A, B, W, cos, na, nb):
    W2 = W * W
    valid = (na[:, None, :] >= NORM_EPS) & (nb[None, :, :] >= NORM_EPS)
    safe_na = np.where(na >= NORM_EPS, na, 1.0)
    safe_nb = np.where(nb >= NORM_EPS, nb, 1.0)
    R = np.where(valid, G / (safe_na[:, None, :] * safe_nb[None, :, :]), 0.0)
    Cg = np.where(valid, G * cos, 0.0)
    ca = Cg.sum(axis=1) / (safe_na * safe_na)   # (M, l)
    cb = Cg.sum(axis=0) / (safe_nb * safe_nb)   # (N, l)
    RB = np.einsum("mnk,nd->mkd", R, B)
    RA = np.einsum("mnk,md->nkd", R, A)
    dA = np.einsum("mkd,kd->md", RB, W2) - A * (ca @ W2)
    dB = np.einsum("nkd,kd->nd", RA, W2) - B * (cb @ W2)
    cross = np.einsum("mkd,md->kd", RB, A)
    dW = W * (2.0 * cross - ca.T @ (A * A) - cb.T @ (B * B))
    return dA, dB, dW
