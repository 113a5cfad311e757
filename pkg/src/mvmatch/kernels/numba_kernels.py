"""numba versions of the hot kernels; signatures mirror numpy_kernels."""
from __future__ import annotations

import math

import numpy as np
from numba import njit

NORM_EPS = 1e-12

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _sig(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(**_JIT)
def _lstm_forward(XW, lengths, U, b, reverse):
    # XW holds the input projections X @ W for every step; only the
    # recurrence runs here.
    B, T, _ = XW.shape
    d = U.shape[0]
    H = np.zeros((B, T, d), dtype=XW.dtype)
    C = np.zeros((B, T, d), dtype=XW.dtype)
    G = np.zeros((B, T, 4 * d), dtype=XW.dtype)
    z = np.empty(4 * d, dtype=XW.dtype)
    h = np.empty(d, dtype=XW.dtype)
    c = np.empty(d, dtype=XW.dtype)
    for k in range(B):
        L = lengths[k]
        h[:] = 0.0
        c[:] = 0.0
        for s in range(L):
            p = L - 1 - s if reverse else s
            for j in range(4 * d):
                z[j] = XW[k, p, j] + b[j]
            for a in range(d):
                ha = h[a]
                if ha != 0.0:
                    for j in range(4 * d):
                        z[j] += ha * U[a, j]
            for j in range(d):
                ig = _sig(z[j])
                fg = _sig(z[d + j])
                og = _sig(z[2 * d + j])
                gg = math.tanh(z[3 * d + j])
                cn = fg * c[j] + ig * gg
                c[j] = cn
                G[k, p, j] = ig
                G[k, p, d + j] = fg
                G[k, p, 2 * d + j] = og
                G[k, p, 3 * d + j] = gg
                C[k, p, j] = cn
                h[j] = og * math.tanh(cn)
                H[k, p, j] = h[j]
    return H, C, G


@njit(**_JIT)
def _lstm_backward(dH, lengths, U, H, C, G, reverse):
    # Returns the pre-activation gradients dZ (zero on padding) and dU;
    # the input-side products are left to the caller.
    B, T, _ = dH.shape
    d = U.shape[0]
    dZ = np.zeros((B, T, 4 * d), dtype=dH.dtype)
    dU = np.zeros_like(U)
    dh = np.empty(d, dtype=dH.dtype)
    dc = np.empty(d, dtype=dH.dtype)
    for k in range(B):
        L = lengths[k]
        dh[:] = 0.0
        dc[:] = 0.0
        for s in range(L - 1, -1, -1):
            p = L - 1 - s if reverse else s
            q = p + 1 if reverse else p - 1
            for j in range(d):
                ig = G[k, p, j]
                fg = G[k, p, d + j]
                og = G[k, p, 2 * d + j]
                gg = G[k, p, 3 * d + j]
                tc = math.tanh(C[k, p, j])
                cp = C[k, q, j] if s > 0 else 0.0
                dht = dH[k, p, j] + dh[j]
                dct = dc[j] + dht * og * (1.0 - tc * tc)
                dZ[k, p, j] = dct * gg * ig * (1.0 - ig)
                dZ[k, p, d + j] = dct * cp * fg * (1.0 - fg)
                dZ[k, p, 2 * d + j] = dht * tc * og * (1.0 - og)
                dZ[k, p, 3 * d + j] = dct * ig * (1.0 - gg * gg)
                dc[j] = dct * fg
            for a in range(d):
                hp = H[k, q, a] if s > 0 else 0.0
                acc = 0.0
                for j in range(4 * d):
                    g = dZ[k, p, j]
                    dU[a, j] += hp * g
                    acc += g * U[a, j]
                dh[a] = acc
    return dZ, dU


@njit(**_JIT)
def _mp_cosine_forward(A, B, W):
    M, D = A.shape
    N = B.shape[0]
    L = W.shape[0]
    na = np.zeros((M, L), dtype=A.dtype)
    nb = np.zeros((N, L), dtype=A.dtype)
    cos = np.zeros((M, N, L), dtype=A.dtype)
    for k in range(L):
        for m in range(M):
            acc = 0.0
            for e in range(D):
                w = W[k, e]
                acc += w * w * A[m, e] * A[m, e]
            na[m, k] = math.sqrt(acc)
        for q in range(N):
            acc = 0.0
            for e in range(D):
                w = W[k, e]
                acc += w * w * B[q, e] * B[q, e]
            nb[q, k] = math.sqrt(acc)
    for m in range(M):
        for q in range(N):
            for k in range(L):
                if na[m, k] < NORM_EPS or nb[q, k] < NORM_EPS:
                    continue
                acc = 0.0
                for e in range(D):
                    w = W[k, e]
                    acc += w * w * A[m, e] * B[q, e]
                cos[m, q, k] = acc / (na[m, k] * nb[q, k])
    return cos, na, nb


@njit(**_JIT)
def _mp_cosine_backward(G, A, B, W, cos, na, nb):
    M, D = A.shape
    N = B.shape[0]
    L = W.shape[0]
    dA = np.zeros_like(A)
    dB = np.zeros_like(B)
    dW = np.zeros_like(W)
    for m in range(M):
        for q in range(N):
            for k in range(L):
                a_n = na[m, k]
                b_n = nb[q, k]
                if a_n < NORM_EPS or b_n < NORM_EPS:
                    continue
                g = G[m, q, k]
                if g == 0.0:
                    continue
                r = g / (a_n * b_n)
                cg = g * cos[m, q, k]
                ca = cg / (a_n * a_n)
                cb = cg / (b_n * b_n)
                for e in range(D):
                    w = W[k, e]
                    w2 = w * w
                    a = A[m, e]
                    bb = B[q, e]
                    dA[m, e] += w2 * (r * bb - ca * a)
                    dB[q, e] += w2 * (r * a - cb * bb)
                    dW[k, e] += w * (2.0 * r * a * bb - ca * a * a - cb * bb * bb)
    return dA, dB, dW


def lstm_forward(X, lengths, W, U, b, reverse):
    XW = np.ascontiguousarray(X @ W)
    return _lstm_forward(XW, np.asarray(lengths, dtype=np.int64), np.ascontiguousarray(U),
                         np.ascontiguousarray(b), bool(reverse))


def lstm_backward(dH, X, lengths, W, U, H, C, G, reverse):
    dZ, dU = _lstm_backward(np.ascontiguousarray(dH), np.asarray(lengths, dtype=np.int64),
                            np.ascontiguousarray(U), H, C, G, bool(reverse))
    dX = dZ @ W.T
    dW = np.tensordot(X, dZ, axes=([0, 1], [0, 1]))
    return dX, dW, dU, dZ.sum(axis=(0, 1))


def mp_cosine_forward(A, B, W):
    return _mp_cosine_forward(np.ascontiguousarray(A), np.ascontiguousarray(B),
                              np.ascontiguousarray(W))


def mp_cosine_backward(G, A, B, W, cos, na, nb):
    return _mp_cosine_backward(np.ascontiguousarray(G), np.ascontiguousarray(A),
                               np.ascontiguousarray(B), np.ascontiguousarray(W), cos, na, nb)
