"""Brute-force loop reimplementations used as test oracles.

Plain Python floats and explicit loops; nothing here touches the autodiff
graph or the kernels.
"""
import math

EPS = 1e-12
ATT_EPS = 1e-8


def cos(v, w):
    nv = math.sqrt(sum(x * x for x in v))
    nw = math.sqrt(sum(x * x for x in w))
    if nv < EPS or nw < EPS:
        return 0.0
    return sum(a * b for a, b in zip(v, w)) / (nv * nw)


def fm(v1, v2, W):
    return [cos([w * a for w, a in zip(row, v1)], [w * b for w, b in zip(row, v2)]) for row in W]


def full(Af, Ab, Tf, Tb, W1, W2):
    return [fm(Af[i], Tf[-1], W1) + fm(Ab[i], Tb[0], W2) for i in range(len(Af))]


def maxpool(Af, Ab, Tf, Tb, W3, W4):
    out = []
    for i in range(len(Af)):
        row = []
        for A, T, W in ((Af, Tf, W3), (Ab, Tb, W4)):
            per_j = [fm(A[i], T[j], W) for j in range(len(T))]
            row += [max(p[k] for p in per_j) for k in range(len(W))]
        out.append(row)
    return out


def _att_mean(a, T):
    alpha = [cos(a, t) for t in T]
    s = sum(alpha)
    if abs(s) < ATT_EPS:
        s = -ATT_EPS if s < 0 else ATT_EPS
    return [sum(alpha[j] * T[j][e] for j in range(len(T))) / s for e in range(len(a))]


def attentive(Af, Ab, Tf, Tb, W5, W6):
    return [fm(Af[i], _att_mean(Af[i], Tf), W5) + fm(Ab[i], _att_mean(Ab[i], Tb), W6)
            for i in range(len(Af))]


def _argmax_vec(a, T):
    best, arg = -math.inf, 0
    for j, t in enumerate(T):
        c = cos(a, t)
        if c > best:
            best, arg = c, j
    return T[arg]


def max_attentive(Af, Ab, Tf, Tb, W7, W8):
    return [fm(Af[i], _argmax_vec(Af[i], Tf), W7) + fm(Ab[i], _argmax_vec(Ab[i], Tb), W8)
            for i in range(len(Af))]


def directed(Af, Ab, Tf, Tb, Ws):
    parts = [full(Af, Ab, Tf, Tb, Ws[0], Ws[1]), maxpool(Af, Ab, Tf, Tb, Ws[2], Ws[3]),
             attentive(Af, Ab, Tf, Tb, Ws[4], Ws[5]), max_attentive(Af, Ab, Tf, Tb, Ws[6], Ws[7])]
    return [sum((p[i] for p in parts), []) for i in range(len(Af))]


def bimpm(P, Q, Ws):
    """P and Q are (forward_states, backward_states) pairs of nested lists."""
    return directed(P[0], P[1], Q[0], Q[1], Ws), directed(Q[0], Q[1], P[0], P[1], Ws)


def _sigmoid(x):
    return 1.0 / (1.0 + math.exp(-x))


def lstm_step(x, h, c, P):
    """P maps 'W_i'..'U_c', 'b_i'..'b_c' to nested lists; row-vector convention x @ W."""
    d = len(h)

    def gate(g, act):
        return [act(sum(x[a] * P["W_" + g][a][j] for a in range(len(x)))
                    + sum(h[a] * P["U_" + g][a][j] for a in range(d)) + P["b_" + g][j])
                for j in range(d)]

    i = gate("i", _sigmoid)
    f = gate("f", _sigmoid)
    o = gate("o", _sigmoid)
    g = gate("c", math.tanh)
    c_new = [f[j] * c[j] + i[j] * g[j] for j in range(d)]
    h_new = [o[j] * math.tanh(c_new[j]) for j in range(d)]
    return h_new, c_new


def run_lstm(xs, P, d):
    h, c = [0.0] * d, [0.0] * d
    out = []
    for x in xs:
        h, c = lstm_step(x, h, c, P)
        out.append(h)
    return out


def bilstm(xs, Pf, Pb, d):
    fwd = run_lstm(xs, Pf, d)
    bwd = run_lstm(xs[::-1], Pb, d)[::-1]
    return fwd, bwd
