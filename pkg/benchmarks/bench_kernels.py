"""Time the numba kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat N] [--quick]

Prints one line per (kernel, size, backend) with the best wall time, then
the speedup of numba over numpy.  A training step on a tiny model is timed
under each backend as an end-to-end figure.
"""
import argparse
import time

import numpy as np

from mvmatch.kernels import numba_kernels, numpy_kernels


def best_of(fn, repeat):
    fn()  # warm-up (and JIT compile)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def lstm_case(mod, B, T, n, d, rng):
    X = rng.normal(size=(B, T, n))
    W = rng.normal(size=(n, 4 * d)) * 0.1
    U = rng.normal(size=(d, 4 * d)) * 0.1
    b = np.zeros(4 * d)
    lengths = rng.integers(1, T + 1, size=B).astype(np.int64)

    def run():
        H, C, G = mod.lstm_forward(X, lengths, W, U, b, False)
        mod.lstm_backward(np.ones_like(H), X, lengths, W, U, H, C, G, False)
    return run


def cosine_case(mod, M, N, d, l, rng):
    A, Bm, W = rng.normal(size=(M, d)), rng.normal(size=(N, d)), rng.normal(size=(l, d))

    def run():
        cos, na, nb = mod.mp_cosine_forward(A, Bm, W)
        mod.mp_cosine_backward(np.ones_like(cos), A, Bm, W, cos, na, nb)
    return run


def train_step(backend):
    from mvmatch import kernels, synthetic
    from mvmatch.autodiff import backward
    kernels.set_backend(backend)
    corpus = synthetic.typed_corpus(n_train=20, n_dev=1)
    model = corpus.model(synthetic.tiny_config(11, hidden=32, perspectives=8, agg_hidden=16))

    def run():
        for inst in corpus.train:
            backward(model.loss_graph(inst), model.params.values())
    return run


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--quick", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(0)

    sizes_lstm = [(4, 10, 50, 50), (16, 20, 300, 100)]
    sizes_cos = [(10, 10, 50, 20), (30, 30, 300, 20)]
    if args.quick:
        sizes_lstm, sizes_cos = sizes_lstm[:1], sizes_cos[:1]

    rows = []
    for size in sizes_lstm:
        times = {name: best_of(lstm_case(mod, *size, rng), args.repeat)
                 for name, mod in (("numba", numba_kernels), ("numpy", numpy_kernels))}
        rows.append(("lstm fwd+bwd", size, times))
    for size in sizes_cos:
        times = {name: best_of(cosine_case(mod, *size, rng), args.repeat)
                 for name, mod in (("numba", numba_kernels), ("numpy", numpy_kernels))}
        rows.append(("mp_cosine fwd+bwd", size, times))
    times = {b: best_of(train_step(b), max(1, args.repeat // 2)) for b in ("numba", "numpy")}
    rows.append(("20 loss+backward", "d=32 l=8", times))

    print(f"{'kernel':20s} {'size':22s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}")
    for kernel, size, t in rows:
        print(f"{kernel:20s} {str(size):22s} {1e3 * t['numba']:10.3f} {1e3 * t['numpy']:10.3f} "
              f"{t['numpy'] / t['numba']:8.2f}")


if __name__ == "__main__":
    main()
