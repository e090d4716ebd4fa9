"""Compare the JIT-compiled kernels against the pure-numpy/interpreted
fallbacks on realistic shapes.

Run: python3 benchmarks/bench_kernels.py
The fallback path can also be forced package-wide with QDECOMP_NO_NUMBA=1.
"""

from __future__ import annotations

import time

import numpy as np

from qdecomp import _kernels


def _column_softmax(rng, n, c):
    Z = rng.normal(size=(n, c))
    Y = np.exp(Z - Z.max(axis=0, keepdims=True))
    return Y / Y.sum(axis=0, keepdims=True)


def bench(label, fn, args_iter, repeats=3):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for args in args_iter:
            fn(*args)
        best = min(best, time.perf_counter() - t0)
    print(f"{label:<38} {best * 1000:9.2f} ms")
    return best


def main():
    rng = np.random.default_rng(0)

    decode_inputs = [(_column_softmax(rng, n, c),)
                     for n in (20, 40, 80) for c in (2, 3, 4)
                     for _ in range(200)]

    n_examples, n_tokens, h, c = 200, 24, 72, 3
    U = rng.normal(size=(n_examples * n_tokens, h))
    offsets = np.arange(0, (n_examples + 1) * n_tokens, n_tokens, dtype=np.int64)
    gold = rng.integers(0, n_tokens, size=(n_examples, c)).astype(np.int64)
    W = rng.normal(scale=0.01, size=(h, c))
    epoch_inputs = [(U, offsets, gold, W)] * 50

    if _kernels.HAS_NUMBA:
        # trigger compilation outside the timed region
        _kernels._decode_numba(decode_inputs[0][0])
        _kernels._pointer_epoch_numba(U, offsets, gold, W)
        t_jit = bench("decode (numba)", _kernels._decode_numba, decode_inputs)
        t_py = bench("decode (interpreted fallback)", _kernels._decode_impl,
                     decode_inputs)
        print(f"decode speedup: {t_py / t_jit:.1f}x")
        t_jit = bench("pointer epoch (numba)",
                      _kernels._pointer_epoch_numba, epoch_inputs)
        t_np = bench("pointer epoch (numpy fallback)",
                     _kernels._pointer_epoch_numpy, epoch_inputs)
        print(f"pointer epoch speedup: {t_np / t_jit:.1f}x")
    else:
        print("numba unavailable or disabled; timing fallbacks only")
        bench("decode (interpreted fallback)", _kernels._decode_impl,
              decode_inputs)
        bench("pointer epoch (numpy fallback)",
              _kernels._pointer_epoch_numpy, epoch_inputs)


if __name__ == "__main__":
    main()
