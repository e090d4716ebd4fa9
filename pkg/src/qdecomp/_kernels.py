"""Hot numeric kernels: constrained joint-argmax decoding and the pointer
training epoch.

Both carry a numba ``@njit`` implementation and a pure-numpy fallback with
identical semantics.  Set ``QDECOMP_NO_NUMBA=1`` (or leave numba uninstalled)
to force the fallback.  ``benchmarks/bench_kernels.py`` compares the two.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("QDECOMP_NO_NUMBA", "").strip() not in ("", "0")

try:  # pragma: no cover - import guard
    if _DISABLED:
        raise ImportError("numba disabled via QDECOMP_NO_NUMBA")
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


def _decode_impl(Y):
    # DP over positions x columns.  Products are accumulated left-to-right so
    # values match a left-associated brute-force enumeration bit for bit;
    # ties are broken toward the lexicographically smallest index tuple.
    n, c = Y.shape
    val = Y[:, 0].copy()
    tup = np.zeros((n, c), dtype=np.int64)
    for i in range(n):
        tup[i, 0] = i
    for j in range(1, c):
        new_val = np.empty(n, dtype=np.float64)
        new_tup = np.zeros((n, c), dtype=np.int64)
        best_v = -1.0
        best_t = np.zeros(c, dtype=np.int64)
        for i in range(n):
            take = val[i] > best_v
            if not take and val[i] == best_v:
                for q in range(j):
                    if tup[i, q] < best_t[q]:
                        take = True
                        break
                    if tup[i, q] > best_t[q]:
                        break
            if take:
                best_v = val[i]
                for q in range(j):
                    best_t[q] = tup[i, q]
            new_val[i] = best_v * Y[i, j]
            for q in range(j):
                new_tup[i, q] = best_t[q]
            new_tup[i, j] = i
        val = new_val
        tup = new_tup
    best = 0
    for i in range(1, n):
        take = val[i] > val[best]
        if not take and val[i] == val[best]:
            for q in range(c):
                if tup[i, q] < tup[best, q]:
                    take = True
                    break
                if tup[i, q] > tup[best, q]:
                    break
        if take:
            best = i
    return tup[best].copy()


def _pointer_epoch_impl(U, offsets, gold, W):
    # Full-batch loss and gradient for summed per-column cross-entropy.
    # U is the row-stacked embedding of all examples; offsets delimits them.
    h, c = W.shape
    m = offsets.shape[0] - 1
    grad = np.zeros((h, c), dtype=np.float64)
    loss = 0.0
    for e in range(m):
        s, t = offsets[e], offsets[e + 1]
        Ue = U[s:t]
        Z = Ue @ W
        n = t - s
        for j in range(c):
            zmax = Z[0, j]
            for i in range(1, n):
                if Z[i, j] > zmax:
                    zmax = Z[i, j]
            denom = 0.0
            for i in range(n):
                denom += np.exp(Z[i, j] - zmax)
            g = gold[e, j]
            for i in range(n):
                p = np.exp(Z[i, j] - zmax) / denom
                delta = p - (1.0 if i == g else 0.0)
                for k in range(h):
                    grad[k, j] += Ue[i, k] * delta
            loss -= (Z[g, j] - zmax) - np.log(denom)
    return loss, grad


if HAS_NUMBA:  # pragma: no branch
    _decode_numba = njit(cache=True)(_decode_impl)
    _pointer_epoch_numba = njit(cache=True)(_pointer_epoch_impl)


def decode_kernel(Y: np.ndarray) -> np.ndarray:
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if HAS_NUMBA:
        return _decode_numba(Y)
    return _decode_impl(Y)


def pointer_epoch(U: np.ndarray, offsets: np.ndarray, gold: np.ndarray,
                  W: np.ndarray) -> tuple[float, np.ndarray]:
    U = np.ascontiguousarray(U, dtype=np.float64)
    offsets = np.ascontiguousarray(offsets, dtype=np.int64)
    gold = np.ascontiguousarray(gold, dtype=np.int64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    if HAS_NUMBA:
        return _pointer_epoch_numba(U, offsets, gold, W)
    return _pointer_epoch_numpy(U, offsets, gold, W)


def _pointer_epoch_numpy(U, offsets, gold, W):
    # Vectorized per example instead of the scalar loops the JIT prefers.
    h, c = W.shape
    grad = np.zeros((h, c))
    loss = 0.0
    for e in range(offsets.shape[0] - 1):
        Ue = U[offsets[e]:offsets[e + 1]]
        Z = Ue @ W
        Z = Z - Z.max(axis=0, keepdims=True)
        P = np.exp(Z)
        P /= P.sum(axis=0, keepdims=True)
        delta = P.copy()
        g = gold[e]
        delta[g, np.arange(c)] -= 1.0
        grad += Ue.T @ delta
        loss -= np.log(P[g, np.arange(c)]).sum()
    return loss, grad
