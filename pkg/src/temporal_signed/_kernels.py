"""Hot numeric kernels with numba and pure-numpy implementations.

The backend is chosen once at import time from the ``TEMPORAL_SIGNED_NUMBA``
environment variable: ``"1"`` (default when numba imports) selects the
``@njit`` kernels, ``"0"`` forces the numpy fallbacks. Both backends are
always importable by name (``*_numpy`` / ``*_numba``) so tests and the
benchmark can compare them directly.

Kernels
-------
attention_forward / attention_backward
    Batched scaled dot-product attention ``softmax(q k^T * scale + bias) v``
    over arrays of shape (B, S, D) with an additive (S, S) bias shared by
    every batch entry. Used for backbone node attention (B = heads,
    S = nodes) and temporal attention (B = nodes * heads, S = snapshots).
common_neighbor_counts
    Number of common neighbours for each listed pair, from a CSR
    adjacency with sorted column indices.
mann_whitney_auc
    Tie-aware rank-sum AUC.
"""

from __future__ import annotations

import os

import numpy as np
import scipy.sparse as sp

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


_flag = os.environ.get("TEMPORAL_SIGNED_NUMBA", "1").strip().lower()
USE_NUMBA = HAVE_NUMBA and _flag not in ("0", "false", "no", "off", "")
BACKEND = "numba" if USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# attention
# ---------------------------------------------------------------------------

def attention_forward_numpy(q, k, v, bias, scale):
    logits = np.matmul(q, np.swapaxes(k, -1, -2)) * scale + bias
    logits -= logits.max(axis=-1, keepdims=True)
    probs = np.exp(logits)
    probs /= probs.sum(axis=-1, keepdims=True)
    return np.matmul(probs, v), probs


def attention_backward_numpy(q, k, v, probs, dout, scale):
    dv = np.matmul(np.swapaxes(probs, -1, -2), dout)
    dp = np.matmul(dout, np.swapaxes(v, -1, -2))
    dlogits = probs * (dp - (dp * probs).sum(axis=-1, keepdims=True))
    dq = np.matmul(dlogits, k) * scale
    dk = np.matmul(np.swapaxes(dlogits, -1, -2), q) * scale
    return dq, dk, dv, dlogits.sum(axis=0)


@njit(cache=True)
def _attention_forward_nb(q, k, v, bias, scale):
    B, S, D = q.shape
    out = np.zeros((B, S, D))
    probs = np.empty((B, S, S))
    for b in range(B):
        for i in range(S):
            m = -np.inf
            for j in range(S):
                acc = 0.0
                for c in range(D):
                    acc += q[b, i, c] * k[b, j, c]
                x = acc * scale + bias[i, j]
                probs[b, i, j] = x
                if x > m:
                    m = x
            tot = 0.0
            for j in range(S):
                e = np.exp(probs[b, i, j] - m)
                probs[b, i, j] = e
                tot += e
            for j in range(S):
                p = probs[b, i, j] / tot
                probs[b, i, j] = p
                for c in range(D):
                    out[b, i, c] += p * v[b, j, c]
    return out, probs


@njit(cache=True)
def _attention_backward_nb(q, k, v, probs, dout, scale):
    B, S, D = q.shape
    dq = np.zeros((B, S, D))
    dk = np.zeros((B, S, D))
    dv = np.zeros((B, S, D))
    dbias = np.zeros((S, S))
    dp = np.empty(S)
    for b in range(B):
        for i in range(S):
            dot = 0.0
            for j in range(S):
                acc = 0.0
                p = probs[b, i, j]
                for c in range(D):
                    acc += dout[b, i, c] * v[b, j, c]
                    dv[b, j, c] += p * dout[b, i, c]
                dp[j] = acc
                dot += acc * p
            for j in range(S):
                g = probs[b, i, j] * (dp[j] - dot)
                dbias[i, j] += g
                gs = g * scale
                for c in range(D):
                    dq[b, i, c] += gs * k[b, j, c]
                    dk[b, j, c] += gs * q[b, i, c]
    return dq, dk, dv, dbias


@njit(cache=True)
def _softmax_grad_nb(probs, dp):
    # in place: dp <- probs * (dp - rowsum(dp * probs)); returns the batch-summed result too
    B, S, _ = probs.shape
    dbias = np.zeros((S, S))
    for b in range(B):
        for i in range(S):
            dot = 0.0
            for j in range(S):
                dot += dp[b, i, j] * probs[b, i, j]
            for j in range(S):
                g = probs[b, i, j] * (dp[b, i, j] - dot)
                dp[b, i, j] = g
                dbias[i, j] += g
    return dp, dbias


# Above this sequence length the S x S products go through BLAS and numba
# only fuses the softmax gradient; below it the fully fused loops win.
FUSED_MAX_SEQ = 64


def attention_forward_numba(q, k, v, bias, scale):
    q, k, v = np.ascontiguousarray(q), np.ascontiguousarray(k), np.ascontiguousarray(v)
    bias = np.ascontiguousarray(bias, dtype=np.float64)
    if q.shape[1] <= FUSED_MAX_SEQ:
        return _attention_forward_nb(q, k, v, bias, float(scale))
    # long sequences: numpy's vectorised exp beats a scalar loop
    return attention_forward_numpy(q, k, v, bias, scale)


def attention_backward_numba(q, k, v, probs, dout, scale):
    q, k, v = np.ascontiguousarray(q), np.ascontiguousarray(k), np.ascontiguousarray(v)
    probs, dout = np.ascontiguousarray(probs), np.ascontiguousarray(dout)
    if q.shape[1] <= FUSED_MAX_SEQ:
        return _attention_backward_nb(q, k, v, probs, dout, float(scale))
    dv = np.matmul(np.swapaxes(probs, -1, -2), dout)
    dlogits, dbias = _softmax_grad_nb(probs, np.matmul(dout, np.swapaxes(v, -1, -2)))
    dq = np.matmul(dlogits, k) * scale
    dk = np.matmul(np.swapaxes(dlogits, -1, -2), q) * scale
    return dq, dk, dv, dbias


# ---------------------------------------------------------------------------
# common neighbours
# ---------------------------------------------------------------------------

def common_neighbor_counts_numpy(indptr, indices, src, dst):
    n = indptr.size - 1
    a = sp.csr_matrix((np.ones(indices.size), indices, indptr), shape=(n, n))
    a2 = (a @ a).tocsr()
    return np.asarray(a2[src, dst]).ravel().astype(np.int64)


@njit(cache=True)
def _common_neighbor_counts_nb(indptr, indices, src, dst):
    out = np.zeros(src.size, dtype=np.int64)
    for e in range(src.size):
        i, ie = indptr[src[e]], indptr[src[e] + 1]
        j, je = indptr[dst[e]], indptr[dst[e] + 1]
        c = 0
        while i < ie and j < je:
            a = indices[i]
            b = indices[j]
            if a == b:
                c += 1
                i += 1
                j += 1
            elif a < b:
                i += 1
            else:
                j += 1
        out[e] = c
    return out


def common_neighbor_counts_numba(indptr, indices, src, dst):
    return _common_neighbor_counts_nb(np.asarray(indptr, np.int64), np.asarray(indices, np.int64),
                                      np.asarray(src, np.int64), np.asarray(dst, np.int64))


# ---------------------------------------------------------------------------
# rank-sum AUC
# ---------------------------------------------------------------------------

def mann_whitney_auc_numpy(scores, positive):
    _, inv, counts = np.unique(scores, return_inverse=True, return_counts=True)
    upper = np.cumsum(counts).astype(np.float64)
    ranks = (upper - (counts - 1) / 2.0)[inv.ravel()]
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


@njit(cache=True)
def _mann_whitney_auc_nb(sorted_scores, sorted_positive):
    n = sorted_scores.size
    rank_sum = 0.0
    n_pos = 0
    i = 0
    while i < n:
        j = i
        while j + 1 < n and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = (i + j + 2) / 2.0
        for t in range(i, j + 1):
            if sorted_positive[t]:
                rank_sum += avg
                n_pos += 1
        i = j + 1
    n_neg = n - n_pos
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def mann_whitney_auc_numba(scores, positive):
    scores = np.asarray(scores, np.float64)
    # numpy sorts and gathers; the tie-aware rank sweep runs compiled over contiguous data.
    # Order within a tie block is irrelevant because the block shares one average rank.
    order = np.argsort(scores)
    return float(_mann_whitney_auc_nb(scores[order], np.asarray(positive, np.bool_)[order]))


IMPLEMENTATIONS = {
    "numpy": {
        "attention_forward": attention_forward_numpy,
        "attention_backward": attention_backward_numpy,
        "common_neighbor_counts": common_neighbor_counts_numpy,
        "mann_whitney_auc": mann_whitney_auc_numpy,
    },
    "numba": {
        "attention_forward": attention_forward_numba,
        "attention_backward": attention_backward_numba,
        "common_neighbor_counts": common_neighbor_counts_numba,
        "mann_whitney_auc": mann_whitney_auc_numba,
    },
}

_active = IMPLEMENTATIONS[BACKEND]
attention_forward = _active["attention_forward"]
attention_backward = _active["attention_backward"]
common_neighbor_counts = _active["common_neighbor_counts"]
mann_whitney_auc = _active["mann_whitney_auc"]
