"""Numba-compiled kernels, loop form of the numpy reference versions."""

import math

import numpy as np
from numba import njit

NEG_INF = -math.inf


@njit(cache=True)
def _logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a < b:
        a, b = b, a
    return a + math.log1p(math.exp(b - a))


@njit(cache=True)
def ctc_forward_backward(log_probs, ext):
    T, C = log_probs.shape
    S = ext.shape[0]

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = log_probs[0, ext[0]]
    if S > 1:
        alpha[0, 1] = log_probs[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            acc = alpha[t - 1, s]
            if s >= 1:
                acc = _logaddexp(acc, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != ext[s - 2]:
                acc = _logaddexp(acc, alpha[t - 1, s - 2])
            alpha[t, s] = acc + log_probs[t, ext[s]]

    log_z = alpha[T - 1, S - 1]
    if S > 1:
        log_z = _logaddexp(log_z, alpha[T - 1, S - 2])
    grad = np.zeros_like(log_probs)
    if log_z == NEG_INF:
        return np.inf, grad

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = log_probs[T - 1, ext[S - 1]]
    if S > 1:
        beta[T - 1, S - 2] = log_probs[T - 1, ext[S - 2]]
    for t in range(T - 2, -1, -1):
        for s in range(S):
            acc = beta[t + 1, s]
            if s + 1 < S:
                acc = _logaddexp(acc, beta[t + 1, s + 1])
            if s + 2 < S and ext[s + 2] != ext[s]:
                acc = _logaddexp(acc, beta[t + 1, s + 2])
            beta[t, s] = acc + log_probs[t, ext[s]]

    for t in range(T):
        for s in range(S):
            g = alpha[t, s] + beta[t, s] - log_probs[t, ext[s]] - log_z
            grad[t, ext[s]] -= math.exp(g)
    return -log_z, grad


@njit(cache=True)
def levenshtein(a, b):
    n = a.shape[0]
    m = b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1).astype(np.int64)
    curr = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        curr[0] = i
        for j in range(1, m + 1):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if curr[j - 1] + 1 < best:
                best = curr[j - 1] + 1
            curr[j] = best
        for j in range(m + 1):
            prev[j] = curr[j]
    return int(prev[m])
