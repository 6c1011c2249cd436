"""Pure-numpy kernels. Reference semantics for the numba twins.

Both implementations must agree to float rounding; the backend module picks
one at import time.
"""

import numpy as np

NEG_INF = -np.inf


def ctc_forward_backward(log_probs: np.ndarray, ext: np.ndarray):
    """Forward-backward over a blank-augmented label sequence, in log space.

    log_probs: (T, C) per-frame log category probabilities, rows normalized.
    ext: blank-augmented label ids, length S = 2*L + 1.

    Returns (loss, grad) where loss = -log p(labels | log_probs) and grad is
    d loss / d log_probs, shape (T, C). An impossible target gives
    loss = +inf and a zero gradient.
    """
    T, C = log_probs.shape
    S = ext.shape[0]
    emit = log_probs[:, ext]  # (T, S)

    # skip transition s-2 -> s is legal only when the labels differ
    # (blank positions always repeat, so this also blocks blank skips)
    can_skip = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip[2:] = ext[2:] != ext[:-2]

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = np.logaddexp(prev, np.concatenate(([NEG_INF], prev[:-1])))
        if S > 2:
            skip = np.concatenate(([NEG_INF, NEG_INF], prev[:-2]))
            acc = np.logaddexp(acc, np.where(can_skip, skip, NEG_INF))
        alpha[t] = acc + emit[t]

    log_z = alpha[T - 1, S - 1]
    if S > 1:
        log_z = np.logaddexp(log_z, alpha[T - 1, S - 2])
    if log_z == NEG_INF:
        return np.inf, np.zeros_like(log_probs)

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = emit[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = emit[T - 1, S - 2]
    # skip s -> s+2 mirrors can_skip shifted down two states
    can_skip_fwd = np.zeros(S, dtype=bool)
    if S > 2:
        can_skip_fwd[:-2] = can_skip[2:]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = np.logaddexp(nxt, np.concatenate((nxt[1:], [NEG_INF])))
        if S > 2:
            skip = np.concatenate((nxt[2:], [NEG_INF, NEG_INF]))
            acc = np.logaddexp(acc, np.where(can_skip_fwd, skip, NEG_INF))
        beta[t] = acc + emit[t]

    # occupancy of state s at frame t; alpha and beta both include the
    # emission at t, so divide it out once
    gamma = alpha + beta - emit - log_z
    grad = np.zeros_like(log_probs)
    occupancy = np.exp(gamma)
    for s in range(S):
        grad[:, ext[s]] -= occupancy[:, s]
    return float(-log_z), grad


def levenshtein(a: np.ndarray, b: np.ndarray) -> int:
    """Unit-cost edit distance between two integer sequences."""
    n, m = len(a), len(b)
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1, dtype=np.int64)
    curr = np.empty(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        curr[0] = i
        sub = prev[:-1] + (b != a[i - 1])
        # deletions depend on curr left-to-right, so this stays a loop
        for j in range(1, m + 1):
            best = prev[j] + 1
            if curr[j - 1] + 1 < best:
                best = curr[j - 1] + 1
            if sub[j - 1] < best:
                best = sub[j - 1]
            curr[j] = best
        prev, curr = curr, prev
    return int(prev[m])
