"""CTC loss, greedy decoding, and a brute-force enumeration oracle.

The blank category is always the LAST column of a posterior grid; targets
contain phoneme ids only, never blank. All recursions run in log space.
"""

import itertools

import numpy as np

from . import autodiff as ad
from . import backend
from .autodiff import Node
from .errors import DimensionError, InfeasibleTargetError, OracleSizeError

ORACLE_PATH_BOUND = 10**7


def check_labels(labels, n_categories: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1:
        raise DimensionError("label sequence must be 1-D")
    if labels.size and (labels.min() < 0 or labels.max() >= n_categories - 1):
        raise DimensionError(
            f"label ids must lie in [0, {n_categories - 1}), got "
            f"[{labels.min()}, {labels.max()}]"
        )
    return labels


def min_frames(labels) -> int:
    """Shortest frame count that can emit the sequence: length plus one
    mandatory blank per adjacent repeat."""
    labels = np.asarray(labels)
    if labels.size == 0:
        return 0
    return int(labels.size + np.sum(labels[1:] == labels[:-1]))


def extended_labels(labels, blank: int) -> np.ndarray:
    ext = np.full(2 * len(labels) + 1, blank, dtype=np.int64)
    ext[1::2] = labels
    return ext


def ctc_loss(logits: Node, labels) -> Node:
    """-log p(labels | softmax(logits)) as a scalar graph node.

    logits: (T x (K+1)) node, blank in the last column. Gradients flow back
    through an internal log-softmax.
    """
    T, C = logits.value.shape
    labels = check_labels(labels, C)
    need = min_frames(labels)
    if T < need:
        raise InfeasibleTargetError(
            f"target needs at least {need} frames, grid has {T}"
        )
    log_probs = ad.log_softmax_rows(logits)
    ext = extended_labels(labels, blank=C - 1)
    loss, grad = backend.ctc_forward_backward(log_probs.value, ext)
    out = Node(np.array([[loss]]), (log_probs,))

    def bwd(g):
        if log_probs.grad is None:
            log_probs.grad = np.zeros_like(log_probs.value)
        log_probs.grad += g[0, 0] * grad

    out.bwd = bwd
    return out


def ctc_loss_value(log_probs: np.ndarray, labels) -> float:
    """Loss only, straight from normalized log-probabilities."""
    T, C = log_probs.shape
    labels = check_labels(labels, C)
    if T < min_frames(labels):
        raise InfeasibleTargetError("target longer than representable")
    loss, _ = backend.ctc_forward_backward(
        log_probs, extended_labels(labels, blank=C - 1)
    )
    return loss


def collapse(frame_labels, blank: int) -> list:
    """Merge adjacent repeats, then delete blanks."""
    out = []
    prev = None
    for lab in frame_labels:
        if lab != prev:
            if lab != blank:
                out.append(int(lab))
            prev = lab
    return out


def greedy_decode(posteriors: np.ndarray) -> list:
    """Per-frame argmax collapsed under CTC semantics.

    Works on probabilities or log-probabilities; ties break to the lowest
    category index. Blank is the last column.
    """
    posteriors = np.asarray(posteriors)
    if posteriors.ndim != 2:
        raise DimensionError("posterior grid must be 2-D")
    blank = posteriors.shape[1] - 1
    return collapse(np.argmax(posteriors, axis=1), blank)


# ---------------------------------------------------------------------------
# enumeration oracle

_collapse_cache: dict = {}


def _paths_by_collapse(T: int, C: int):
    """All length-T paths over C symbols grouped by their collapsed form."""
    key = (T, C)
    cached = _collapse_cache.get(key)
    if cached is not None:
        return cached
    blank = C - 1
    paths = np.array(list(itertools.product(range(C), repeat=T)), dtype=np.int64)
    groups: dict = {}
    for index, path in enumerate(paths):
        groups.setdefault(tuple(collapse(path, blank)), []).append(index)
    groups = {k: np.asarray(v, dtype=np.int64) for k, v in groups.items()}
    if len(_collapse_cache) > 32:
        _collapse_cache.clear()
    _collapse_cache[key] = (paths, groups)
    return paths, groups


def brute_force_ctc(log_probs: np.ndarray, labels) -> float:
    """-log of the summed probability of every path collapsing to `labels`.

    Enumerates all (K+1)^T frame-label paths, so the grid must satisfy
    (K+1)^T <= 10^7. Independent of the forward-backward recursion by
    construction.
    """
    log_probs = np.asarray(log_probs, dtype=np.float64)
    T, C = log_probs.shape
    labels = check_labels(labels, C)
    if C**T > ORACLE_PATH_BOUND:
        raise OracleSizeError(f"{C}^{T} paths exceed the {ORACLE_PATH_BOUND} bound")
    paths, groups = _paths_by_collapse(T, C)
    rows = groups.get(tuple(int(x) for x in labels))
    if rows is None:
        return np.inf
    member = paths[rows]  # (n, T)
    path_logp = log_probs[np.arange(T), member].sum(axis=1)
    peak = path_logp.max()
    return float(-(peak + np.log(np.exp(path_logp - peak).sum())))
