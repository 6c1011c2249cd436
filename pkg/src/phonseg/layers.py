"""Trainable layers over the autodiff graph.

Each layer registers its parameters under a dotted prefix in a ParamStore
at construction and builds graph nodes when called.
"""

import numpy as np

from . import autodiff as ad
from .autodiff import Node


class Linear:
    def __init__(self, store, prefix, d_in, d_out, rng, bias=True):
        self.w = store.create(f"{prefix}.w", d_in, d_out, rng.substream(f"{prefix}.w"))
        self.b = store.add(f"{prefix}.b", np.zeros((1, d_out))) if bias else None

    def __call__(self, x: Node) -> Node:
        y = ad.matmul(x, self.w)
        return ad.add_bias(y, self.b) if self.b is not None else y


class Conv1d:
    """Same-length convolution over time; kernel must be odd."""

    def __init__(self, store, prefix, kernel, d_in, d_out, rng):
        self.kernel = kernel
        self.w = store.create(
            f"{prefix}.w", kernel * d_in, d_out, rng.substream(f"{prefix}.w")
        )
        self.b = store.add(f"{prefix}.b", np.zeros((1, d_out)))

    def __call__(self, x: Node) -> Node:
        return ad.conv1d(x, self.w, self.b, self.kernel)


class Embedding:
    def __init__(self, store, prefix, vocab, dim, rng):
        self.table = store.create(
            f"{prefix}.table", vocab, dim, rng.substream(f"{prefix}.table")
        )

    def __call__(self, ids) -> Node:
        return ad.embed(self.table, ids)


class LSTM:
    """Unidirectional LSTM unrolled one row at a time."""

    def __init__(self, store, prefix, d_in, d_hidden, rng):
        self.hidden = d_hidden
        self.wx = store.create(
            f"{prefix}.wx", d_in, 4 * d_hidden, rng.substream(f"{prefix}.wx")
        )
        self.wh = store.create(
            f"{prefix}.wh", d_hidden, 4 * d_hidden, rng.substream(f"{prefix}.wh")
        )
        self.b = store.add(f"{prefix}.b", np.zeros((1, 4 * d_hidden)))

    def initial_state(self):
        zeros = np.zeros((1, self.hidden))
        return ad.constant(zeros), ad.constant(zeros.copy())

    def step(self, x: Node, h: Node, c: Node):
        hc = ad.lstm_cell(x, h, c, self.wx, self.wh, self.b)
        return (
            ad.slice_cols(hc, 0, self.hidden),
            ad.slice_cols(hc, self.hidden, 2 * self.hidden),
        )

    def run(self, x: Node, reverse=False) -> Node:
        """Hidden states for every row of x, as a (T x hidden) node."""
        T = x.value.shape[0]
        h, c = self.initial_state()
        outs = [None] * T
        order = range(T - 1, -1, -1) if reverse else range(T)
        for t in order:
            h, c = self.step(ad.slice_rows(x, t, t + 1), h, c)
            outs[t] = h
        return ad.stack_rows(outs)


class BiLSTM:
    def __init__(self, store, prefix, d_in, d_hidden, rng):
        self.fwd = LSTM(store, f"{prefix}.fwd", d_in, d_hidden, rng)
        self.bwd = LSTM(store, f"{prefix}.bwd", d_in, d_hidden, rng)

    def __call__(self, x: Node) -> Node:
        return ad.concat_cols(self.fwd.run(x), self.bwd.run(x, reverse=True))
