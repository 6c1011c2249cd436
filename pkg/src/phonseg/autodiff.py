"""Minimal reverse-mode autodiff over 2-D float64 arrays.

Nodes form a DAG; ``backward`` walks it once in reverse topological order
and accumulates gradients, so shared subexpressions sum as expected.
Shapes must match exactly everywhere: there is no broadcasting, only the
explicit ``add_bias`` row-vector op. Heavier building blocks (conv1d,
lstm_cell, the CTC node) are fused single nodes with hand-written
backwards; the finite-difference suite in tests/ is the authority on all
of them.
"""

import os

import numpy as np

from .errors import DimensionError

_CHECK_FINITE = os.environ.get("PHONSEG_CHECK_FINITE", "0") == "1"


class Node:
    __slots__ = ("value", "grad", "parents", "bwd", "is_param", "name")

    def __init__(self, value, parents=(), bwd=None, is_param=False, name=None):
        self.value = value
        self.grad = None
        self.parents = parents
        self.bwd = bwd
        self.is_param = is_param
        self.name = name

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        tag = self.name or ("param" if self.is_param else "node")
        return f"Node({tag}, shape={self.value.shape})"


def as_matrix(array) -> np.ndarray:
    array = np.asarray(array, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(1, -1)
    if array.ndim != 2:
        raise DimensionError(f"expected a matrix, got ndim={array.ndim}")
    return np.ascontiguousarray(array)


def constant(array, name=None) -> Node:
    return Node(as_matrix(array), name=name)


def parameter(array, name=None) -> Node:
    return Node(as_matrix(array), is_param=True, name=name)


def _same_shape(a: Node, b: Node, op: str):
    if a.value.shape != b.value.shape:
        raise DimensionError(f"{op}: shapes {a.value.shape} and {b.value.shape} differ")


def _accum(node: Node, delta):
    if node.grad is None:
        node.grad = np.zeros_like(node.value)
    node.grad += delta


def _finite(value):
    if _CHECK_FINITE and not np.all(np.isfinite(value)):
        raise FloatingPointError("non-finite value produced by graph op")
    return value


# ---------------------------------------------------------------------------
# arithmetic


def matmul(a: Node, b: Node) -> Node:
    if a.value.shape[1] != b.value.shape[0]:
        raise DimensionError(
            f"matmul: inner dims {a.value.shape} x {b.value.shape} disagree"
        )
    out = Node(_finite(a.value @ b.value), (a, b))

    def bwd(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    out.bwd = bwd
    return out


def add(a: Node, b: Node) -> Node:
    _same_shape(a, b, "add")
    out = Node(a.value + b.value, (a, b))

    def bwd(g):
        _accum(a, g)
        _accum(b, g)

    out.bwd = bwd
    return out


def sub(a: Node, b: Node) -> Node:
    _same_shape(a, b, "sub")
    out = Node(a.value - b.value, (a, b))

    def bwd(g):
        _accum(a, g)
        _accum(b, -g)

    out.bwd = bwd
    return out


def mul(a: Node, b: Node) -> Node:
    _same_shape(a, b, "mul")
    out = Node(a.value * b.value, (a, b))

    def bwd(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    out.bwd = bwd
    return out


def add_bias(x: Node, bias: Node) -> Node:
    """Add a 1 x D row vector to every row of x. The one sanctioned broadcast."""
    if bias.value.shape != (1, x.value.shape[1]):
        raise DimensionError(
            f"add_bias: bias {bias.value.shape} does not match columns of {x.value.shape}"
        )
    out = Node(x.value + bias.value, (x, bias))

    def bwd(g):
        _accum(x, g)
        _accum(bias, g.sum(axis=0, keepdims=True))

    out.bwd = bwd
    return out


def scale(x: Node, factor: float) -> Node:
    factor = float(factor)
    out = Node(x.value * factor, (x,))

    def bwd(g):
        _accum(x, g * factor)

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# pointwise nonlinearities


def tanh(x: Node) -> Node:
    y = np.tanh(x.value)
    out = Node(y, (x,))

    def bwd(g):
        _accum(x, g * (1.0 - y * y))

    out.bwd = bwd
    return out


def sigmoid(x: Node) -> Node:
    y = _sigmoid(x.value)
    out = Node(y, (x,))

    def bwd(g):
        _accum(x, g * y * (1.0 - y))

    out.bwd = bwd
    return out


def _sigmoid(v):
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def relu(x: Node) -> Node:
    out = Node(np.maximum(x.value, 0.0), (x,))

    def bwd(g):
        _accum(x, g * (x.value > 0.0))

    out.bwd = bwd
    return out


def abs_(x: Node) -> Node:
    out = Node(np.abs(x.value), (x,))

    def bwd(g):
        _accum(x, g * np.sign(x.value))

    out.bwd = bwd
    return out


def square(x: Node) -> Node:
    out = Node(x.value * x.value, (x,))

    def bwd(g):
        _accum(x, 2.0 * g * x.value)

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# row-normalized softmaxes, max-subtracted for stability


def softmax_rows(x: Node) -> Node:
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Node(y, (x,))

    def bwd(g):
        _accum(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    out.bwd = bwd
    return out


def log_softmax_rows(x: Node) -> Node:
    shifted = x.value - x.value.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    y = shifted - lse
    out = Node(y, (x,))

    def bwd(g):
        _accum(x, g - np.exp(y) * g.sum(axis=1, keepdims=True))

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# reductions


def sum_all(x: Node) -> Node:
    out = Node(np.array([[x.value.sum()]]), (x,))

    def bwd(g):
        _accum(x, np.full_like(x.value, g[0, 0]))

    out.bwd = bwd
    return out


def mean_all(x: Node) -> Node:
    n = x.value.size
    out = Node(np.array([[x.value.sum() / n]]), (x,))

    def bwd(g):
        _accum(x, np.full_like(x.value, g[0, 0] / n))

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# layout


def transpose(x: Node) -> Node:
    out = Node(np.ascontiguousarray(x.value.T), (x,))

    def bwd(g):
        _accum(x, g.T)

    out.bwd = bwd
    return out


def concat_cols(a: Node, b: Node) -> Node:
    if a.value.shape[0] != b.value.shape[0]:
        raise DimensionError(
            f"concat_cols: row counts {a.value.shape} vs {b.value.shape}"
        )
    na = a.value.shape[1]
    out = Node(np.hstack((a.value, b.value)), (a, b))

    def bwd(g):
        _accum(a, g[:, :na])
        _accum(b, g[:, na:])

    out.bwd = bwd
    return out


def concat_rows(a: Node, b: Node) -> Node:
    if a.value.shape[1] != b.value.shape[1]:
        raise DimensionError(
            f"concat_rows: column counts {a.value.shape} vs {b.value.shape}"
        )
    na = a.value.shape[0]
    out = Node(np.vstack((a.value, b.value)), (a, b))

    def bwd(g):
        _accum(a, g[:na])
        _accum(b, g[na:])

    out.bwd = bwd
    return out


def stack_rows(nodes) -> Node:
    """Vertically stack a list of nodes with equal column counts."""
    nodes = list(nodes)
    if not nodes:
        raise DimensionError("stack_rows: empty list")
    cols = nodes[0].value.shape[1]
    for n in nodes:
        if n.value.shape[1] != cols:
            raise DimensionError("stack_rows: column counts differ")
    sizes = [n.value.shape[0] for n in nodes]
    out = Node(np.vstack([n.value for n in nodes]), tuple(nodes))

    def bwd(g):
        offset = 0
        for n, rows in zip(nodes, sizes):
            _accum(n, g[offset : offset + rows])
            offset += rows

    out.bwd = bwd
    return out


def slice_rows(x: Node, start: int, stop: int) -> Node:
    out = Node(np.ascontiguousarray(x.value[start:stop]), (x,))

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        x.grad[start:stop] += g

    out.bwd = bwd
    return out


def slice_cols(x: Node, start: int, stop: int) -> Node:
    out = Node(np.ascontiguousarray(x.value[:, start:stop]), (x,))

    def bwd(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        x.grad[:, start:stop] += g

    out.bwd = bwd
    return out


def embed(table: Node, ids) -> Node:
    """Gather rows of an embedding table; scatter-adds on the way back."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.ndim != 1:
        raise DimensionError("embed: ids must be a 1-D index sequence")
    out = Node(table.value[ids].copy(), (table,))

    def bwd(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.value)
        np.add.at(table.grad, ids, g)

    out.bwd = bwd
    return out


def dropout(x: Node, p: float, rng, training: bool) -> Node:
    """Inverted dropout; identity when not training or p == 0."""
    if not training or p <= 0.0:
        return x
    keep = (rng.random(size=x.value.shape) >= p) / (1.0 - p)
    return mul(x, constant(keep))


# ---------------------------------------------------------------------------
# fused sequence ops


def conv1d(x: Node, weight: Node, bias: Node, kernel: int) -> Node:
    """Same-length 1-D convolution over rows of x (T x Din), zero padded.

    weight is (kernel * Din) x Dout with taps ordered offset -r .. +r; a
    "delta" weight (identity block at the center tap) reproduces the input.
    """
    if kernel % 2 != 1:
        raise DimensionError("conv1d: kernel must be odd")
    T, din = x.value.shape
    if weight.value.shape[0] != kernel * din:
        raise DimensionError(
            f"conv1d: weight rows {weight.value.shape[0]} != kernel*din {kernel * din}"
        )
    dout = weight.value.shape[1]
    if bias.value.shape != (1, dout):
        raise DimensionError("conv1d: bias shape mismatch")
    r = kernel // 2

    unrolled = np.zeros((T, kernel * din))
    for j, off in enumerate(range(-r, r + 1)):
        lo, hi = max(0, -off), min(T, T - off)
        unrolled[lo:hi, j * din : (j + 1) * din] = x.value[lo + off : hi + off]

    out = Node(unrolled @ weight.value + bias.value, (x, weight, bias))

    def bwd(g):
        _accum(weight, unrolled.T @ g)
        _accum(bias, g.sum(axis=0, keepdims=True))
        gu = g @ weight.value.T
        gx = np.zeros_like(x.value)
        for j, off in enumerate(range(-r, r + 1)):
            lo, hi = max(0, -off), min(T, T - off)
            gx[lo + off : hi + off] += gu[lo:hi, j * din : (j + 1) * din]
        _accum(x, gx)

    out.bwd = bwd
    return out


def lstm_cell(x: Node, h: Node, c: Node, wx: Node, wh: Node, b: Node) -> Node:
    """One LSTM step, gate order i, f, g, o. Returns hstack(h', c').

    Slice columns [0, H) for h' and [H, 2H) for c'.
    """
    rows, din = x.value.shape
    hidden4 = wx.value.shape[1]
    if hidden4 % 4 != 0:
        raise DimensionError("lstm_cell: gate width not divisible by 4")
    hidden = hidden4 // 4
    if wx.value.shape[0] != din:
        raise DimensionError("lstm_cell: wx rows do not match input dim")
    if wh.value.shape != (hidden, hidden4):
        raise DimensionError("lstm_cell: wh shape mismatch")
    if h.value.shape != (rows, hidden) or c.value.shape != (rows, hidden):
        raise DimensionError("lstm_cell: state shape mismatch")
    if b.value.shape != (1, hidden4):
        raise DimensionError("lstm_cell: bias shape mismatch")

    z = x.value @ wx.value + h.value @ wh.value + b.value
    gi = _sigmoid(z[:, :hidden])
    gf = _sigmoid(z[:, hidden : 2 * hidden])
    gg = np.tanh(z[:, 2 * hidden : 3 * hidden])
    go = _sigmoid(z[:, 3 * hidden :])
    c2 = gf * c.value + gi * gg
    tc2 = np.tanh(c2)
    h2 = go * tc2

    out = Node(np.hstack((h2, c2)), (x, h, c, wx, wh, b))

    def bwd(g):
        dh2 = g[:, :hidden]
        dc2 = g[:, hidden:] + dh2 * go * (1.0 - tc2 * tc2)
        dzo = dh2 * tc2 * go * (1.0 - go)
        dzi = dc2 * gg * gi * (1.0 - gi)
        dzf = dc2 * c.value * gf * (1.0 - gf)
        dzg = dc2 * gi * (1.0 - gg * gg)
        dz = np.hstack((dzi, dzf, dzg, dzo))
        _accum(x, dz @ wx.value.T)
        _accum(h, dz @ wh.value.T)
        _accum(c, dc2 * gf)
        _accum(wx, x.value.T @ dz)
        _accum(wh, h.value.T @ dz)
        _accum(b, dz.sum(axis=0, keepdims=True))

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# losses


def mse(pred: Node, target) -> Node:
    diff = sub(pred, target if isinstance(target, Node) else constant(target))
    return mean_all(square(diff))


def l1(pred: Node, target) -> Node:
    diff = sub(pred, target if isinstance(target, Node) else constant(target))
    return mean_all(abs_(diff))


def bce_with_logits(logits: Node, targets) -> Node:
    """Mean binary cross entropy against constant 0/1 targets, stable form."""
    t = as_matrix(targets)
    if t.shape != logits.value.shape:
        raise DimensionError("bce_with_logits: target shape mismatch")
    z = logits.value
    loss = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    out = Node(np.array([[loss.sum() / n]]), (logits,))

    def bwd(g):
        _accum(logits, g[0, 0] * (_sigmoid(z) - t) / n)

    out.bwd = bwd
    return out


# ---------------------------------------------------------------------------
# backward


def topo_order(root: Node):
    """Reverse-topological node list reachable from root, each node once."""
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(root: Node):
    """Accumulate d(root)/d(node) into .grad for the whole graph.

    root must be 1 x 1. Parameter nodes keep accumulating across calls
    until the optimizer clears them; transient nodes start from zero.
    """
    if root.value.shape != (1, 1):
        raise DimensionError(f"backward: root must be scalar, got {root.value.shape}")
    order = topo_order(root)
    for node in order:
        if not node.is_param:
            node.grad = None
    root.grad = np.ones((1, 1))
    for node in reversed(order):
        if node.bwd is not None and node.grad is not None:
            node.bwd(node.grad)
