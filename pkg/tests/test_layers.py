"""Layer-level gradient checks, including the 3-step LSTM."""

import numpy as np

from phonseg import autodiff as ad
from phonseg.layers import LSTM, BiLSTM, Conv1d, Embedding, Linear
from phonseg.params import ParamStore
from phonseg.rng import Rng

from gradcheck import check_gradients


def test_linear_forward_shape(np_rng):
    store = ParamStore()
    lin = Linear(store, "l", 4, 6, Rng(3))
    y = lin(ad.constant(np_rng.normal(size=(5, 4))))
    assert y.value.shape == (5, 6)


def test_lstm_three_step_gradient(np_rng):
    store = ParamStore()
    lstm = LSTM(store, "lstm", 3, 4, Rng(11))
    x = np_rng.uniform(-1, 1, size=(3, 3))
    w = np_rng.normal(size=(3, 4))

    def build():
        out = lstm.run(ad.constant(x))
        return ad.sum_all(ad.mul(out, ad.constant(w)))

    nodes = [store[name] for name in store.names()]
    check_gradients(build, nodes, context="lstm-3step")


def test_bilstm_gradient_and_shape(np_rng):
    store = ParamStore()
    bi = BiLSTM(store, "bi", 2, 3, Rng(21))
    x = np_rng.uniform(-1, 1, size=(4, 2))
    w = np_rng.normal(size=(4, 6))

    out = bi(ad.constant(x))
    assert out.value.shape == (4, 6)

    def build():
        return ad.sum_all(ad.mul(bi(ad.constant(x)), ad.constant(w)))

    nodes = [store[name] for name in store.names()]
    check_gradients(build, nodes, context="bilstm")


def test_bilstm_backward_direction_actually_reversed(np_rng):
    # forward-half output at t=0 must not depend on later inputs,
    # backward-half output at t=T-1 must not depend on earlier inputs
    store = ParamStore()
    bi = BiLSTM(store, "bi", 2, 3, Rng(5))
    x = np_rng.uniform(-1, 1, size=(5, 2))
    base = bi(ad.constant(x)).value
    x2 = x.copy()
    x2[4] += 1.0  # change the last frame
    pert = bi(ad.constant(x2)).value
    assert np.allclose(base[0, :3], pert[0, :3])  # fwd half at t=0 unchanged
    assert not np.allclose(base[0, 3:], pert[0, 3:])  # bwd half sees it


def test_conv1d_layer_gradient(np_rng):
    store = ParamStore()
    conv = Conv1d(store, "c", 3, 2, 4, Rng(8))
    x = np_rng.uniform(-1, 1, size=(5, 2))
    w = np_rng.normal(size=(5, 4))

    def build():
        return ad.sum_all(ad.mul(conv(ad.constant(x)), ad.constant(w)))

    nodes = [store[name] for name in store.names()]
    check_gradients(build, nodes, context="conv-layer")


def test_embedding_lookup(np_rng):
    store = ParamStore()
    emb = Embedding(store, "e", 5, 3, Rng(2))
    out = emb([0, 2, 2])
    assert out.value.shape == (3, 3)
    assert np.array_equal(out.value[1], out.value[2])
