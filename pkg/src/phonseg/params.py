"""Named parameter storage, Adam updates, checkpoint round-trips."""

import numpy as np

from . import tensorio
from .autodiff import Node, parameter
from .errors import ConfigError, TrainingError


class ParamStore:
    """Owns parameter nodes plus per-parameter Adam moment buffers."""

    def __init__(self):
        self._params: dict[str, Node] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, array) -> Node:
        if name in self._params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        node = parameter(array, name=name)
        self._params[name] = node
        self._m[name] = np.zeros_like(node.value)
        self._v[name] = np.zeros_like(node.value)
        return node

    def create(self, name: str, rows: int, cols: int, rng, init="glorot") -> Node:
        if init == "glorot":
            array = rng.glorot(rows, cols)
        elif init == "zeros":
            array = np.zeros((rows, cols))
        else:
            raise ConfigError(f"unknown init {init!r}")
        return self.add(name, array)

    def __getitem__(self, name: str) -> Node:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def names(self):
        return list(self._params)

    def items(self):
        return self._params.items()

    def zero_grad(self):
        for node in self._params.values():
            node.grad = None

    def num_values(self) -> int:
        return sum(n.value.size for n in self._params.values())

    # best-checkpoint keeping works on raw values; optimizer state is not
    # snapshotted because a restored model is only used for inference
    def snapshot(self) -> dict:
        return {name: node.value.copy() for name, node in self._params.items()}

    def restore(self, snap: dict):
        for name, array in snap.items():
            self._params[name].value = array.copy()

    def save(self, dirpath, extra: dict | None = None):
        arrays = {name: node.value for name, node in self._params.items()}
        tensorio.save_checkpoint(dirpath, arrays, step=self.step, extra=extra)

    def load_values(self, dirpath) -> dict | None:
        """Overwrite parameter values from a checkpoint; returns its extra blob."""
        arrays, step, extra = tensorio.load_checkpoint(dirpath)
        missing = set(self._params) - set(arrays)
        if missing:
            raise ConfigError(f"checkpoint missing parameters: {sorted(missing)}")
        for name, node in self._params.items():
            if arrays[name].shape != node.value.shape:
                raise ConfigError(f"checkpoint shape mismatch for {name!r}")
            node.value = np.ascontiguousarray(arrays[name], dtype=np.float64)
        self.step = step
        return extra


def adam_step(store: ParamStore, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
    """One Adam update with bias correction; clears gradients afterwards.

    Parameters whose gradient was never populated are left untouched.
    """
    b1, b2 = betas
    store.step += 1
    t = store.step
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, node in store._params.items():
        g = node.grad
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
        m = store._m[name]
        v = store._v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        node.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        node.grad = None
