"""Kernel backend selection.

Set ``PHONSEG_BACKEND=numpy`` to force the pure-numpy kernels, ``numba`` to
require the compiled ones (import error if numba is unavailable). Default
``auto`` uses numba when it imports cleanly.

The two backends agree numerically to float rounding; see
benchmarks/bench_backends.py for the speed comparison.
"""

import os

import numpy as np

from . import _kernels_numpy
from .errors import ConfigError

_choice = os.environ.get("PHONSEG_BACKEND", "auto").lower()
if _choice not in ("auto", "numba", "numpy"):
    raise ConfigError(f"PHONSEG_BACKEND must be auto, numba or numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = _kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _choice == "numba":
            raise
        _impl = _kernels_numpy
        BACKEND = "numpy"


def ctc_forward_backward(log_probs: np.ndarray, ext: np.ndarray):
    """Loss and gradient of -log p(labels) w.r.t. per-frame log-probs."""
    log_probs = np.ascontiguousarray(log_probs, dtype=np.float64)
    ext = np.ascontiguousarray(ext, dtype=np.int64)
    return _impl.ctc_forward_backward(log_probs, ext)


def levenshtein(a: np.ndarray, b: np.ndarray) -> int:
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    return int(_impl.levenshtein(a, b))
