"""Toy-scale dictionary-free speech synthesis.

Frame features go through a CTC-trained recognizer whose bottleneck
activations are merged into segment-level phonetic representations; an
unsupervised masked-frame encoder provides frame-level ones. Two
text-to-representation models predict both streams from characters and a
dual-encoder attention model combines them into mel frames. Everything is
seeded and reproducible; evaluation runs on a generated toy language.
"""

import os

# Single-threaded BLAS keeps the small-matrix training loops fast and makes
# reruns bit-reproducible. Must happen before numpy loads its BLAS.
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")
del _var

__version__ = "0.1.0"
