import os

# pin BLAS threading before numpy is imported anywhere, for reproducibility
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np
import pytest


@pytest.fixture
def rng():
    from phonseg.rng import Rng

    return Rng(1234)


@pytest.fixture
def np_rng():
    return np.random.default_rng(99)
