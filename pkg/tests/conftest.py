import math

import numpy as np
import pytest

from qx import corpus
from qx.parser import load_circuit

H = 1 / math.sqrt(2)


@pytest.fixture(scope="session")
def circuits():
    return {name.removesuffix(".qc"): load_circuit(corpus.path(name)) for name in corpus.NAMES}


@pytest.fixture
def rng():
    return np.random.default_rng(20131)


def kron_all(*vectors):
    out = np.ones(1, dtype=complex)
    for v in vectors:
        out = np.kron(out, np.asarray(v, dtype=complex))
    return out
