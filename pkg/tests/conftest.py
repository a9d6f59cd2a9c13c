import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jedmimo import make_constellation


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qpsk():
    return make_constellation(4)
