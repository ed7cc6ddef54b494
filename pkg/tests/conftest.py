import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def unit_columns(A):
    return A / np.linalg.norm(A, axis=0)
