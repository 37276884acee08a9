import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from toothfill.geometry.primitives import icosphere, box_mesh


@pytest.fixture(scope="session")
def sphere3():
    return icosphere(3)


@pytest.fixture(scope="session")
def sphere2():
    return icosphere(2)


@pytest.fixture(scope="session")
def unit_box():
    return box_mesh()


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
