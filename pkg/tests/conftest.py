from __future__ import annotations

import numpy as np
import pytest

from chromabench.library import gaussian_css, random_illuminants, random_reflectances
from chromabench.spectra import DEFAULT_GRID


@pytest.fixture(scope="session")
def grid():
    return DEFAULT_GRID


@pytest.fixture(scope="session")
def refls():
    return random_reflectances(300, seed=1)


@pytest.fixture(scope="session")
def illums():
    return random_illuminants(20, seed=2)


@pytest.fixture(scope="session")
def cam_a():
    return gaussian_css("gauss", (600, 540, 450), (25, 25, 25))


@pytest.fixture(scope="session")
def cam_b():
    return gaussian_css("shifted-broad", (630, 570, 480), (45, 45, 45), gains=(0.55, 1.0, 0.4))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
