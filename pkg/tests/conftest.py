import numpy as np
import pytest

from symbarrier.gridflow import build_cell_field


@pytest.fixture(scope="session")
def cell_field():
    """The cell field at the default resolution h = 1/512."""
    return build_cell_field()


@pytest.fixture(scope="session")
def coarse_cell_field():
    # field evaluation is exact, so a coarse grid only changes the stored samples
    return build_cell_field(resolution=1 / 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
