import numpy as np
import pytest

from stripwaves.grid import StripGrid, WeightProfile

OMEGA = np.pi / 4


@pytest.fixture(scope="session")
def grid():
    return StripGrid(L=12.0, nx=256, omega=OMEGA, nz=32)


@pytest.fixture(scope="session")
def grid_fine():
    return StripGrid(L=12.0, nx=512, omega=OMEGA, nz=48)


@pytest.fixture(scope="session")
def wp():
    return WeightProfile(gamma=0.0, beta_r=1.0, omega=OMEGA, omega_r=OMEGA)


def gaussian_trace(grid, width=1.5, center=0.0):
    return np.exp(-((grid.x - center) / width) ** 2)
