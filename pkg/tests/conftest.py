import numpy as np
import pytest
from hypothesis import settings

from mhd1d.spectral import GridSpec, SpectralField

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(256)


def random_bandlimited(grid: GridSpec, kmax: int, rng: np.random.Generator, decay: float = 1.0) -> SpectralField:
    """Random real field with modes 0..kmax."""
    c = np.zeros(grid.n_modes, dtype=complex)
    k = np.arange(1, kmax + 1)
    c[1 : kmax + 1] = (rng.standard_normal(kmax) + 1j * rng.standard_normal(kmax)) / k**decay
    c[0] = rng.standard_normal()
    return SpectralField(grid, c)


def random_in_Y(grid: GridSpec, kmax: int, rng: np.random.Generator) -> SpectralField:
    """Random band-limited field vanishing at theta = 0."""
    f = random_bandlimited(grid, kmax, rng)
    c = f.coeffs.copy()
    c[0] -= f.values[0]
    return SpectralField(grid, c)
