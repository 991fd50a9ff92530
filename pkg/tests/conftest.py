from pathlib import Path

import pytest
from hypothesis import settings

from nlsbeat import melnikov

DATA = Path(__file__).parent / "data"

settings.register_profile("default", deadline=None, derandomize=True)
settings.load_profile("default")


@pytest.fixture(scope="session")
def spectra_grid():
    """Spectra on the default parameter box, built once and cached on disk."""
    return melnikov.cached_grid(DATA / "spectra_grid.npz")
