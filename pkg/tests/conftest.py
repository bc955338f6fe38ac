"""
Shared fixtures.

Transform tests run on a 64x64 grid of half-width 1/16, so the frequency grid
has spacing 8 and reaches ±256, which holds the standard window up to j = 2
without rescaling. Square lattices ``a = 2X/M`` with integer ``M`` keep every
band of that grid on the FFT path.
"""
import pytest

from wavepacket_frames.core.criterion import certify_frame
from wavepacket_frames.core.field import FrequencyGrid, random_band_limited_field
from wavepacket_frames.core.geometry import Lattice
from wavepacket_frames.core.window import probe_window as make_probe_window
from wavepacket_frames.core.window import reference_coarse_window, reference_window

GRID_N = 64
SPATIAL_EXTENT = 1.0 / 16.0
J_MAX = 2
FIELD_BAND = 64.0
PROBE_SCALE = 1.0 / 330.0


def square_lattice(periods: int, extent: float = SPATIAL_EXTENT) -> Lattice:
    """Square lattice with ``periods`` coarse translates across the domain."""
    a = 2.0 * extent / periods
    return Lattice.rectangular(a, a)


@pytest.fixture(scope="session")
def window():
    return reference_window()


@pytest.fixture(scope="session")
def coarse():
    return reference_coarse_window()


@pytest.fixture(scope="session")
def grid():
    return FrequencyGrid.from_spatial(GRID_N, SPATIAL_EXTENT)


@pytest.fixture(scope="session")
def frame_lattice():
    return square_lattice(32)


@pytest.fixture(scope="session")
def alias_free_lattice():
    """One lattice period per grid period: no discrete cross terms at all."""
    return square_lattice(64)


@pytest.fixture(scope="session")
def band_certificate(window, coarse, frame_lattice, grid):
    return certify_frame(window, coarse, frame_lattice, grid, J_MAX, band=FIELD_BAND)


@pytest.fixture
def band_limited_field():
    def make(seed: int):
        return random_band_limited_field(GRID_N, SPATIAL_EXTENT, FIELD_BAND, seed)
    return make


@pytest.fixture(scope="session")
def probe_window():
    """Three-moment probe window, scaled so that j = 5 fills a 512-point grid of half-width 1."""
    return make_probe_window(PROBE_SCALE)
