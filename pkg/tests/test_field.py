import numpy as np
import pytest
from pydantic import ValidationError

from conftest import FIELD_BAND, GRID_N, SPATIAL_EXTENT
from wavepacket_frames.core.field import Field, FrequencyGrid


def test_transforms_preserve_the_norm(band_limited_field):
    f = band_limited_field(3)
    s = f.to_spatial()
    assert s.domain == "spatial"
    assert s.extent == pytest.approx(SPATIAL_EXTENT)
    assert s.norm() == pytest.approx(f.norm(), rel=1e-12)
    np.testing.assert_allclose(s.to_frequency().samples, f.samples, atol=1e-12 * np.max(np.abs(f.samples)))


def test_inner_product_is_domain_independent(band_limited_field):
    f, g = band_limited_field(1), band_limited_field(2)
    assert f.to_spatial().inner(g) == pytest.approx(f.inner(g), rel=1e-12)


def test_band_limited_field_vanishes_outside_the_band(band_limited_field):
    f = band_limited_field(0)
    outside = ~f.grid.band_mask(FIELD_BAND)
    assert outside.any()
    assert np.all(f.samples[outside] == 0.0)
    assert f.frequency_grid == FrequencyGrid.from_spatial(GRID_N, SPATIAL_EXTENT)


def test_refined_grid_contains_the_coarse_grid():
    grid = FrequencyGrid(n=16, extent=3.0)
    fine = grid.refined()
    assert fine.n == 32 and fine.extent == grid.extent
    assert np.all(np.isin(grid.axis(), fine.axis()))
    np.testing.assert_array_equal(fine.axis()[::2], grid.axis())


def test_grid_and_field_validation():
    with pytest.raises(ValidationError):
        FrequencyGrid(n=15, extent=1.0)
    with pytest.raises(ValidationError):
        Field(samples=np.zeros((12, 12)), domain="spatial", extent=1.0)
    with pytest.raises(ValidationError):
        Field(samples=np.zeros((8, 4)), domain="spatial", extent=1.0)
    with pytest.raises(ValueError):
        Field.zeros(8, 1.0).inner(Field.zeros(16, 1.0))
