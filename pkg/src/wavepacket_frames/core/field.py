"""
Sampled fields and their frequency grids.

A field lives on an N×N grid of half-width ``extent``; points are
``(i - N/2)·h`` with ``h = 2·extent/N`` and arrays are indexed ``[i2, i1]``
(row = second coordinate). A spatial field of half-width X has the frequency
grid of half-width ``N/(4X)``, spacing ``1/(2X)``. The DFT pair is scaled so
that it approximates ``f̂(ξ) = ∫ f(x) exp(-2πi x·ξ) dx`` and is unitary for
the grid L² inner products.
"""
from __future__ import annotations

import math
from typing import Literal, Optional, Tuple

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_validator, model_validator

Domain = Literal["spatial", "frequency"]


class FrequencyGrid(BaseModel):
    """Uniform n×n grid on ``[-extent, extent)^2``."""

    model_config = ConfigDict(frozen=True)

    n: int = PydanticField(ge=2)
    extent: float = PydanticField(gt=0)

    @model_validator(mode="after")
    def _check_even(self) -> "FrequencyGrid":
        if self.n % 2:
            raise ValueError(f"grid size must be even, got {self.n}")
        return self

    @classmethod
    def from_spatial(cls, n: int, spatial_extent: float) -> "FrequencyGrid":
        return cls(n=n, extent=n / (4.0 * spatial_extent))

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def spatial_extent(self) -> float:
        """Half-width of the spatial grid dual to this one."""
        return self.n / (4.0 * self.extent)

    def offsets(self) -> np.ndarray:
        return np.arange(self.n) - self.n // 2

    def axis(self) -> np.ndarray:
        return self.offsets() * self.spacing

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        axis = self.axis()
        return np.meshgrid(axis, axis, indexing="xy")

    def offset_mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        offsets = self.offsets()
        return np.meshgrid(offsets, offsets, indexing="xy")

    def band_mask(self, band: Optional[float]) -> np.ndarray:
        """Points with ``|ξ|_∞ <= band``; every point when ``band`` is None."""
        xi1, xi2 = self.mesh()
        if band is None:
            return np.ones(xi1.shape, dtype=bool)
        return (np.abs(xi1) <= band) & (np.abs(xi2) <= band)

    def refined(self) -> "FrequencyGrid":
        """Same box, twice the resolution; contains every point of this grid."""
        return FrequencyGrid(n=2 * self.n, extent=self.extent)


def _is_power_of_two(n: int) -> bool:
    return n >= 2 and (n & (n - 1)) == 0


class Field(BaseModel):
    """Complex samples on a square grid with domain and extent metadata."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    domain: Domain
    extent: float = PydanticField(gt=0)

    @field_validator("samples")
    @classmethod
    def _check_samples(cls, value: np.ndarray) -> np.ndarray:
        samples = np.array(value, dtype=np.complex128)
        if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
            raise ValueError(f"field samples must be a square 2D array, got shape {samples.shape}")
        if not _is_power_of_two(samples.shape[0]):
            raise ValueError(f"field size must be a power of two >= 2, got {samples.shape[0]}")
        samples.setflags(write=False)
        return samples

    @classmethod
    def zeros(cls, n: int, extent: float, domain: Domain = "spatial") -> "Field":
        return cls(samples=np.zeros((n, n), dtype=np.complex128), domain=domain, extent=extent)

    @property
    def n(self) -> int:
        return int(self.samples.shape[0])

    @property
    def spacing(self) -> float:
        return 2.0 * self.extent / self.n

    @property
    def grid(self) -> FrequencyGrid:
        """The sample grid of this field, in its own domain."""
        return FrequencyGrid(n=self.n, extent=self.extent)

    @property
    def frequency_grid(self) -> FrequencyGrid:
        return self.grid if self.domain == "frequency" else FrequencyGrid.from_spatial(self.n, self.extent)

    @property
    def spatial_extent(self) -> float:
        return self.extent if self.domain == "spatial" else self.n / (4.0 * self.extent)

    def with_samples(self, samples: np.ndarray) -> "Field":
        return Field(samples=samples, domain=self.domain, extent=self.extent)

    def to_frequency(self) -> "Field":
        if self.domain == "frequency":
            return self
        dx = self.spacing
        hat = scipy.fft.fftshift(scipy.fft.fft2(scipy.fft.ifftshift(self.samples))) * dx * dx
        return Field(samples=hat, domain="frequency", extent=self.n / (4.0 * self.extent))

    def to_spatial(self) -> "Field":
        if self.domain == "spatial":
            return self
        dxi = self.spacing
        values = scipy.fft.fftshift(scipy.fft.ifft2(scipy.fft.ifftshift(self.samples))) * (self.n * dxi) ** 2
        return Field(samples=values, domain="spatial", extent=self.n / (4.0 * self.extent))

    def norm(self) -> float:
        """Grid L² norm in the field's own domain."""
        return float(math.sqrt(np.sum(np.abs(self.samples) ** 2)) * self.spacing)

    def inner(self, other: "Field") -> complex:
        """``Σ f conj(g) h^2`` with both fields brought to this field's domain."""
        other = other.to_frequency() if self.domain == "frequency" else other.to_spatial()
        if other.n != self.n or not math.isclose(other.extent, self.extent, rel_tol=1e-12):
            raise ValueError("inner product needs fields on the same grid")
        return complex(np.vdot(other.samples, self.samples) * self.spacing ** 2)


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; PCG64 is pinned so samples match across platforms."""
    return np.random.Generator(np.random.PCG64(seed))


def random_band_limited_field(
    n: int,
    spatial_extent: float,
    band: Optional[float],
    seed: int,
) -> Field:
    """
    Complex Gaussian noise on the frequency grid, zero outside ``|ξ|_∞ <= band``.

    ``band=None`` gives white noise on the whole grid.
    """
    grid = FrequencyGrid.from_spatial(n, spatial_extent)
    rng = make_rng(seed)
    noise = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / math.sqrt(2.0)
    return Field(samples=np.where(grid.band_mask(band), noise, 0.0), domain="frequency", extent=grid.extent)
