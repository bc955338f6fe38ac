"""
Analysis and synthesis with the wavepacket system on a periodic grid.

A packet in frequency is ``8^{-j/2} exp(-2πi ξ·A^{-1}λ) φ̂(B ξ)`` (coarse:
``exp(-2πi ξ·λ) φ̂0(ξ)``). For band ``(j, k)`` analysis reduces to

    c(m) = 8^{-j/2} h^2 Σ_n H(n) exp(2πi (G n)·m),   G = P^T B h,

with ``H = f̂·conj(φ̂(Bξ))`` and ``n`` the integer grid offsets. When every row
of ``G`` has a single entry ``±1/M`` the sum is a folded inverse DFT of size
``M1×M2``; otherwise it is evaluated as a separable matrix product over the
support of ``H``. Synthesis is the exact adjoint of both paths.
"""
from __future__ import annotations

import math
from typing import Dict, Iterator, List, Literal, Optional, Sequence, Tuple

import numpy as np
import scipy.fft
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field as PydanticField, model_validator

from wavepacket_frames.config import settings
from wavepacket_frames.core.criterion import (
    SymbolField,
    compute_symbol_m,
    covering_symbol,
    delta_lattice,
)
from wavepacket_frames.core.errors import PreconditionError
from wavepacket_frames.core.field import Field, FrequencyGrid
from wavepacket_frames.core.geometry import Lattice, apply_dual_matrix, packet_matrices, star_norm_on_points
from wavepacket_frames.core.parallel import map_ordered
from wavepacket_frames.core.window import CoarseWindowSpec, FrequencyWindow, WindowSpec

Method = Literal["auto", "fast", "direct"]
Band = Tuple[int, int]

# bounds the size of the dense phase matrices on the direct path
_DIRECT_CHUNK_ELEMENTS = 1 << 22


class PacketIndex(BaseModel):
    """Coarse packet (``j = 0``) or fine packet ``(j, k)`` at lattice point ``P (m1, m2)``."""

    model_config = ConfigDict(frozen=True)

    j: int = PydanticField(ge=0)
    k: int = PydanticField(default=0, ge=0)
    m1: int
    m2: int

    @model_validator(mode="after")
    def _check_band(self) -> "PacketIndex":
        if self.j == 0 and self.k != 0:
            raise ValueError("coarse packets have no rotation index")
        if self.j > 0 and self.k >= 2 ** self.j:
            raise ValueError(f"rotation index k={self.k} out of range for scale j={self.j}")
        return self

    @property
    def is_coarse(self) -> bool:
        return self.j == 0

    @property
    def band(self) -> Band:
        return self.j, self.k

    def lattice_point(self, lat: Lattice) -> np.ndarray:
        return lat.point(self.m1, self.m2)


def bands(j_max: int) -> List[Band]:
    """Coarse band first, then ``(j, k)`` in scale-major order."""
    return [(0, 0)] + [(j, k) for j in range(1, j_max + 1) for k in range(2 ** j)]


def _band_window(j: int, w: FrequencyWindow, w0: FrequencyWindow) -> FrequencyWindow:
    return w0 if j == 0 else w


def packet_frequency(idx: PacketIndex, w: FrequencyWindow, w0: FrequencyWindow, xi, lat: Lattice):
    """Frequency-domain packet ``φ̂_{j,k,λ}(ξ)``; ``xi`` is a point or a pair of arrays."""
    xi1 = np.asarray(xi[0], dtype=float)
    xi2 = np.asarray(xi[1], dtype=float)
    A, _ = packet_matrices(idx.j, idx.k)
    center = np.linalg.solve(A, idx.lattice_point(lat))
    eta1, eta2 = apply_dual_matrix(idx.j, idx.k, xi1, xi2)
    window = _band_window(idx.j, w, w0).evaluate(eta1, eta2)
    value = 8.0 ** (-idx.j / 2.0) * np.exp(-2j * math.pi * (xi1 * center[0] + xi2 * center[1])) * window
    return complex(value) if np.ndim(value) == 0 else value


def packet_field(idx: PacketIndex, w: FrequencyWindow, w0: FrequencyWindow, lat: Lattice, grid: FrequencyGrid) -> Field:
    xi1, xi2 = grid.mesh()
    return Field(samples=packet_frequency(idx, w, w0, (xi1, xi2), lat), domain="frequency", extent=grid.extent)


class BandCoefficients(BaseModel):
    """Coefficients of one band, ``indices[i] = (m1, m2)`` in lexicographic order."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    j: int
    k: int
    indices: np.ndarray
    values: np.ndarray

    def with_values(self, values: np.ndarray) -> "BandCoefficients":
        return BandCoefficients(j=self.j, k=self.k, indices=self.indices, values=np.asarray(values, dtype=np.complex128))


class CoefficientSet(BaseModel):
    """Frame coefficients for every band up to ``j_max`` on one lattice and grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    lattice: Lattice
    j_max: int
    grid: FrequencyGrid
    bands: Dict[Band, BandCoefficients]

    @property
    def count(self) -> int:
        return sum(band.values.size for band in self.bands.values())

    def items(self) -> Iterator[Tuple[PacketIndex, complex]]:
        for (j, k), band in self.bands.items():
            for (m1, m2), value in zip(band.indices, band.values):
                yield PacketIndex(j=j, k=k, m1=int(m1), m2=int(m2)), complex(value)

    def values(self) -> np.ndarray:
        return np.concatenate([band.values for band in self.bands.values()])

    def get(self, idx: PacketIndex) -> complex:
        band = self.bands.get(idx.band)
        if band is None:
            raise KeyError(f"band {idx.band} not in coefficient set")
        hits = np.nonzero((band.indices[:, 0] == idx.m1) & (band.indices[:, 1] == idx.m2))[0]
        if hits.size == 0:
            raise KeyError(f"{idx} not in coefficient set")
        return complex(band.values[hits[0]])

    def energy(self) -> float:
        return float(sum(np.sum(np.abs(band.values) ** 2) for band in self.bands.values()))

    def largest(self) -> Tuple[PacketIndex, complex]:
        best: Optional[Tuple[float, Band, int]] = None
        for key, band in self.bands.items():
            if band.values.size == 0:
                continue
            i = int(np.argmax(np.abs(band.values)))
            candidate = (float(abs(band.values[i])), key, i)
            if best is None or candidate[0] > best[0]:
                best = candidate
        if best is None:
            raise ValueError("coefficient set is empty")
        _, (j, k), i = best
        m1, m2 = self.bands[(j, k)].indices[i]
        return PacketIndex(j=j, k=k, m1=int(m1), m2=int(m2)), complex(self.bands[(j, k)].values[i])

    def map_values(self, func) -> "CoefficientSet":
        return self.model_copy(update={"bands": {key: band.with_values(func(band.values)) for key, band in self.bands.items()}})

    def zeros_like(self) -> "CoefficientSet":
        return self.map_values(np.zeros_like)

    def scale(self, factor: complex) -> "CoefficientSet":
        return self.map_values(lambda values: values * factor)

    def __add__(self, other: "CoefficientSet") -> "CoefficientSet":
        if self.bands.keys() != other.bands.keys():
            raise ValueError("coefficient sets have different bands")
        bands_sum = {}
        for key, band in self.bands.items():
            if not np.array_equal(band.indices, other.bands[key].indices):
                raise ValueError(f"coefficient sets index band {key} differently")
            bands_sum[key] = band.with_values(band.values + other.bands[key].values)
        return self.model_copy(update={"bands": bands_sum})

    def with_single(self, idx: PacketIndex, value: complex = 1.0) -> "CoefficientSet":
        """Same index structure with one non-zero coefficient."""
        result = self.zeros_like()
        band = result.bands[idx.band]
        hits = np.nonzero((band.indices[:, 0] == idx.m1) & (band.indices[:, 1] == idx.m2))[0]
        if hits.size == 0:
            raise KeyError(f"{idx} not in coefficient set")
        values = band.values.copy()
        values[hits[0]] = value
        result.bands[idx.band] = band.with_values(values)
        return result


def band_indices(lat: Lattice, j: int, k: int, spatial_extent: float) -> np.ndarray:
    """
    Integer coordinates ``m`` whose packet center ``A^{-1} P m`` lies in ``[-X, X)^2``,
    lexicographic in ``m``.
    """
    A, _ = packet_matrices(j, k)
    to_center = np.linalg.solve(A, lat.matrix)
    to_index = np.linalg.inv(to_center)
    bound = np.ceil(np.abs(to_index).sum(axis=1) * spatial_extent).astype(np.int64) + 1
    m1, m2 = np.meshgrid(
        np.arange(-bound[0], bound[0] + 1),
        np.arange(-bound[1], bound[1] + 1),
        indexing="ij",
    )
    m = np.stack([m1.ravel(), m2.ravel()], axis=1)
    centers = m @ to_center.T
    tol = 1e-9 * spatial_extent
    keep = np.all((centers >= -spatial_extent - tol) & (centers < spatial_extent - tol), axis=1)
    return m[keep]


class BandPlan(BaseModel):
    """Phase map ``u = G n`` of one band, and its FFT alignment when it exists."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    transfer: np.ndarray
    aligned: bool
    periods: Tuple[int, int] = (0, 0)
    columns: Tuple[int, int] = (0, 0)
    signs: Tuple[int, int] = (1, 1)


def band_plan(lat: Lattice, j: int, k: int, grid: FrequencyGrid) -> BandPlan:
    _, B = packet_matrices(j, k)
    transfer = lat.matrix.T @ B * grid.spacing
    tol = settings.alignment_tolerance
    scale = float(np.max(np.abs(transfer)))
    periods, columns, signs = [], [], []
    for row in transfer:
        nonzero = np.nonzero(np.abs(row) > tol * scale)[0]
        if nonzero.size != 1:
            return BandPlan(transfer=transfer, aligned=False)
        entry = row[nonzero[0]]
        period = 1.0 / abs(entry)
        if abs(period - round(period)) > tol * max(1.0, period):
            return BandPlan(transfer=transfer, aligned=False)
        periods.append(int(round(period)))
        columns.append(int(nonzero[0]))
        signs.append(1 if entry > 0 else -1)
    if columns[0] == columns[1]:
        return BandPlan(transfer=transfer, aligned=False)
    return BandPlan(
        transfer=transfer,
        aligned=True,
        periods=(periods[0], periods[1]),
        columns=(columns[0], columns[1]),
        signs=(signs[0], signs[1]),
    )


def _residues(plan: BandPlan, offsets: Tuple[np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray]:
    q1 = (plan.signs[0] * offsets[plan.columns[0]]) % plan.periods[0]
    q2 = (plan.signs[1] * offsets[plan.columns[1]]) % plan.periods[1]
    return q1, q2


def _fast_analysis(plan: BandPlan, h: np.ndarray, n1: np.ndarray, n2: np.ndarray, indices: np.ndarray) -> np.ndarray:
    M1, M2 = plan.periods
    q1, q2 = _residues(plan, (n1.ravel(), n2.ravel()))
    flat = q1 * M2 + q2
    weights = h.ravel()
    folded = (
        np.bincount(flat, weights=weights.real, minlength=M1 * M2)
        + 1j * np.bincount(flat, weights=weights.imag, minlength=M1 * M2)
    ).reshape(M1, M2)
    periodic = scipy.fft.ifft2(folded) * (M1 * M2)
    return periodic[indices[:, 0] % M1, indices[:, 1] % M2]


def _fast_synthesis(plan: BandPlan, values: np.ndarray, n1: np.ndarray, n2: np.ndarray, indices: np.ndarray) -> np.ndarray:
    M1, M2 = plan.periods
    dense = np.zeros((M1, M2), dtype=np.complex128)
    np.add.at(dense, (indices[:, 0] % M1, indices[:, 1] % M2), values)
    spectrum = scipy.fft.fft2(dense)
    q1, q2 = _residues(plan, (n1, n2))
    return spectrum[q1, q2]


def _chunks(total: int, width: int) -> Iterator[slice]:
    step = max(1, _DIRECT_CHUNK_ELEMENTS // max(1, width))
    for start in range(0, total, step):
        yield slice(start, min(total, start + step))


def _direct_analysis(plan: BandPlan, h: np.ndarray, n1: np.ndarray, n2: np.ndarray, indices: np.ndarray) -> np.ndarray:
    support = np.nonzero(h.ravel())[0]
    if support.size == 0 or indices.size == 0:
        return np.zeros(len(indices), dtype=np.complex128)
    weights = h.ravel()[support]
    n = np.stack([n1.ravel()[support], n2.ravel()[support]]).astype(float)
    u = plan.transfer @ n
    lo, hi = indices.min(axis=0), indices.max(axis=0)
    range1 = np.arange(lo[0], hi[0] + 1)
    range2 = np.arange(lo[1], hi[1] + 1)
    box = np.zeros((range1.size, range2.size), dtype=np.complex128)
    for part in _chunks(support.size, range1.size + range2.size):
        e1 = np.exp(2j * math.pi * np.outer(u[0, part], range1))
        e2 = np.exp(2j * math.pi * np.outer(u[1, part], range2))
        box += e1.T @ (weights[part, None] * e2)
    return box[indices[:, 0] - lo[0], indices[:, 1] - lo[1]]


def _direct_synthesis(plan: BandPlan, values: np.ndarray, support: np.ndarray, n1: np.ndarray, n2: np.ndarray, indices: np.ndarray) -> np.ndarray:
    out = np.zeros(support.size, dtype=np.complex128)
    if support.size == 0 or indices.size == 0:
        return out
    lo, hi = indices.min(axis=0), indices.max(axis=0)
    range1 = np.arange(lo[0], hi[0] + 1)
    range2 = np.arange(lo[1], hi[1] + 1)
    box = np.zeros((range1.size, range2.size), dtype=np.complex128)
    np.add.at(box, (indices[:, 0] - lo[0], indices[:, 1] - lo[1]), values)
    n = np.stack([n1.ravel()[support], n2.ravel()[support]]).astype(float)
    u = plan.transfer @ n
    for part in _chunks(support.size, range1.size + range2.size):
        e1 = np.exp(-2j * math.pi * np.outer(u[0, part], range1))
        e2 = np.exp(-2j * math.pi * np.outer(u[1, part], range2))
        out[part] = np.sum((e1 @ box) * e2, axis=1)
    return out


def _use_fast(plan: BandPlan, method: Method) -> bool:
    if method == "fast" and not plan.aligned:
        logger.debug("band not aligned with the grid; using direct summation")
    return plan.aligned and method != "direct"


def _band_window_samples(j: int, k: int, w: FrequencyWindow, w0: FrequencyWindow, grid: FrequencyGrid) -> np.ndarray:
    xi1, xi2 = grid.mesh()
    eta1, eta2 = apply_dual_matrix(j, k, xi1, xi2)
    return _band_window(j, w, w0).evaluate(eta1, eta2)


def analyze(
    f: Field,
    w: FrequencyWindow,
    w0: FrequencyWindow,
    lat: Lattice,
    j_max: int,
    method: Method = "auto",
) -> CoefficientSet:
    """
    Frame coefficients ``<f, φ_idx>`` for every band up to ``j_max``.

    Args:
        f: field in either domain; spatial fields are transformed first
        w, w0: fine and coarse analysis windows
        lat: translation lattice
        j_max: finest scale
        method: ``"auto"``/``"fast"`` take the FFT path on grid-aligned bands,
            ``"direct"`` always sums directly

    Raises:
        PreconditionError: the lattice has no point whose packet lies in the domain
    """
    fhat = f.to_frequency()
    grid = fhat.grid
    spatial_extent = grid.spatial_extent
    n1, n2 = grid.offset_mesh()

    coarse = band_indices(lat, 0, 0, spatial_extent)
    if coarse.size == 0:
        raise PreconditionError("empty index set: lattice coarser than domain")

    def run(band: Band) -> BandCoefficients:
        j, k = band
        indices = coarse if j == 0 else band_indices(lat, j, k, spatial_extent)
        window = _band_window_samples(j, k, w, w0, grid)
        h = fhat.samples * np.conj(window) * (8.0 ** (-j / 2.0) * grid.spacing ** 2)
        plan = band_plan(lat, j, k, grid)
        if _use_fast(plan, method):
            values = _fast_analysis(plan, h, n1, n2, indices)
        else:
            values = _direct_analysis(plan, h, n1, n2, indices)
        return BandCoefficients(j=j, k=k, indices=indices, values=values)

    results = map_ordered(run, bands(j_max))
    coefficients = CoefficientSet(lattice=lat, j_max=j_max, grid=grid, bands={(b.j, b.k): b for b in results})
    logger.debug(f"analyzed {grid.n}^2 field into {coefficients.count} coefficients (j_max={j_max}, method={method})")
    return coefficients


def synthesize(
    c: CoefficientSet,
    w: FrequencyWindow,
    w0: FrequencyWindow,
    grid: Optional[FrequencyGrid] = None,
    method: Method = "auto",
) -> Field:
    """``Σ_idx c(idx) φ̂_idx`` accumulated on the frequency grid, the adjoint of ``analyze``."""
    grid = grid or c.grid
    n1, n2 = grid.offset_mesh()
    lat = c.lattice

    def run(key: Band) -> np.ndarray:
        j, k = key
        band = c.bands[key]
        window = _band_window_samples(j, k, w, w0, grid) * 8.0 ** (-j / 2.0)
        plan = band_plan(lat, j, k, grid)
        if _use_fast(plan, method):
            return window * _fast_synthesis(plan, band.values, n1, n2, band.indices)
        support = np.nonzero(window.ravel())[0]
        out = np.zeros(grid.n * grid.n, dtype=np.complex128)
        out[support] = window.ravel()[support] * _direct_synthesis(plan, band.values, support, n1, n2, band.indices)
        return out.reshape(grid.n, grid.n)

    total = np.zeros((grid.n, grid.n), dtype=np.complex128)
    for part in map_ordered(run, list(c.bands.keys())):
        total += part
    return Field(samples=total, domain="frequency", extent=grid.extent)


def frame_energy(f: Field, w: FrequencyWindow, w0: FrequencyWindow, lat: Lattice, j_max: int) -> float:
    """``<S_Λ f, f> = Σ |<f, φ_idx>|^2``."""
    return analyze(f, w, w0, lat, j_max).energy()


def apply_frame_operator(f: Field, w: FrequencyWindow, w0: FrequencyWindow, lat: Lattice, j_max: int) -> Field:
    return synthesize(analyze(f, w, w0, lat, j_max), w, w0)


class FrameCheckReport(BaseModel):
    """``‖|Λ| Ŝf - m f̂‖`` against ``Δ(Λ)‖f‖``."""

    residual: float
    f_norm: float
    relative_residual: float
    delta: float
    bound: float
    passed: bool


def frame_operator_frequency_check(
    f: Field,
    w: WindowSpec,
    w0: CoarseWindowSpec,
    lat: Lattice,
    j_max: int,
    delta: Optional[float] = None,
    slack: float = 0.05,
) -> FrameCheckReport:
    """
    Compare the frame operator with its multiplier part ``m·f̂``.

    ``delta`` defaults to ``Δ(Λ)`` computed on the field's own frequency grid.
    """
    fhat = f.to_frequency()
    grid = fhat.grid
    symbol = compute_symbol_m(w, w0, grid, j_max)
    framed = apply_frame_operator(fhat, w, w0, lat, j_max)
    difference = framed.samples * lat.volume - symbol.values * fhat.samples
    residual = float(math.sqrt(np.sum(np.abs(difference) ** 2)) * grid.spacing)
    norm = fhat.norm()
    if delta is None:
        delta = delta_lattice(w, w0, lat, grid, j_max, strict=False).value
    bound = delta * norm
    passed = residual <= bound * (1.0 + slack) + 1e-10 * norm
    report = FrameCheckReport(
        residual=residual,
        f_norm=norm,
        relative_residual=residual / norm if norm > 0 else 0.0,
        delta=delta,
        bound=bound,
        passed=passed,
    )
    logger.info(f"frame operator check: residual={residual:.4g}, bound={bound:.4g}, passed={passed}")
    return report


def smoothstep(u) -> np.ndarray:
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return u * u * (3.0 - 2.0 * u)


class DualWindowSpec(BaseModel):
    """
    Analysis window ``ψ̂ = η φ̂`` of the approximate dual, where ``η`` cuts
    ``φ̂`` off below level ``ε/2`` and keeps it above ``ε``.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    base: WindowSpec
    coarse: CoarseWindowSpec
    eps: float = PydanticField(ge=0)
    m_tilde: SymbolField
    A: float
    star_norm: float
    band: Optional[float] = None

    @property
    def a_tilde(self) -> float:
        return self.A - self.eps * self.star_norm

    @property
    def b_tilde(self) -> float:
        return float(self.m_tilde.values.max())

    def cutoff(self, xi1, xi2) -> np.ndarray:
        magnitude = np.abs(self.base.evaluate(xi1, xi2))
        if self.eps == 0:
            return np.ones_like(magnitude)
        half = 0.5 * self.eps
        return smoothstep((magnitude - half) / half)

    def evaluate(self, xi1, xi2) -> np.ndarray:
        values = self.base.evaluate(xi1, xi2)
        if self.eps == 0:
            return values
        half = 0.5 * self.eps
        return smoothstep((np.abs(values) - half) / half) * values


def build_dual(
    w: WindowSpec,
    w0: CoarseWindowSpec,
    eps: float,
    grid: FrequencyGrid,
    j_max: int,
    band: Optional[float] = None,
) -> DualWindowSpec:
    """
    Build the approximate dual window and its symbol ``m̃``.

    ``eps = 0`` gives the canonical approximate dual ``ψ = φ``. ``band`` takes
    the lower covering constant over ``|ξ|_∞ <= band`` only, which is the
    relevant constant for fields supported there.

    Raises:
        PreconditionError: ``eps·‖φ̂‖_* >= A`` ("cutoff too large")
    """
    if eps < 0:
        raise ValueError(f"cutoff must be non-negative, got {eps}")
    symbol = compute_symbol_m(w, w0, grid, j_max)
    A, _ = symbol.extrema(band)
    xi1, xi2 = grid.mesh()
    star = star_norm_on_points(lambda a, b: np.abs(w.evaluate(a, b)), xi1, xi2, j_max).value
    if eps * star >= A:
        raise PreconditionError(f"cutoff too large: eps*star_norm = {eps * star:.4g} >= A = {A:.4g}")

    placeholder = DualWindowSpec(base=w, coarse=w0, eps=eps, m_tilde=symbol, A=A, star_norm=star, band=band)
    m_tilde = symbol if eps == 0 else covering_symbol(w, placeholder, w0, grid, j_max)
    dual = placeholder.model_copy(update={"m_tilde": m_tilde})
    logger.info(f"dual window: eps={eps:.3g}, star norm={star:.4g}, A={A:.6g}, A_tilde={dual.a_tilde:.6g}")
    return dual


class ReconstructionReport(BaseModel):
    relative_error: float
    bound: float
    delta: float
    a_tilde: float
    eps: float
    within_bound: bool


def approx_reconstruct(
    f: Field,
    dual: DualWindowSpec,
    lat: Lattice,
    j_max: int,
    delta: Optional[float] = None,
) -> Tuple[Field, ReconstructionReport]:
    """
    ``f̃ = |Λ| Σ <M_{1/m̃} f, ψ_idx> φ_idx`` with the error bound ``Δ(Λ)/Ã``.

    Raises:
        PreconditionError: the field is not on the dual's grid, ``Ã <= 0``, or
            ``m̃`` vanishes where ``f̂`` does not
    """
    fhat = f.to_frequency()
    grid = dual.m_tilde.grid
    if fhat.grid != grid:
        raise PreconditionError(f"field grid {fhat.grid} differs from the dual symbol grid {grid}")
    if dual.a_tilde <= 0:
        raise PreconditionError(f"invalid dual: A_tilde = {dual.a_tilde:.4g}")
    m_tilde = dual.m_tilde.values
    active = fhat.samples != 0
    if np.any(m_tilde[active] <= 0):
        raise PreconditionError("approximate dual multiplier vanishes on the support of f")

    weighted = np.zeros_like(fhat.samples)
    weighted[active] = fhat.samples[active] / m_tilde[active]
    g = fhat.with_samples(weighted)
    coefficients = analyze(g, dual, dual.coarse, lat, j_max)
    reconstruction = synthesize(coefficients, dual.base, dual.coarse, grid)
    reconstruction = reconstruction.with_samples(reconstruction.samples * lat.volume)

    if delta is None:
        delta = delta_lattice(dual.base, dual.coarse, lat, grid, j_max, strict=False).value
    norm = fhat.norm()
    error = float(math.sqrt(np.sum(np.abs(reconstruction.samples - fhat.samples) ** 2)) * grid.spacing)
    relative = error / norm if norm > 0 else 0.0
    bound = delta / dual.a_tilde
    report = ReconstructionReport(
        relative_error=relative,
        bound=bound,
        delta=delta,
        a_tilde=dual.a_tilde,
        eps=dual.eps,
        within_bound=relative <= bound * (1.0 + settings.quadrature_slack) + 1e-12,
    )
    logger.info(f"reconstruction: relative error {relative:.4g}, bound {bound:.4g}")
    return reconstruction, report
