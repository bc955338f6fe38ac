"""
Scale-tracked coefficient probes for wavefront-set detection.

For a phase-space point ``(x0, θ0)`` each scale ``j`` selects the rotation
``k_j`` with ``2πk_j/2^j <= 2π - θ0 <= 2π(k_j+1)/2^j`` and the lattice point
``λ_j`` nearest to ``A_{j,k_j} x0``. Fast decay of ``<f, φ_{j,k_j,λ_j}>`` in
``j`` means the direction is regular at ``x0``.
"""
from __future__ import annotations

import math
import threading
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field as PydanticField, field_validator

from wavepacket_frames.config import settings
from wavepacket_frames.core.errors import PreconditionError
from wavepacket_frames.core.field import Field
from wavepacket_frames.core.geometry import Lattice, apply_dual_matrix, packet_matrices
from wavepacket_frames.core.parallel import map_ordered
from wavepacket_frames.core.transform import DualWindowSpec, band_plan
from wavepacket_frames.core.window import FrequencyWindow, WindowSpec

TWO_PI = 2.0 * math.pi


class PhaseSpacePoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x0: Tuple[float, float]
    theta0: float

    @field_validator("theta0")
    @classmethod
    def _normalize(cls, value: float) -> float:
        angle = math.fmod(value, TWO_PI)
        if angle < 0:
            angle += TWO_PI
        return 0.0 if angle >= TWO_PI else angle


def grid_params(p: PhaseSpacePoint, lat: Lattice, j: int) -> Tuple[int, Tuple[int, int]]:
    """
    Rotation ``k_j`` and lattice coordinates of ``λ_j`` tracking ``p`` at scale ``j``.

    When ``t = 2^j (2π - θ0)/2π`` is an integer both neighbouring rotations
    qualify and ``k = t - 1`` is returned.
    """
    if j < 1:
        raise ValueError(f"scale must be at least 1, got {j}")
    count = 2 ** j
    position = count * (TWO_PI - p.theta0) / TWO_PI
    nearest = round(position)
    if abs(position - nearest) <= 1e-12 * count:
        k = nearest - 1
    else:
        k = math.floor(position)
    k = min(max(k, 0), count - 1)
    A, _ = packet_matrices(j, k)
    return k, lat.nearest_index(A @ np.asarray(p.x0, dtype=float))


class DecayRecord(BaseModel):
    j: int
    k: int
    m1: int
    m2: int
    abs_coeff: float
    log4_abs: float


class DecayProbe(BaseModel):
    point: PhaseSpacePoint
    records: List[DecayRecord]
    rate: float
    usable_j_max: int
    sobolev_order: Optional[float] = None
    approximate: bool = False

    def coefficients(self) -> np.ndarray:
        return np.array([record.abs_coeff for record in self.records])

    @property
    def within_usable_range(self) -> bool:
        return all(record.j <= self.usable_j_max for record in self.records)


class BandCache:
    """Per-band weights ``f̂ conj(window(Bξ))`` restricted to their support, built on first use."""

    def __init__(self, f: Field, w: FrequencyWindow, lat: Lattice):
        self.fhat = f.to_frequency()
        self.grid = self.fhat.grid
        self.window = w
        self.lattice = lat
        self._bands: Dict[Tuple[int, int], Tuple[np.ndarray, np.ndarray]] = {}
        self._lock = threading.Lock()

    def _band(self, j: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
        with self._lock:
            if (j, k) not in self._bands:
                xi1, xi2 = self.grid.mesh()
                eta1, eta2 = apply_dual_matrix(j, k, xi1, xi2)
                h = self.fhat.samples * np.conj(self.window.evaluate(eta1, eta2))
                h *= 8.0 ** (-j / 2.0) * self.grid.spacing ** 2
                support = np.nonzero(h.ravel())[0]
                n1, n2 = self.grid.offset_mesh()
                offsets = np.stack([n1.ravel()[support], n2.ravel()[support]]).astype(float)
                self._bands[(j, k)] = (band_plan(self.lattice, j, k, self.grid).transfer @ offsets, h.ravel()[support])
            return self._bands[(j, k)]

    def coefficient(self, j: int, k: int, m: Tuple[int, int]) -> complex:
        phases, weights = self._band(j, k)
        return complex(np.sum(weights * np.exp(2j * math.pi * (phases[0] * m[0] + phases[1] * m[1]))))


def usable_scale(w: WindowSpec, f: Field) -> int:
    """
    Finest ``j`` whose packets, out to three Gaussian widths, still fit below
    the grid's Nyquist frequency (``ξ1`` grows like ``4^j``, ``ξ2`` like ``2^j``).
    """
    nyquist = f.frequency_grid.extent
    reach1 = max(abs(term.center) + 3.0 / math.sqrt(term.width1) for term in w.terms)
    reach2 = max(3.0 / math.sqrt(term.width2) for term in w.terms)
    j = 0
    while j < 30 and max(4.0 ** (j + 1) * reach1, 2.0 ** (j + 1) * reach2) <= nyquist:
        j += 1
    return j


def _probe_source(f: Field, w: WindowSpec, lat: Lattice, dual: Optional[DualWindowSpec]) -> BandCache:
    if dual is None:
        return BandCache(f, w, lat)
    fhat = f.to_frequency()
    if fhat.grid != dual.m_tilde.grid:
        raise PreconditionError("field grid differs from the dual symbol grid")
    m_tilde = dual.m_tilde.values
    active = fhat.samples != 0
    if np.any(m_tilde[active] <= 0):
        raise PreconditionError("approximate dual multiplier vanishes on the support of f")
    weighted = np.zeros_like(fhat.samples)
    weighted[active] = fhat.samples[active] / m_tilde[active]
    return BandCache(fhat.with_samples(weighted), dual, lat)


def _fit_rate(js: Sequence[int], magnitudes: Sequence[float]) -> float:
    usable = [(j, math.log(c) / math.log(4.0)) for j, c in zip(js, magnitudes) if c > settings.coefficient_floor]
    if len(usable) < 2:
        return math.inf
    slope, _ = np.polyfit([u[0] for u in usable], [u[1] for u in usable], 1)
    return -float(slope)


def _run_probe(cache: BandCache, p: PhaseSpacePoint, lat: Lattice, j_range: Sequence[int], usable: int, approximate: bool) -> DecayProbe:
    records = []
    for j in j_range:
        k, m = grid_params(p, lat, j)
        magnitude = abs(cache.coefficient(j, k, m))
        records.append(DecayRecord(
            j=j,
            k=k,
            m1=m[0],
            m2=m[1],
            abs_coeff=magnitude,
            log4_abs=math.log(magnitude) / math.log(4.0) if magnitude > 0 else -math.inf,
        ))
    rate = _fit_rate([r.j for r in records], [r.abs_coeff for r in records])
    return DecayProbe(point=p, records=records, rate=rate, usable_j_max=usable, approximate=approximate)


def decay_probe(
    f: Field,
    p: PhaseSpacePoint,
    lat: Lattice,
    j_range: Sequence[int],
    w: WindowSpec,
    dual: Optional[DualWindowSpec] = None,
    s: Optional[float] = None,
) -> DecayProbe:
    """
    Coefficients ``<f, φ_{j,k_j,λ_j}>`` for ``j`` in ``j_range`` and their decay rate.

    The rate is minus the least-squares slope of ``log4|c_j|`` against ``j``
    over coefficients above the floor; fewer than two such values give ``inf``.
    With ``dual`` the approximate coefficients ``<M_{1/m̃} f, ψ_{j,k_j,λ_j}>`` are used.
    """
    usable = usable_scale(w, f)
    if max(j_range) > usable:
        logger.warning(f"scales above j={usable} exceed the grid's Nyquist limit for this window")
    cache = _probe_source(f, w, lat, dual)
    probe = _run_probe(cache, p, lat, list(j_range), usable, dual is not None)
    if s is not None:
        probe = probe.model_copy(update={"sobolev_order": s})
    logger.debug(f"probe at {p.x0}, theta={p.theta0:.4f}: rate {probe.rate:.3f}")
    return probe


def regularity_sum(probe: DecayProbe, s: float) -> float:
    """``Σ_j |c_j|^2 4^{2js}`` over the probed scales."""
    return float(sum(record.abs_coeff ** 2 * 4.0 ** (2.0 * record.j * s) for record in probe.records))


class WavefrontMap(BaseModel):
    """
    Verdicts for every ``(point, angle)`` probe; ``regular[p, q]`` refers to
    ``points[p]`` and ``angles[q]``.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    points: List[Tuple[float, float]]
    angles: List[float]
    sobolev_order: float
    threshold: float
    sums: np.ndarray
    regular: np.ndarray
    approximate: bool = False

    @property
    def flagged(self) -> List[Tuple[int, int]]:
        return [(int(p), int(q)) for p, q in zip(*np.nonzero(~self.regular))]

    def to_field(self, extent: float = 1.0) -> Field:
        """
        Verdicts as a square field: sample ``p·Q + q`` in row-major order holds
        1 (singular) or 0 (regular); trailing padding holds -1.
        """
        count = self.regular.size
        n = 2
        while n * n < count:
            n *= 2
        flat = np.full(n * n, -1.0, dtype=np.complex128)
        flat[:count] = (~self.regular).ravel().astype(float)
        return Field(samples=flat.reshape(n, n), domain="spatial", extent=extent)


def wavefront_map(
    f: Field,
    lat: Lattice,
    j_range: Sequence[int],
    points: Sequence[Tuple[float, float]],
    angles: Sequence[float],
    s: float,
    w: WindowSpec,
    threshold: Optional[float] = None,
    dual: Optional[DualWindowSpec] = None,
) -> WavefrontMap:
    """
    Classify every probe as regular at order ``s`` when ``Σ_j |c_j|^2 4^{2js} / ‖f‖^2``
    stays below ``threshold`` (``settings.wavefront_threshold`` by default).
    """
    threshold = settings.wavefront_threshold if threshold is None else threshold
    norm2 = f.norm() ** 2
    shape = (len(points), len(angles))
    if norm2 == 0.0:
        sums = np.zeros(shape)
    else:
        cache = _probe_source(f, w, lat, dual)
        usable = usable_scale(w, f)
        probes = [PhaseSpacePoint(x0=tuple(x), theta0=theta) for x in points for theta in angles]
        results = map_ordered(lambda p: _run_probe(cache, p, lat, list(j_range), usable, dual is not None), probes)
        sums = np.array([regularity_sum(probe, s) for probe in results]).reshape(shape) / norm2
    regular = sums < threshold
    logger.info(f"wavefront map: {int((~regular).sum())} of {regular.size} probes flagged at order s={s}")
    return WavefrontMap(
        points=[(float(x[0]), float(x[1])) for x in points],
        angles=[float(a) for a in angles],
        sobolev_order=s,
        threshold=threshold,
        sums=sums,
        regular=regular,
        approximate=dual is not None,
    )


def angle_grid(count: int, offset: float = 1e-9) -> List[float]:
    """
    Probe angles ``2πq/count - offset``. A probe angle equal to a packet
    direction sits on the boundary of two rotation cells; the small clockwise
    shift selects the packet pointing exactly along it.
    """
    if count < 1:
        raise ValueError(f"need at least one angle, got {count}")
    return [(TWO_PI * q / count - offset) % TWO_PI for q in range(count)]


def calibrate_threshold(regular_sums: Sequence[float], singular_sums: Sequence[float]) -> float:
    """Geometric mean of the largest regular and the smallest singular normalized sum."""
    top = max(regular_sums)
    bottom = min(singular_sums)
    if top >= bottom:
        raise PreconditionError(f"cannot separate regular ({top:.3g}) from singular ({bottom:.3g}) probes")
    if top <= 0:
        return bottom * 1e-3
    return math.sqrt(top * bottom)


class SignalParams(BaseModel):
    """Geometry of the synthetic test signals."""

    center: Tuple[float, float] = (0.0, 0.0)
    width: float = PydanticField(default=1.0, gt=0)
    normal_angle: float = 0.0
    second_normal_angle: float = math.pi / 2
    window_radius: float = PydanticField(default=0.35, gt=0)


def _half_plane(x1: np.ndarray, x2: np.ndarray, center, angle: float) -> np.ndarray:
    return ((x1 - center[0]) * math.cos(angle) + (x2 - center[1]) * math.sin(angle) <= 0).astype(float)


def make_test_signal(
    kind: Literal["bump", "edge", "corner"],
    n: int,
    extent: float,
    params: Optional[SignalParams] = None,
) -> Field:
    """
    Sample a synthetic spatial signal on the ``n×n`` grid of half-width ``extent``.

    ``bump``: ``exp(-|x-c|^2/width^2)``. ``edge``: the half-plane
    ``(x-c)·ν <= 0`` (``ν`` at ``normal_angle``) times
    ``exp(-|x-c|^2/window_radius^2)``. ``corner``: the intersection of two
    such half-planes with the same window.
    """
    params = params or SignalParams()
    if max(abs(params.center[0]), abs(params.center[1])) >= extent:
        raise PreconditionError(f"signal center {params.center} outside the grid extent {extent}")
    axis = (np.arange(n) - n // 2) * (2.0 * extent / n)
    x1, x2 = np.meshgrid(axis, axis, indexing="xy")
    r2 = (x1 - params.center[0]) ** 2 + (x2 - params.center[1]) ** 2
    if kind == "bump":
        values = np.exp(-r2 / params.width ** 2)
    elif kind == "edge":
        values = _half_plane(x1, x2, params.center, params.normal_angle) * np.exp(-r2 / params.window_radius ** 2)
    elif kind == "corner":
        wedge = np.minimum(
            _half_plane(x1, x2, params.center, params.normal_angle),
            _half_plane(x1, x2, params.center, params.second_normal_angle),
        )
        values = wedge * np.exp(-r2 / params.window_radius ** 2)
    else:
        raise ValueError(f"unknown signal kind {kind!r}")
    return Field(samples=values, domain="spatial", extent=extent)
