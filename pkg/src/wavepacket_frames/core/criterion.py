"""
Daubechies-type frame criterion for wavepacket systems.

Computes the covering symbol ``m``, the correlation function ``Θ``, the
lattice defect ``Δ(Λ)`` and assembles frame certificates. All suprema are
maxima over a ``FrequencyGrid``; all scale sums stop at ``j_max`` and carry a
tail estimate.
"""
from __future__ import annotations

import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict
from scipy.stats import linregress

from wavepacket_frames.config import settings
from wavepacket_frames.core.errors import PreconditionError, TruncationError
from wavepacket_frames.core.field import FrequencyGrid
from wavepacket_frames.core.geometry import Lattice, apply_dual_matrix, dual_lattice, lattice_enumerate
from wavepacket_frames.core.parallel import map_ordered
from wavepacket_frames.core.window import CoarseWindowSpec, FrequencyWindow


def _correlation_level(
    first: FrequencyWindow,
    second: FrequencyWindow,
    xi1: np.ndarray,
    xi2: np.ndarray,
    j: int,
    zeta: Tuple[float, float],
) -> np.ndarray:
    level = np.zeros(xi1.shape)
    for k in range(2 ** j):
        eta1, eta2 = apply_dual_matrix(j, k, xi1, xi2)
        level += np.abs(first.evaluate(eta1, eta2)) * np.abs(second.evaluate(eta1 - zeta[0], eta2 - zeta[1]))
    return level


def correlation_sum(
    first: FrequencyWindow,
    second: FrequencyWindow,
    coarse: FrequencyWindow,
    xi1: np.ndarray,
    xi2: np.ndarray,
    j_max: int,
    zeta: Tuple[float, float] = (0.0, 0.0),
    max_workers: Optional[int] = None,
) -> Tuple[np.ndarray, List[float]]:
    """
    Pointwise ``|φ̂0(ξ)||φ̂0(ξ-ζ)| + Σ_{j<=j_max,k} |F(B_{j,k}ξ)||G(B_{j,k}ξ-ζ)|``.

    With ``ζ = 0`` and ``F = G = φ̂`` this is the covering symbol; the
    arithmetic is identical in both cases.

    Returns:
        The summed field and the maximum of each scale's contribution.
    """
    total = np.abs(coarse.evaluate(xi1, xi2)) * np.abs(coarse.evaluate(xi1 - zeta[0], xi2 - zeta[1]))
    levels = map_ordered(
        lambda j: _correlation_level(first, second, xi1, xi2, j, zeta),
        range(1, j_max + 1),
        max_workers=max_workers,
    )
    for level in levels:
        total += level
    return total, [float(level.max()) for level in levels]


class SymbolField(BaseModel):
    """Covering symbol sampled on a frequency grid."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: np.ndarray
    grid: FrequencyGrid
    j_max: int
    tail_bound: float
    coarse_grid_warning: bool = False

    def extrema(self, band: Optional[float] = None) -> Tuple[float, float]:
        """``(A, B)``: min and max over the grid, or over ``|ξ|_∞ <= band``."""
        selected = self.values[self.grid.band_mask(band)]
        if selected.size == 0:
            raise PreconditionError(f"band {band} contains no grid points")
        return float(selected.min()), float(selected.max())

    @property
    def lower(self) -> float:
        return float(self.values.min())

    @property
    def upper(self) -> float:
        return float(self.values.max())


def _scale_tail(last: float, extra: float) -> float:
    if extra == 0.0:
        return 0.0
    if last <= 0.0 or extra >= last:
        return math.inf
    ratio = extra / last
    return extra / (1.0 - ratio)


def covering_symbol(
    first: FrequencyWindow,
    second: FrequencyWindow,
    coarse: FrequencyWindow,
    grid: FrequencyGrid,
    j_max: int,
) -> SymbolField:
    """Symbol ``|φ̂0|^2 + Σ |F(Bξ)||G(Bξ)|`` with its scale-truncation tail."""
    if j_max < 1:
        raise ValueError(f"j_max must be at least 1, got {j_max}")
    xi1, xi2 = grid.mesh()
    values, maxima = correlation_sum(first, second, coarse, xi1, xi2, j_max)
    extra = float(_correlation_level(first, second, xi1, xi2, j_max + 1, (0.0, 0.0)).max())
    tail = _scale_tail(maxima[-1], extra)

    bandwidth = getattr(first, "packet_bandwidth", None)
    coarse_warning = bool(bandwidth is not None and grid.spacing > bandwidth())
    if coarse_warning:
        logger.warning(f"grid spacing {grid.spacing:.4g} exceeds the narrowest packet bandwidth {bandwidth():.4g}")
    values.setflags(write=False)
    return SymbolField(values=values, grid=grid, j_max=j_max, tail_bound=tail, coarse_grid_warning=coarse_warning)


def symbol_grid(n: Optional[int] = None, extent: Optional[float] = None) -> FrequencyGrid:
    """Standalone grid for the covering constants, ``SYMBOL_GRID_N`` points over ``[-SYMBOL_EXTENT, SYMBOL_EXTENT)``."""
    return FrequencyGrid(n=n or settings.symbol_grid_n, extent=extent or settings.symbol_extent)


def theta_grid(w: FrequencyWindow, j_max: int, n: Optional[int] = None) -> FrequencyGrid:
    """
    Sup grid for ``Θ``: ``THETA_GRID_N`` points over the box where packets up to
    ``j_max`` live, the window's reach (centre plus three widths) stretched by ``4^j_max``.
    """
    reach = w.reach() if hasattr(w, "reach") else settings.symbol_extent
    return FrequencyGrid(n=n or settings.theta_grid_n, extent=reach * 4.0 ** j_max)


def compute_symbol_m(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    grid: Optional[FrequencyGrid] = None,
    j_max: Optional[int] = None,
) -> SymbolField:
    """
    Covering symbol ``m(ξ) = |φ̂0(ξ)|^2 + Σ_{j,k} |φ̂(B_{j,k}ξ)|^2`` on ``grid``.

    Its minimum and maximum are the lower and upper covering constants.
    Without a grid the standalone :func:`symbol_grid` is used; ``j_max``
    defaults to ``DEFAULT_J_MAX``.
    """
    grid = grid if grid is not None else symbol_grid()
    j_max = j_max if j_max is not None else settings.default_j_max
    symbol = covering_symbol(w, w, w0, grid, j_max)
    logger.info(
        f"symbol m on {grid.n}^2 grid (extent {grid.extent:.4g}, j_max={j_max}): "
        f"min={symbol.lower:.6g}, max={symbol.upper:.6g}, tail={symbol.tail_bound:.3g}"
    )
    return symbol


def theta(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    zeta: Sequence[float],
    grid: Optional[FrequencyGrid] = None,
    j_max: Optional[int] = None,
    max_workers: Optional[int] = None,
) -> float:
    """
    Correlation ``Θ(ζ) = max_ξ |φ̂0(ξ)||φ̂0(ξ-ζ)| + Σ |φ̂(Bξ)||φ̂(Bξ-ζ)|``.

    The maximum runs over ``grid``, by default :func:`theta_grid`.
    """
    j_max = j_max if j_max is not None else settings.default_j_max
    grid = grid if grid is not None else theta_grid(w, j_max)
    xi1, xi2 = grid.mesh()
    total, _ = correlation_sum(w, w, w0, xi1, xi2, j_max, (float(zeta[0]), float(zeta[1])), max_workers)
    return float(total.max())


def theta_dual(
    w: FrequencyWindow,
    psi: FrequencyWindow,
    w0: CoarseWindowSpec,
    zeta: Sequence[float],
    grid: FrequencyGrid,
    j_max: int,
    variant: int = 1,
    max_workers: Optional[int] = None,
) -> float:
    """
    Mixed correlations of the analysis window ``ψ`` against ``φ``.

    ``variant=1``: ``max_ξ Σ |φ̂(Bξ)||ψ̂(Bξ-ζ)|``;
    ``variant=2``: ``max_ξ Σ |φ̂(Bξ+ζ)||ψ̂(Bξ)|``; both with the coarse term.
    """
    xi1, xi2 = grid.mesh()
    z = (float(zeta[0]), float(zeta[1]))
    if variant == 1:
        total, _ = correlation_sum(w, psi, w0, xi1, xi2, j_max, z, max_workers)
    elif variant == 2:
        total, _ = correlation_sum(psi, w, w0, xi1, xi2, j_max, (-z[0], -z[1]), max_workers)
    else:
        raise ValueError(f"variant must be 1 or 2, got {variant}")
    return float(total.max())


class ThetaEnvelope(BaseModel):
    """Gaussian envelope ``Θ(ζ) <= C exp(-τ|ζ|^2)`` fitted on sampled shifts."""

    C: float
    tau: float
    radii: List[float]
    samples: List[Tuple[float, float, float]]


def fit_theta_envelope(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    grid: FrequencyGrid,
    j_max: int,
    directions: int = 8,
) -> ThetaEnvelope:
    """
    Sample ``Θ`` along rays, fit ``log Θ`` linearly in ``|ζ|^2`` and lift the
    prefactor until the envelope dominates every sample.

    Raises:
        PreconditionError: when the samples show no Gaussian decay
    """
    widest = max(math.sqrt(w0.sigma), w.widest_width() if hasattr(w, "widest_width") else 0.0)
    r_max = min(6.0 * widest, 2.0 * grid.extent)
    radii = list(np.linspace(0.0, r_max, 13))
    angles = np.linspace(0.0, 2.0 * math.pi, directions, endpoint=False)
    shifts = [(0.0, 0.0)] + [(r * math.cos(a), r * math.sin(a)) for r in radii[1:] for a in angles]
    values = map_ordered(lambda z: theta(w, w0, z, grid, j_max, max_workers=1), shifts)

    r2 = np.array([z[0] ** 2 + z[1] ** 2 for z in shifts])
    vals = np.array(values)
    usable = (r2 > 0) & (vals > 1e-300)
    if usable.sum() < 2:
        raise PreconditionError("theta envelope fit needs at least two non-negligible samples")
    slope, _ = np.polyfit(r2[usable], np.log(vals[usable]), 1)
    tau = -float(slope)
    if tau <= 0:
        raise PreconditionError(f"theta shows no Gaussian decay on this grid (fitted slope {slope:.3g})")
    C = float(np.max(vals * np.exp(tau * r2)))
    logger.info(f"theta envelope: C={C:.4g}, tau={tau:.4g} from {int(usable.sum())} samples")
    return ThetaEnvelope(
        C=C,
        tau=tau,
        radii=[float(r) for r in radii],
        samples=[(z[0], z[1], float(v)) for z, v in zip(shifts, values)],
    )


class DeltaEstimate(BaseModel):
    """Truncated lattice defect with its certified tail."""

    value: float
    tail_bound: float
    gamma_radius: float
    gamma_count: int
    refined: bool
    envelope: ThetaEnvelope


def _required_radius(envelope: ThetaEnvelope, volume: float, diameter: float, target: float) -> float:
    ratio = envelope.C * volume * math.pi / (envelope.tau * target)
    return diameter + math.sqrt(max(0.0, math.log(ratio)) / envelope.tau)


def _defect(
    correlation,
    pair_terms,
    lat: Lattice,
    envelope: ThetaEnvelope,
    gamma_radius: Optional[float],
    strict: bool,
    refined: bool,
) -> DeltaEstimate:
    gamma_lattice = dual_lattice(lat)
    diameter = gamma_lattice.fundamental_diameter
    if gamma_radius is None:
        radius = settings.gamma_radius_factor / math.sqrt(envelope.tau) + diameter
    else:
        radius = gamma_radius
    gammas = lattice_enumerate(gamma_lattice, radius)
    forward, backward = pair_terms(gammas)
    # the enumerated set is symmetric and lexicographic, so -γ_i is γ_{K-1-i}
    if refined:
        terms = [math.sqrt(p * q) for p, q in zip(forward, backward)]
    else:
        terms = [max(p, q) for p, q in zip(forward, backward)]
    partial = math.fsum(terms)

    volume = lat.volume
    if radius > diameter:
        tail = envelope.C * volume * math.pi / envelope.tau * math.exp(-envelope.tau * (radius - diameter) ** 2)
    else:
        tail = math.inf
    target = settings.tail_relative_tolerance * (partial + 1e-30)
    if strict and not tail < target:
        required = _required_radius(envelope, volume, diameter, target)
        raise TruncationError(
            f"{correlation} tail {tail:.3g} not below {target:.3g} at gamma radius {radius:.4g}; "
            f"use a gamma radius of at least {required:.4g}",
            required_radius=required,
        )
    logger.info(f"{correlation}: {partial:.6g} over {len(gammas)} dual points (radius {radius:.4g}, tail {tail:.3g})")
    return DeltaEstimate(
        value=partial,
        tail_bound=tail,
        gamma_radius=radius,
        gamma_count=len(gammas),
        refined=refined,
        envelope=envelope,
    )


def delta_lattice(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    lat: Lattice,
    grid: FrequencyGrid,
    j_max: int,
    gamma_radius: Optional[float] = None,
    refined: bool = False,
    strict: bool = True,
    envelope: Optional[ThetaEnvelope] = None,
) -> DeltaEstimate:
    """
    Lattice defect ``Δ(Λ) = Σ_{γ ∈ Γ\\{0}} max(Θ(γ), Θ(-γ))`` truncated to ``|γ| <= gamma_radius``.

    Args:
        refined: use ``sqrt(Θ(γ)Θ(-γ))`` instead of the maximum
        strict: raise when the envelope tail beyond the radius is not
            negligible against the partial sum
        envelope: reuse a previously fitted envelope

    Raises:
        TruncationError: the tail cannot be certified; carries the radius that would be enough
    """
    envelope = envelope or fit_theta_envelope(w, w0, grid, j_max)

    def pair_terms(gammas: np.ndarray):
        values = map_ordered(lambda g: theta(w, w0, g, grid, j_max, max_workers=1), gammas)
        return values, values[::-1]

    return _defect("delta", pair_terms, lat, envelope, gamma_radius, strict, refined)


def delta_dual_lattice(
    w: FrequencyWindow,
    psi: FrequencyWindow,
    w0: CoarseWindowSpec,
    lat: Lattice,
    grid: FrequencyGrid,
    j_max: int,
    gamma_radius: Optional[float] = None,
    strict: bool = True,
    envelope: Optional[ThetaEnvelope] = None,
) -> DeltaEstimate:
    """Defect of the mixed system, ``Σ_γ max(Θ̃1(γ), Θ̃2(γ))``; never exceeds ``Δ(Λ)``."""
    envelope = envelope or fit_theta_envelope(w, w0, grid, j_max)

    def pair_terms(gammas: np.ndarray):
        first = map_ordered(lambda g: theta_dual(w, psi, w0, g, grid, j_max, 1, max_workers=1), gammas)
        second = map_ordered(lambda g: theta_dual(w, psi, w0, g, grid, j_max, 2, max_workers=1), gammas)
        return first, second

    return _defect("dual delta", pair_terms, lat, envelope, gamma_radius, strict, refined=False)


class FrameCertificate(BaseModel):
    """Frame bounds ``|Λ|^-1 (A - Δ)`` and ``|Λ|^-1 (B + Δ)`` with truncation metadata."""

    A: float
    B: float
    delta: float
    lower: float
    upper: float
    valid: bool
    volume: float
    j_max: int
    gamma_radius: float
    gamma_count: int
    grid_n: int
    grid_extent: float
    band: Optional[float] = None
    tau_fit: float
    C_fit: float
    symbol_tail: float
    delta_tail: float
    refined: bool = False
    coarse_grid_warning: bool = False

    @property
    def bound_ratio(self) -> float:
        return self.upper / self.lower if self.lower > 0 else math.inf


def certify_frame(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    lat: Lattice,
    grid: FrequencyGrid,
    j_max: int,
    gamma_radius: Optional[float] = None,
    band: Optional[float] = None,
    refined: bool = False,
    strict: bool = True,
    envelope: Optional[ThetaEnvelope] = None,
) -> FrameCertificate:
    """
    Assemble a frame certificate on ``grid``.

    ``band`` restricts the covering constants to ``|ξ|_∞ <= band`` (the frame
    inequality for fields supported there); ``Θ`` is always maximized over the
    whole grid.
    """
    symbol = compute_symbol_m(w, w0, grid, j_max)
    A, B = symbol.extrema(band)
    delta = delta_lattice(w, w0, lat, grid, j_max, gamma_radius, refined, strict, envelope)
    volume = lat.volume
    certificate = FrameCertificate(
        A=A,
        B=B,
        delta=delta.value,
        lower=(A - delta.value) / volume,
        upper=(B + delta.value) / volume,
        valid=delta.value < A,
        volume=volume,
        j_max=j_max,
        gamma_radius=delta.gamma_radius,
        gamma_count=delta.gamma_count,
        grid_n=grid.n,
        grid_extent=grid.extent,
        band=band,
        tau_fit=delta.envelope.tau,
        C_fit=delta.envelope.C,
        symbol_tail=symbol.tail_bound,
        delta_tail=delta.tail_bound,
        refined=refined,
        coarse_grid_warning=symbol.coarse_grid_warning,
    )
    logger.info(
        f"certificate: A={A:.6g}, B={B:.6g}, delta={delta.value:.6g}, "
        f"bounds=[{certificate.lower:.6g}, {certificate.upper:.6g}], valid={certificate.valid}"
    )
    return certificate


class RefinementLevel(BaseModel):
    n: int
    spacing: float
    A: float
    B: float


def refine_covering(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    grid: FrequencyGrid,
    j_max: int,
    levels: int,
    band: Optional[float] = None,
) -> List[RefinementLevel]:
    """
    Covering constants on ``grid`` and on ``levels`` successive doublings of it.

    The grids are nested, so ``A`` never increases and ``B`` never decreases
    down the list.
    """
    if levels < 0:
        raise ValueError(f"levels must be non-negative, got {levels}")
    result = []
    for _ in range(levels + 1):
        A, B = covering_symbol(w, w, w0, grid, j_max).extrema(band)
        result.append(RefinementLevel(n=grid.n, spacing=grid.spacing, A=A, B=B))
        logger.debug(f"refinement n={grid.n}: A={A:.8g}, B={B:.8g}")
        grid = grid.refined()
    return result


class SweepPoint(BaseModel):
    a: float
    b: float
    delta: float


class AsymptoticFit(BaseModel):
    """``log Δ ≈ log(prefactor) - τ/a^2`` over a square-lattice sweep."""

    tau: float
    prefactor: float
    slope: float
    r_squared: float
    points_used: int


def lattice_sweep(
    w: FrequencyWindow,
    w0: CoarseWindowSpec,
    spacings: Sequence[float],
    grid: FrequencyGrid,
    j_max: int,
    gamma_radius: Optional[float] = None,
) -> List[SweepPoint]:
    """``Δ`` for square lattices ``a = b`` at each spacing; one envelope fit is shared."""
    envelope = fit_theta_envelope(w, w0, grid, j_max)
    points = []
    for a in spacings:
        estimate = delta_lattice(w, w0, Lattice.rectangular(a, a), grid, j_max, gamma_radius, strict=False, envelope=envelope)
        points.append(SweepPoint(a=a, b=a, delta=estimate.value))
    return points


def asymptotic_fit(sweep: Sequence[SweepPoint]) -> AsymptoticFit:
    """
    Least-squares fit of ``log Δ`` against ``1/a^2``.

    Raises:
        PreconditionError: fewer than four square points with decreasing
            spacing, or fewer than three positive values
    """
    if len(sweep) < 4:
        raise PreconditionError(f"asymptotic fit needs at least 4 sweep points, got {len(sweep)}")
    for point in sweep:
        if not math.isclose(point.a, point.b, rel_tol=1e-12):
            raise PreconditionError(f"asymptotic fit needs square lattices, got a={point.a}, b={point.b}")
    if any(later.a >= earlier.a for earlier, later in zip(sweep, sweep[1:])):
        raise PreconditionError("asymptotic fit needs strictly decreasing spacings")

    usable = [point for point in sweep if point.delta > 0]
    if len(usable) < len(sweep):
        logger.warning(f"dropped {len(sweep) - len(usable)} non-positive sweep values")
    if len(usable) < 3:
        raise PreconditionError(f"asymptotic fit needs at least 3 positive values, got {len(usable)}")

    x = np.array([1.0 / point.a ** 2 for point in usable])
    y = np.log([point.delta for point in usable])
    result = linregress(x, y)
    return AsymptoticFit(
        tau=-float(result.slope),
        prefactor=float(math.exp(result.intercept)),
        slope=float(result.slope),
        r_squared=float(result.rvalue ** 2),
        points_used=len(usable),
    )


def predict_delta(fit: AsymptoticFit, a: float, b: float) -> float:
    """
    Extrapolated ``Δ`` for a rectangular lattice from a square-lattice fit.

    ``prefactor·(e^{-τ/a^2} + e^{-τ/b^2}) / 2``: the fit absorbs both axes of a
    square lattice into its prefactor, so ``a = b`` returns the fitted law itself.
    """
    return 0.5 * fit.prefactor * (math.exp(-fit.tau / a ** 2) + math.exp(-fit.tau / b ** 2))


def largest_valid_spacing(fit: AsymptoticFit, A: float) -> float:
    """Square spacing at which the extrapolated ``Δ`` reaches ``A``."""
    if fit.prefactor <= A:
        return math.inf
    return math.sqrt(fit.tau / math.log(fit.prefactor / A))
