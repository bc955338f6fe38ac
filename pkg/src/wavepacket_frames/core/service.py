"""
Core service layer for the wavepacket frame toolkit.
"""
import asyncio
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from wavepacket_frames.config import settings
from wavepacket_frames.core import formats
from wavepacket_frames.core.criterion import (
    asymptotic_fit,
    certify_frame,
    compute_symbol_m,
    lattice_sweep,
    refine_covering,
    symbol_grid,
)
from wavepacket_frames.core.errors import PreconditionError
from wavepacket_frames.core.field import Field, FrequencyGrid, random_band_limited_field
from wavepacket_frames.core.geometry import Box, Lattice, star_norm_estimate
from wavepacket_frames.core.transform import DualWindowSpec, analyze, approx_reconstruct, build_dual, synthesize
from wavepacket_frames.core.wavefront import (
    PhaseSpacePoint,
    SignalParams,
    decay_probe,
    make_test_signal,
    wavefront_map,
)
from wavepacket_frames.core.window import CoarseWindowSpec, WindowSpec, design_window, verify_decay_assumptions


def _failure(name: str, e: Exception) -> Dict[str, Any]:
    logger.error(f"Error in {name}: {e}")
    return {"success": False, "data": None, "error": str(e), "error_type": type(e).__name__}


def _load_scaled_window(path: str, scale: float) -> Tuple[WindowSpec, CoarseWindowSpec]:
    w, w0 = formats.load_window(path)
    if scale != 1.0:
        w, w0 = w.scaled(scale), w0.scaled(scale)
    return w, w0


def _input_field(
    input_path: Optional[str],
    grid_n: int,
    extent: float,
    seed: int,
    band: Optional[float],
) -> Field:
    if input_path:
        return formats.read_field(input_path)
    logger.info(f"no input field given; using seeded random field (seed={seed}, band={band})")
    return random_band_limited_field(grid_n, extent, band, seed)


def _dual_source(
    f: Field,
    w: WindowSpec,
    w0: CoarseWindowSpec,
    eps: float,
    j_max: int,
    band: Optional[float],
) -> Tuple[Field, DualWindowSpec]:
    """Frequency samples of ``f`` (cut to ``|ξ|_∞ <= band``) and the dual on their grid."""
    fhat = f.to_frequency()
    grid = fhat.frequency_grid
    if band is not None:
        fhat = fhat.with_samples(np.where(grid.band_mask(band), fhat.samples, 0.0))
    return fhat, build_dual(w, w0, eps, grid, j_max, band)


class WavepacketService:
    """Core service for wavepacket frame operations."""

    async def design(self, design_path: str, out: Optional[str] = None) -> Dict[str, Any]:
        """Solve the vanishing-moment system of a design file and write the window."""
        try:
            spec = formats.load_design(design_path)
            w = await asyncio.to_thread(design_window, spec.main, spec.correctors, spec.moment_order)
            w0 = CoarseWindowSpec(sigma=spec.sigma)
            if out:
                formats.save_window(w, w0, out)
            return {
                "success": True,
                "data": {
                    "amplitudes": w.amplitudes.tolist(),
                    "residual_moments": w.moments().tolist(),
                    "moment_order": w.moment_order,
                    "output": out,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("design", e)

    async def certify(
        self,
        window_path: str,
        lattice: Sequence[float],
        grid_n: int,
        extent: float,
        j_max: int,
        gamma_radius: Optional[float] = None,
        band: Optional[float] = None,
        refined: bool = False,
        window_scale: float = 1.0,
        out: Optional[str] = None,
        refine_levels: int = 0,
    ) -> Dict[str, Any]:
        """
        Frame certificate on the frequency grid dual to an ``grid_n``-point spatial grid of half-width ``extent``.

        With ``refine_levels`` the covering constants are recomputed on that many
        successive doublings of the grid.
        """
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            lat = Lattice.from_values(lattice)
            grid = FrequencyGrid.from_spatial(grid_n, extent)
            cert = await asyncio.to_thread(certify_frame, w, w0, lat, grid, j_max, gamma_radius, band, refined)
            refinement = []
            if refine_levels:
                levels = await asyncio.to_thread(refine_covering, w, w0, grid, j_max, refine_levels, band)
                refinement = [level.model_dump() for level in levels]
            if out:
                formats.save_certificate(cert, out)
            return {
                "success": True,
                "data": {
                    "certificate": cert.model_dump() | {"bound_ratio": cert.bound_ratio},
                    "refinement": refinement,
                    "output": out,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("certify", e)

    async def sweep(
        self,
        window_path: str,
        spacings: Sequence[float],
        grid_n: int,
        extent: float,
        j_max: int,
        gamma_radius: Optional[float] = None,
        window_scale: float = 1.0,
        out: Optional[str] = None,
    ) -> Dict[str, Any]:
        """``Δ`` along square lattices with the fitted Gaussian decay rate."""
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            grid = FrequencyGrid.from_spatial(grid_n, extent)
            points = await asyncio.to_thread(lattice_sweep, w, w0, sorted(spacings, reverse=True), grid, j_max, gamma_radius)
            fit = None
            try:
                fit = asymptotic_fit(points)
            except PreconditionError as e:
                logger.warning(f"no asymptotic fit: {e}")
            table = formats.format_sweep_table(points, fit)
            if out:
                Path(out).write_text(table)
            return {
                "success": True,
                "data": {
                    "points": [p.model_dump() for p in points],
                    "fit": fit.model_dump() if fit else None,
                    "table": table,
                    "output": out,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("sweep", e)

    async def analyze(
        self,
        window_path: str,
        lattice: Sequence[float],
        j_max: int,
        out: str,
        input_path: Optional[str] = None,
        grid_n: int = 128,
        extent: float = 1.0,
        seed: int = 0,
        band: Optional[float] = None,
        window_scale: float = 1.0,
        method: str = "auto",
    ) -> Dict[str, Any]:
        """Analyze a field file (or a seeded random field) into a WPC1 coefficient file."""
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            f = _input_field(input_path, grid_n, extent, seed, band)
            coefficients = await asyncio.to_thread(analyze, f, w, w0, Lattice.from_values(lattice), j_max, method)
            formats.write_coefficients(coefficients, out)
            return {
                "success": True,
                "data": {"count": coefficients.count, "energy": coefficients.energy(), "output": out},
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("analyze", e)

    async def synthesize(
        self,
        window_path: str,
        lattice: Sequence[float],
        coefficients_path: str,
        grid_n: int,
        extent: float,
        out: str,
        window_scale: float = 1.0,
    ) -> Dict[str, Any]:
        """Synthesize a WPC1 coefficient file into a frequency-domain WPF1 field."""
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            grid = FrequencyGrid.from_spatial(grid_n, extent)
            coefficients = formats.read_coefficients(coefficients_path, Lattice.from_values(lattice), grid)
            field = await asyncio.to_thread(synthesize, coefficients, w, w0, grid)
            formats.write_field(field, out)
            return {
                "success": True,
                "data": {"count": coefficients.count, "norm": field.norm(), "output": out},
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("synthesize", e)

    async def reconstruct(
        self,
        window_path: str,
        lattice: Sequence[float],
        j_max: int,
        eps: float,
        input_path: Optional[str] = None,
        grid_n: int = 128,
        extent: float = 1.0,
        seed: int = 0,
        band: Optional[float] = None,
        window_scale: float = 1.0,
        out: Optional[str] = None,
    ) -> Dict[str, Any]:
        """Approximate-dual reconstruction with the measured error next to its bound."""
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            f = _input_field(input_path, grid_n, extent, seed, band)
            grid = f.frequency_grid
            lat = Lattice.from_values(lattice)

            def run():
                dual = build_dual(w, w0, eps, grid, j_max, band)
                return approx_reconstruct(f, dual, lat, j_max)

            reconstruction, report = await asyncio.to_thread(run)
            if out:
                formats.write_field(reconstruction, out)
            return {
                "success": True,
                "data": {"report": report.model_dump(), "output": out},
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("reconstruct", e)

    async def probe(
        self,
        window_path: str,
        lattice: Sequence[float],
        x0: Tuple[float, float],
        theta0: float,
        j_range: Sequence[int],
        input_path: Optional[str] = None,
        signal: str = "edge",
        signal_params: Optional[SignalParams] = None,
        grid_n: int = 512,
        extent: float = 1.0,
        window_scale: float = 1.0,
        out: Optional[str] = None,
        dual_eps: Optional[float] = None,
        dual_j_max: Optional[int] = None,
        band: Optional[float] = None,
    ) -> Dict[str, Any]:
        """
        Decay probe at one phase-space point, as a text table.

        With ``dual_eps`` the approximate coefficients of the dual built at that
        cutoff are probed instead.
        """
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            f = formats.read_field(input_path) if input_path else make_test_signal(signal, grid_n, extent, signal_params)
            point = PhaseSpacePoint(x0=x0, theta0=theta0)
            lat = Lattice.from_values(lattice)

            def run():
                source, dual = f, None
                if dual_eps is not None:
                    source, dual = _dual_source(f, w, w0, dual_eps, dual_j_max or max(j_range), band)
                return decay_probe(source, point, lat, list(j_range), w, dual=dual)

            result = await asyncio.to_thread(run)
            report = formats.format_probe_report(result)
            if out:
                Path(out).write_text(report)
            return {
                "success": True,
                "data": {
                    "rate": result.rate,
                    "usable_j_max": result.usable_j_max,
                    "approximate": result.approximate,
                    "report": report,
                    "output": out,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("probe", e)

    async def wavefront(
        self,
        window_path: str,
        lattice: Sequence[float],
        j_range: Sequence[int],
        points: List[Tuple[float, float]],
        angles: List[float],
        s: float,
        out: str,
        input_path: Optional[str] = None,
        signal: str = "edge",
        signal_params: Optional[SignalParams] = None,
        grid_n: int = 512,
        extent: float = 1.0,
        threshold: Optional[float] = None,
        window_scale: float = 1.0,
        dual_eps: Optional[float] = None,
        dual_j_max: Optional[int] = None,
        band: Optional[float] = None,
    ) -> Dict[str, Any]:
        """Wavefront classification over a probe grid, written as a WPF1 verdict field."""
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            if input_path:
                f = formats.read_field(input_path)
            else:
                f = make_test_signal(signal, grid_n, extent, signal_params)
            lat = Lattice.from_values(lattice)

            def run():
                source, dual = f, None
                if dual_eps is not None:
                    source, dual = _dual_source(f, w, w0, dual_eps, dual_j_max or max(j_range), band)
                return wavefront_map(source, lat, list(j_range), points, angles, s, w, threshold, dual)

            result = await asyncio.to_thread(run)
            formats.write_field(result.to_field(f.spatial_extent), out)
            return {
                "success": True,
                "data": {
                    "flagged": result.flagged,
                    "approximate": result.approximate,
                    "threshold": result.threshold,
                    "sums": result.sums.tolist(),
                    "output": out,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("wavefront", e)

    async def star_norm(
        self,
        window_path: str,
        extent: float,
        grid_n: int,
        j_max: int,
        window_scale: float = 1.0,
        covering: bool = False,
    ) -> Dict[str, Any]:
        """
        Star-norm estimate of ``|φ̂|`` over the box ``[-extent, extent]^2``, with decay bookkeeping.

        With ``covering`` the covering constants are added, computed on the
        standalone symbol grid dilated by ``window_scale``.
        """
        try:
            w, w0 = _load_scaled_window(window_path, window_scale)
            estimate = await asyncio.to_thread(
                star_norm_estimate, lambda a, b: np.abs(w.evaluate(a, b)), Box.symmetric(extent), grid_n, j_max
            )
            decay = verify_decay_assumptions(w, extent)
            constants = None
            if covering:
                grid = symbol_grid(extent=settings.symbol_extent * window_scale)
                symbol = await asyncio.to_thread(compute_symbol_m, w, w0, grid, j_max)
                constants = {
                    "A": symbol.lower,
                    "B": symbol.upper,
                    "grid_n": grid.n,
                    "grid_extent": grid.extent,
                    "tail_bound": symbol.tail_bound if math.isfinite(symbol.tail_bound) else None,
                }
            return {
                "success": True,
                "data": {
                    "star_norm": estimate.value,
                    "tail_bound": estimate.tail_bound if math.isfinite(estimate.tail_bound) else None,
                    "level_maxima": estimate.level_maxima,
                    "decay": decay.model_dump(),
                    "covering": constants,
                },
                "error": None,
                "error_type": None,
            }
        except Exception as e:
            return _failure("star_norm", e)


# Global service instance
service = WavepacketService()
