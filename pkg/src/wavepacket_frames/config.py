"""
Configuration settings for the wavepacket frame toolkit.
"""
import os
from pydantic import BaseModel


class Settings(BaseModel):
    """Application settings."""

    debug_mode: bool = os.getenv("DEBUG_MODE", "false").lower() == "true"
    max_workers: int = int(os.getenv("MAX_WORKERS", str(min(8, os.cpu_count() or 1))))

    # Window design
    moment_tolerance: float = float(os.getenv("MOMENT_TOLERANCE", "1e-8"))
    condition_cap: float = float(os.getenv("CONDITION_CAP", "1e12"))

    # Criterion grids and truncation
    default_j_max: int = int(os.getenv("DEFAULT_J_MAX", "8"))
    theta_grid_n: int = int(os.getenv("THETA_GRID_N", "512"))
    symbol_grid_n: int = int(os.getenv("SYMBOL_GRID_N", "1024"))
    symbol_extent: float = float(os.getenv("SYMBOL_EXTENT", "1280"))
    tail_relative_tolerance: float = float(os.getenv("TAIL_RELATIVE_TOLERANCE", "1e-6"))
    gamma_radius_factor: float = float(os.getenv("GAMMA_RADIUS_FACTOR", "12"))

    # Transform
    alignment_tolerance: float = float(os.getenv("ALIGNMENT_TOLERANCE", "1e-9"))
    quadrature_slack: float = float(os.getenv("QUADRATURE_SLACK", "0.10"))

    # Wavefront probes
    coefficient_floor: float = float(os.getenv("COEFFICIENT_FLOOR", "1e-14"))
    wavefront_threshold: float = float(os.getenv("WAVEFRONT_THRESHOLD", "1e-6"))

    # Logging
    log_level: str = os.getenv("LOG_LEVEL", "INFO")


settings = Settings()
