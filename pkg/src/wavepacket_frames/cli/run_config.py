"""
Run configuration shared by all subcommands: values from an optional
key-value config file, overridden by explicit command-line flags.
"""
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

from wavepacket_frames.config import settings
from wavepacket_frames.core.errors import FormatError
from wavepacket_frames.core.formats import flatten_sections, parse_sections
from wavepacket_frames.core.geometry import Lattice


def parse_floats(text: str) -> Tuple[float, ...]:
    return tuple(float(part) for part in text.replace(";", ",").split(",") if part.strip())


def parse_int_range(text: str) -> Tuple[int, ...]:
    """``"1..5"`` or ``"1,2,3"``."""
    if ".." in text:
        lo, hi = text.split("..", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(part) for part in text.split(",") if part.strip())


class RunConfig(BaseModel):
    window: Optional[str] = None
    lattice: Optional[Tuple[float, ...]] = None
    grid_n: int = Field(default=128, ge=2)
    extent: float = Field(default=1.0, gt=0)
    j_max: int = Field(default=settings.default_j_max, ge=1)
    gamma_radius: Optional[float] = Field(default=None, gt=0)
    eps: float = Field(default=0.0, ge=0)
    out: Optional[str] = None
    seed: int = 0
    band: Optional[float] = Field(default=None, gt=0)
    window_scale: float = Field(default=1.0, gt=0)
    input: Optional[str] = None

    @field_validator("grid_n")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value & (value - 1):
            raise ValueError(f"grid size must be a power of two, got {value}")
        return value

    @model_validator(mode="after")
    def _check_lattice(self) -> "RunConfig":
        if self.lattice is not None:
            Lattice.from_values(self.lattice)
        return self

    def lattice_values(self) -> Tuple[float, ...]:
        if self.lattice is None:
            raise ValueError("no lattice given (use --lattice a,b[,c,d])")
        return self.lattice

    def window_path(self) -> str:
        if not self.window:
            raise ValueError("no window file given (use --window PATH)")
        return self.window

    def output_path(self) -> str:
        if not self.out:
            raise ValueError("no output path given (use --out PATH)")
        return self.out

    @classmethod
    def load(cls, config_path: Optional[str], overrides: Dict[str, Any]) -> "RunConfig":
        """
        Merge a config file with flag overrides; ``None`` overrides are ignored.

        Raises:
            FileNotFoundError: the config file does not exist
            FormatError: a config value cannot be parsed
        """
        values: Dict[str, Any] = {}
        if config_path:
            text = Path(config_path).read_text()
            for key, (raw, offset) in flatten_sections(parse_sections(text)).items():
                name = key.replace("-", "_")
                if name == "jmax":
                    name = "j_max"
                if name not in cls.model_fields:
                    raise FormatError(f"unknown config key '{key}'", offset)
                if name == "lattice":
                    try:
                        values[name] = parse_floats(raw)
                    except ValueError:
                        raise FormatError(f"invalid lattice {raw!r}", offset) from None
                else:
                    values[name] = raw
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)
