"""
File formats: the line-based key-value text used for windows, designs,
certificates and run configs, and the little-endian binary field (WPF1) and
coefficient (WPC1) files.
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel

from wavepacket_frames.core.criterion import AsymptoticFit, FrameCertificate, SweepPoint
from wavepacket_frames.core.errors import FormatError
from wavepacket_frames.core.field import Field, FrequencyGrid
from wavepacket_frames.core.geometry import Lattice
from wavepacket_frames.core.transform import BandCoefficients, CoefficientSet
from wavepacket_frames.core.wavefront import DecayProbe
from wavepacket_frames.core.window import CoarseWindowSpec, CorrectorPlacement, GaussianTerm, WindowSpec

PathLike = Union[str, Path]

FIELD_MAGIC = b"WPF1"
COEFFICIENT_MAGIC = b"WPC1"
FIELD_HEADER = np.dtype([("magic", "S4"), ("n", "<u4"), ("domain", "u1"), ("extent", "<f8")])
COEFFICIENT_HEADER = np.dtype([("magic", "S4"), ("count", "<u4")])
COEFFICIENT_RECORD = np.dtype([
    ("j", "<i4"),
    ("k", "<i4"),
    ("m1", "<i4"),
    ("m2", "<i4"),
    ("re", "<f8"),
    ("im", "<f8"),
])
_DOMAIN_FLAGS = {"spatial": 0, "frequency": 1}


class KeyValueSection(BaseModel):
    """One ``[name]`` block; offsets are byte positions of the header and of each key's line."""

    name: str
    offset: int
    values: Dict[str, str] = {}
    key_offsets: Dict[str, int] = {}

    def get_float(self, key: str, default: Optional[float] = None) -> float:
        if key not in self.values:
            if default is not None:
                return default
            raise FormatError(f"missing key '{key}' in [{self.name}]", self.offset)
        try:
            return float(self.values[key])
        except ValueError:
            raise FormatError(f"invalid number for '{key}': {self.values[key]!r}", self.key_offsets[key]) from None

    def get_int(self, key: str, default: Optional[int] = None) -> int:
        if key not in self.values:
            if default is not None:
                return default
            raise FormatError(f"missing key '{key}' in [{self.name}]", self.offset)
        try:
            return int(self.values[key])
        except ValueError:
            raise FormatError(f"invalid integer for '{key}': {self.values[key]!r}", self.key_offsets[key]) from None


def parse_sections(text: str) -> List[KeyValueSection]:
    """
    Parse ``[section]`` headers and ``key = value`` lines.

    ``#`` starts a comment; blank lines and surrounding whitespace are ignored.
    Lines before the first header belong to a section named ``""``.

    Raises:
        FormatError: malformed line or duplicate key, at that line's byte offset
    """
    sections: List[KeyValueSection] = []
    current: Optional[KeyValueSection] = None
    offset = 0
    for raw in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(raw.encode("utf-8"))
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise FormatError(f"malformed section header {line!r}", line_offset)
            current = KeyValueSection(name=line[1:-1].strip(), offset=line_offset, values={}, key_offsets={})
            sections.append(current)
            continue
        if "=" not in line:
            raise FormatError(f"expected 'key = value', got {line!r}", line_offset)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise FormatError("empty key", line_offset)
        if current is None:
            current = KeyValueSection(name="", offset=0, values={}, key_offsets={})
            sections.append(current)
        if key in current.values:
            raise FormatError(f"duplicate key '{key}' in [{current.name}]", line_offset)
        current.values[key] = value
        current.key_offsets[key] = line_offset
    return sections


def flatten_sections(sections: Iterable[KeyValueSection]) -> Dict[str, Tuple[str, int]]:
    """All keys regardless of section, later sections overriding earlier ones."""
    flat: Dict[str, Tuple[str, int]] = {}
    for section in sections:
        for key, value in section.values.items():
            flat[key] = (value, section.key_offsets[key])
    return flat


def _single(sections: Sequence[KeyValueSection], name: str, required: bool = True) -> Optional[KeyValueSection]:
    matches = [s for s in sections if s.name == name]
    if len(matches) > 1:
        raise FormatError(f"section [{name}] appears more than once", matches[1].offset)
    if not matches:
        if required:
            raise FormatError(f"missing section [{name}]", 0)
        return None
    return matches[0]


def _read_text(path: PathLike) -> str:
    data = Path(path).read_bytes()
    try:
        return data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError("file is not valid UTF-8 text", e.start) from None


def _number(value: float) -> str:
    return repr(float(value))


def format_window(w: WindowSpec, w0: CoarseWindowSpec) -> str:
    lines = ["# wavepacket window", "[meta]", f"moment_order = {w.moment_order}", "", "[phi0]", f"sigma = {_number(w0.sigma)}"]
    for term in w.terms:
        lines += [
            "",
            "[term]",
            f"amplitude = {_number(term.amplitude)}",
            f"center = {_number(term.center)}",
            f"width1 = {_number(term.width1)}",
            f"width2 = {_number(term.width2)}",
        ]
    return "\n".join(lines) + "\n"


def parse_window(text: str) -> Tuple[WindowSpec, CoarseWindowSpec]:
    sections = parse_sections(text)
    meta = _single(sections, "meta", required=False)
    phi0 = _single(sections, "phi0")
    terms = []
    for section in sections:
        if section.name != "term":
            continue
        terms.append(GaussianTerm(
            amplitude=section.get_float("amplitude"),
            center=section.get_float("center"),
            width1=_positive(section, "width1"),
            width2=_positive(section, "width2"),
        ))
    if not terms:
        raise FormatError("window has no [term] sections", len(text.encode("utf-8")))
    moment_order = meta.get_int("moment_order", 0) if meta else 0
    return WindowSpec(terms=tuple(terms), moment_order=moment_order), CoarseWindowSpec(sigma=_positive(phi0, "sigma"))


def _positive(section: KeyValueSection, key: str) -> float:
    value = section.get_float(key)
    if not value > 0 or not math.isfinite(value):
        raise FormatError(f"'{key}' must be a positive number, got {value}", section.key_offsets[key])
    return value


def save_window(w: WindowSpec, w0: CoarseWindowSpec, path: PathLike) -> None:
    Path(path).write_text(format_window(w, w0))
    logger.info(f"wrote window with {len(w.terms)} terms to {path}")


def load_window(path: PathLike) -> Tuple[WindowSpec, CoarseWindowSpec]:
    return parse_window(_read_text(path))


class DesignSpec(BaseModel):
    """Input of the window designer: main term, corrector placements, moment order, coarse width."""

    main: GaussianTerm
    correctors: List[CorrectorPlacement]
    moment_order: int
    sigma: float = 1e4


def parse_design(text: str) -> DesignSpec:
    """``[main]`` and repeated ``[corrector]`` blocks (center, width1, width2), ``[meta] moment_order``, optional ``[phi0] sigma``."""
    sections = parse_sections(text)
    main = _single(sections, "main")
    meta = _single(sections, "meta")
    phi0 = _single(sections, "phi0", required=False)
    correctors = [
        CorrectorPlacement(
            center=section.get_float("center"),
            width1=_positive(section, "width1"),
            width2=_positive(section, "width2"),
        )
        for section in sections
        if section.name == "corrector"
    ]
    return DesignSpec(
        main=GaussianTerm(
            amplitude=main.get_float("amplitude", 1.0),
            center=main.get_float("center"),
            width1=_positive(main, "width1"),
            width2=_positive(main, "width2"),
        ),
        correctors=correctors,
        moment_order=meta.get_int("moment_order"),
        sigma=_positive(phi0, "sigma") if phi0 else 1e4,
    )


def load_design(path: PathLike) -> DesignSpec:
    return parse_design(_read_text(path))


def format_design(spec: DesignSpec) -> str:
    lines = [
        "[meta]",
        f"moment_order = {spec.moment_order}",
        "",
        "[phi0]",
        f"sigma = {_number(spec.sigma)}",
        "",
        "[main]",
        f"center = {_number(spec.main.center)}",
        f"width1 = {_number(spec.main.width1)}",
        f"width2 = {_number(spec.main.width2)}",
    ]
    for corrector in spec.correctors:
        lines += ["", "[corrector]", f"center = {_number(corrector.center)}", f"width1 = {_number(corrector.width1)}", f"width2 = {_number(corrector.width2)}"]
    return "\n".join(lines) + "\n"


def format_certificate(cert: FrameCertificate) -> str:
    lines = ["# frame certificate", "[certificate]"]
    for key, value in cert.model_dump().items():
        key = "Delta" if key == "delta" else key
        if value is None:
            continue
        if isinstance(value, bool):
            lines.append(f"{key} = {str(value).lower()}")
        elif isinstance(value, float):
            lines.append(f"{key} = {_number(value)}")
        else:
            lines.append(f"{key} = {value}")
    lines.append(f"bound_ratio = {_number(cert.bound_ratio)}")
    return "\n".join(lines) + "\n"


def save_certificate(cert: FrameCertificate, path: PathLike) -> None:
    Path(path).write_text(format_certificate(cert))


def load_certificate(path: PathLike) -> Dict[str, Union[float, bool]]:
    """Certificate values as numbers and booleans, keyed by name."""
    section = _single(parse_sections(_read_text(path)), "certificate")
    values: Dict[str, Union[float, bool]] = {}
    for key, raw in section.values.items():
        if raw in ("true", "false"):
            values[key] = raw == "true"
        else:
            values[key] = section.get_float(key)
    return values


def format_sweep_table(points: Sequence[SweepPoint], fit: Optional[AsymptoticFit] = None) -> str:
    lines = [f"{'a':>12} {'b':>12} {'delta':>14}"]
    lines += [f"{p.a:>12.6g} {p.b:>12.6g} {p.delta:>14.6e}" for p in points]
    if fit is not None:
        lines.append(f"# tau = {fit.tau:.6g}, prefactor = {fit.prefactor:.6g}, r_squared = {fit.r_squared:.4f}")
    return "\n".join(lines) + "\n"


def format_probe_report(probe: DecayProbe) -> str:
    """Text table with columns j, k_j, lambda_m1, lambda_m2, abs_coeff, log4_abs."""
    x1, x2 = probe.point.x0
    lines = [
        f"# x0 = ({x1:.6g}, {x2:.6g}), theta0 = {probe.point.theta0:.6g}",
        f"# rate = {probe.rate:.6g}, usable_j_max = {probe.usable_j_max}, approximate = {str(probe.approximate).lower()}",
        f"{'j':>3} {'k_j':>6} {'lambda_m1':>10} {'lambda_m2':>10} {'abs_coeff':>14} {'log4_abs':>10}",
    ]
    for r in probe.records:
        lines.append(f"{r.j:>3} {r.k:>6} {r.m1:>10} {r.m2:>10} {r.abs_coeff:>14.6e} {r.log4_abs:>10.4f}")
    return "\n".join(lines) + "\n"


def field_to_bytes(field: Field) -> bytes:
    header = np.zeros(1, dtype=FIELD_HEADER)
    header["magic"] = FIELD_MAGIC
    header["n"] = field.n
    header["domain"] = _DOMAIN_FLAGS[field.domain]
    header["extent"] = field.extent
    return header.tobytes() + np.ascontiguousarray(field.samples, dtype="<c16").tobytes()


def field_from_bytes(data: bytes) -> Field:
    """
    Decode a WPF1 buffer.

    Raises:
        FormatError: bad magic, size, domain flag, extent or payload length
    """
    if len(data) < FIELD_HEADER.itemsize:
        raise FormatError("truncated field header", len(data))
    header = np.frombuffer(data, dtype=FIELD_HEADER, count=1)[0]
    if bytes(header["magic"]) != FIELD_MAGIC:
        raise FormatError(f"bad magic {bytes(header['magic'])!r}, expected {FIELD_MAGIC!r}", 0)
    n = int(header["n"])
    if n < 2 or n & (n - 1):
        raise FormatError(f"grid size must be a power of two >= 2, got {n}", FIELD_HEADER.fields["n"][1])
    flag = int(header["domain"])
    if flag not in (0, 1):
        raise FormatError(f"domain flag must be 0 or 1, got {flag}", FIELD_HEADER.fields["domain"][1])
    extent = float(header["extent"])
    if not (extent > 0 and math.isfinite(extent)):
        raise FormatError(f"extent must be positive, got {extent}", FIELD_HEADER.fields["extent"][1])
    expected = FIELD_HEADER.itemsize + n * n * 16
    if len(data) < expected:
        raise FormatError(f"truncated samples: need {expected} bytes, got {len(data)}", len(data))
    if len(data) > expected:
        raise FormatError("trailing bytes after samples", expected)
    samples = np.frombuffer(data, dtype="<c16", count=n * n, offset=FIELD_HEADER.itemsize).reshape(n, n)
    return Field(samples=samples, domain="frequency" if flag else "spatial", extent=extent)


def write_field(field: Field, path: PathLike) -> None:
    Path(path).write_bytes(field_to_bytes(field))
    logger.debug(f"wrote {field.n}x{field.n} {field.domain} field to {path}")


def read_field(path: PathLike) -> Field:
    return field_from_bytes(Path(path).read_bytes())


def coefficients_to_bytes(c: CoefficientSet) -> bytes:
    """Records in band order (coarse band first), lexicographic in ``(m1, m2)`` within a band."""
    records = np.zeros(c.count, dtype=COEFFICIENT_RECORD)
    start = 0
    for (j, k), band in c.bands.items():
        stop = start + band.values.size
        records["j"][start:stop] = j
        records["k"][start:stop] = k
        records["m1"][start:stop] = band.indices[:, 0]
        records["m2"][start:stop] = band.indices[:, 1]
        records["re"][start:stop] = band.values.real
        records["im"][start:stop] = band.values.imag
        start = stop
    header = np.zeros(1, dtype=COEFFICIENT_HEADER)
    header["magic"] = COEFFICIENT_MAGIC
    header["count"] = c.count
    return header.tobytes() + records.tobytes()


def coefficient_records_from_bytes(data: bytes) -> np.ndarray:
    """
    Decode and validate the records of a WPC1 buffer.

    Raises:
        FormatError: bad magic, length, or an invalid ``(j, k)`` pair
    """
    if len(data) < COEFFICIENT_HEADER.itemsize:
        raise FormatError("truncated coefficient header", len(data))
    header = np.frombuffer(data, dtype=COEFFICIENT_HEADER, count=1)[0]
    if bytes(header["magic"]) != COEFFICIENT_MAGIC:
        raise FormatError(f"bad magic {bytes(header['magic'])!r}, expected {COEFFICIENT_MAGIC!r}", 0)
    count = int(header["count"])
    expected = COEFFICIENT_HEADER.itemsize + count * COEFFICIENT_RECORD.itemsize
    if len(data) < expected:
        raise FormatError(f"truncated records: header announces {count}", len(data))
    if len(data) > expected:
        raise FormatError("trailing bytes after records", expected)
    records = np.frombuffer(data, dtype=COEFFICIENT_RECORD, count=count, offset=COEFFICIENT_HEADER.itemsize)
    j = records["j"].astype(np.int64)
    k = records["k"].astype(np.int64)
    bad = (j < 0) | (j > 30) | (k < 0) | (k >= np.left_shift(1, np.clip(j, 0, 30)))
    if np.any(bad):
        first = int(np.nonzero(bad)[0][0])
        raise FormatError(
            f"invalid packet index j={int(j[first])}, k={int(k[first])}",
            COEFFICIENT_HEADER.itemsize + first * COEFFICIENT_RECORD.itemsize,
        )
    return records


def coefficients_from_bytes(data: bytes, lattice: Lattice, grid: FrequencyGrid) -> CoefficientSet:
    """Rebuild a coefficient set; ``j_max`` is the largest scale present."""
    records = coefficient_records_from_bytes(data)
    bands: Dict[Tuple[int, int], BandCoefficients] = {}
    keys = list(dict.fromkeys(zip(records["j"].tolist(), records["k"].tolist())))
    for j, k in keys:
        rows = records[(records["j"] == j) & (records["k"] == k)]
        indices = np.stack([rows["m1"], rows["m2"]], axis=1).astype(np.int64)
        values = rows["re"] + 1j * rows["im"]
        bands[(j, k)] = BandCoefficients(j=j, k=k, indices=indices, values=values)
    j_max = max((j for j, _ in keys), default=0)
    return CoefficientSet(lattice=lattice, j_max=j_max, grid=grid, bands=bands)


def write_coefficients(c: CoefficientSet, path: PathLike) -> None:
    Path(path).write_bytes(coefficients_to_bytes(c))
    logger.debug(f"wrote {c.count} coefficients to {path}")


def read_coefficients(path: PathLike, lattice: Lattice, grid: FrequencyGrid) -> CoefficientSet:
    return coefficients_from_bytes(Path(path).read_bytes(), lattice, grid)
