"""
Parabolic geometry: dilations, rotations, lattices, frequency sectors and the
star-norm estimator that controls every overlap sum in the toolkit.

Conventions
-----------
``D_j = diag(4^j, 2^j)``, ``A_{j,k} = D_j R_{2πk/2^j}`` and
``B_{j,k} = (A_{j,k}^T)^{-1} = D_j^{-1} R_{2πk/2^j}``. Scalar functions on the
plane are vectorized callables ``F(xi1, xi2) -> ndarray``.
"""
from __future__ import annotations

import math
from typing import Callable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from wavepacket_frames.core.parallel import map_ordered

PlaneFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
Matrix2 = Tuple[Tuple[float, float], Tuple[float, float]]

_QUARTER_TURNS = ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))


class ParabolicIndex(BaseModel):
    """Scale ``j >= 1`` and rotation ``0 <= k < 2^j`` of a fine wavepacket."""

    model_config = ConfigDict(frozen=True)

    j: int = Field(ge=1)
    k: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_rotation(self) -> "ParabolicIndex":
        if self.k >= 2 ** self.j:
            raise ValueError(f"rotation index k={self.k} out of range for scale j={self.j}")
        return self

    @property
    def angle(self) -> float:
        return 2.0 * math.pi * self.k / 2 ** self.j


def dilation_matrix(j: int) -> np.ndarray:
    """Return the parabolic dilation ``diag(4^j, 2^j)``."""
    if j < 0:
        raise ValueError(f"scale must be non-negative, got {j}")
    return np.diag([4.0 ** j, 2.0 ** j])


def rotation_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def rotation_cos_sin(j: int, k: int) -> Tuple[float, float]:
    """Cosine and sine of ``2πk/2^j``, exact when the angle is a multiple of π/2."""
    n = 2 ** j
    k %= n
    if (4 * k) % n == 0:
        return _QUARTER_TURNS[(4 * k) // n]
    theta = 2.0 * math.pi * k / n
    return math.cos(theta), math.sin(theta)


def band_rotation(j: int, k: int) -> np.ndarray:
    c, s = rotation_cos_sin(j, k)
    return np.array([[c, -s], [s, c]])


def packet_matrices(j: int, k: int) -> Tuple[np.ndarray, np.ndarray]:
    """``(A_{j,k}, B_{j,k})`` for a band; ``j = 0`` is the coarse band with identities."""
    if j == 0:
        return np.eye(2), np.eye(2)
    rot = band_rotation(j, k)
    return np.diag([4.0 ** j, 2.0 ** j]) @ rot, np.diag([4.0 ** -j, 2.0 ** -j]) @ rot


def packet_matrix(idx: ParabolicIndex) -> np.ndarray:
    """Return ``A_{j,k} = D_j R_{2πk/2^j}``."""
    return packet_matrices(idx.j, idx.k)[0]


def packet_dual_matrix(idx: ParabolicIndex) -> np.ndarray:
    """Return ``B_{j,k} = D_j^{-1} R_{2πk/2^j}``, the inverse transpose of ``A_{j,k}``."""
    return packet_matrices(idx.j, idx.k)[1]


def apply_dual_matrix(j: int, k: int, xi1: np.ndarray, xi2: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Evaluate ``B_{j,k} ξ`` componentwise on coordinate arrays."""
    if j == 0:
        return xi1, xi2
    c, s = rotation_cos_sin(j, k)
    return (c * xi1 - s * xi2) / 4.0 ** j, (s * xi1 + c * xi2) / 2.0 ** j


def parabolic_radius(alpha: float, j: int) -> float:
    """
    Radial stretch ``ρ(α, j)`` of ``D_j`` acting on a unit vector with cosine ``α``.

    ``|D_j (r cos θ, r sin θ)| = ρ(cos θ, j) r`` with
    ``ρ(α, j)^2 = α^2 16^j + (1 - α^2) 4^j``.
    """
    return math.sqrt(alpha * alpha * 16.0 ** j + (1.0 - alpha * alpha) * 4.0 ** j)


class Lattice(BaseModel):
    """Translation lattice ``Λ = P Z^2`` given by an invertible generator ``P``."""

    model_config = ConfigDict(frozen=True)

    generator: Matrix2

    @model_validator(mode="after")
    def _check_invertible(self) -> "Lattice":
        p = np.asarray(self.generator, dtype=float)
        if not np.all(np.isfinite(p)):
            raise ValueError("degenerate lattice: generator has non-finite entries")
        scale = float(np.max(np.abs(p)))
        if scale == 0.0 or abs(np.linalg.det(p)) <= 1e-14 * scale * scale:
            raise ValueError("degenerate lattice: generator is singular")
        return self

    @classmethod
    def from_matrix(cls, matrix) -> "Lattice":
        p = np.asarray(matrix, dtype=float).reshape(2, 2)
        return cls(generator=((float(p[0, 0]), float(p[0, 1])), (float(p[1, 0]), float(p[1, 1]))))

    @classmethod
    def rectangular(cls, a: float, b: float) -> "Lattice":
        return cls.from_matrix([[a, 0.0], [0.0, b]])

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "Lattice":
        """Build from ``a,b`` (rectangular) or ``p11,p12,p21,p22`` (row-major)."""
        if len(values) == 2:
            return cls.rectangular(values[0], values[1])
        if len(values) == 4:
            return cls.from_matrix(list(values))
        raise ValueError(f"lattice needs 2 or 4 values, got {len(values)}")

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.generator, dtype=float)

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def volume(self) -> float:
        """``|Λ| = |det P|``."""
        return abs(float(np.linalg.det(self.matrix)))

    @property
    def singular_values(self) -> Tuple[float, float]:
        """``(a, b)`` with ``a >= b``, from the eigenvalues of ``P^T P``."""
        p = self.matrix
        eig = np.clip(np.linalg.eigvalsh(p.T @ p), 0.0, None)
        return float(math.sqrt(eig[1])), float(math.sqrt(eig[0]))

    @property
    def fundamental_diameter(self) -> float:
        """``L_Λ``: half the longer diagonal of the fundamental parallelogram."""
        p = self.matrix
        return 0.5 * max(float(np.linalg.norm(p[:, 0] + p[:, 1])), float(np.linalg.norm(p[:, 0] - p[:, 1])))

    def point(self, m1: int, m2: int) -> np.ndarray:
        return self.matrix @ np.array([m1, m2], dtype=float)

    def reduced_basis(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Lagrange-reduced generator ``Q = P U`` with unimodular integer ``U``.

        The columns satisfy ``|q1| <= |q2|`` and ``|q1·q2| <= |q1|^2 / 2``, so
        the lattice point nearest to ``y`` has ``Q``-coordinates within one
        cell of ``floor(Q^{-1} y)``.
        """
        q = self.matrix.copy()
        u = np.eye(2, dtype=np.int64)
        while True:
            if q[:, 0] @ q[:, 0] > q[:, 1] @ q[:, 1]:
                q = q[:, ::-1].copy()
                u = u[:, ::-1].copy()
            mu = int(round(float(q[:, 0] @ q[:, 1]) / float(q[:, 0] @ q[:, 0])))
            if mu == 0:
                return q, u
            q[:, 1] -= mu * q[:, 0]
            u[:, 1] -= mu * u[:, 0]
            if q[:, 1] @ q[:, 1] >= q[:, 0] @ q[:, 0]:
                return q, u

    def nearest_index(self, y: Sequence[float]) -> Tuple[int, int]:
        """Integer coordinates of the lattice point closest to ``y``, ties broken lexicographically."""
        y = np.asarray(y, dtype=float)
        q, u = self.reduced_basis()
        base = np.floor(np.linalg.solve(q, y)).astype(np.int64)
        best: Optional[Tuple[float, int, int]] = None
        for d1 in range(-1, 3):
            for d2 in range(-1, 3):
                m = u @ np.array([base[0] + d1, base[1] + d2], dtype=np.int64)
                m1, m2 = int(m[0]), int(m[1])
                dist = float(np.sum((self.point(m1, m2) - y) ** 2))
                key = (dist, m1, m2)
                if best is None or key < best:
                    best = key
        return best[1], best[2]


def dual_lattice(lat: Lattice) -> Lattice:
    """Return ``Γ = (P^{-1})^T Z^2``."""
    return Lattice.from_matrix(np.linalg.inv(lat.matrix).T)


def lattice_enumerate_indices(lat: Lattice, radius: float) -> np.ndarray:
    """Integer coordinates ``m != 0`` with ``|P m| <= radius``, lexicographic in ``m``."""
    if radius <= 0:
        raise ValueError(f"radius must be positive, got {radius}")
    smallest = lat.singular_values[1]
    bound = int(math.ceil(radius / smallest)) + 1
    m1, m2 = np.meshgrid(np.arange(-bound, bound + 1), np.arange(-bound, bound + 1), indexing="ij")
    m = np.stack([m1.ravel(), m2.ravel()], axis=1)
    pts = m @ lat.matrix.T
    keep = (np.sum(pts * pts, axis=1) <= radius * radius) & np.any(m != 0, axis=1)
    return m[keep]


def lattice_enumerate(lat: Lattice, radius: float) -> np.ndarray:
    """Lattice points ``P m`` (``m != 0``) inside the closed disc, ordered lexicographically in ``m``."""
    return lattice_enumerate_indices(lat, radius) @ lat.matrix.T


class Box(BaseModel):
    """Axis-aligned rectangle ``[lo1, hi1] x [lo2, hi2]`` sampled inclusively."""

    model_config = ConfigDict(frozen=True)

    lo1: float
    hi1: float
    lo2: float
    hi2: float

    @classmethod
    def symmetric(cls, extent: float) -> "Box":
        return cls(lo1=-extent, hi1=extent, lo2=-extent, hi2=extent)

    def mesh(self, n: int) -> Tuple[np.ndarray, np.ndarray]:
        if n < 2:
            raise ValueError(f"grid_n must be at least 2, got {n}")
        return np.meshgrid(np.linspace(self.lo1, self.hi1, n), np.linspace(self.lo2, self.hi2, n), indexing="xy")


class Sector(BaseModel):
    """
    Frequency sector used in overlap estimates.

    ``V(s, t)``: ``2^s <= r <= 2^(s+1)``, ``0 <= θ <= π/2`` and
    ``2^-(t+1) <= cos θ <= 2^-t``.
    ``W(r, t)``: ``4^(r-1) <= |ξ1| <= 4^r`` and ``2^(t-1) <= |ξ2| <= 2^t``.
    ``symmetry`` selects one of the four axis reflections applied to the set.
    """

    model_config = ConfigDict(frozen=True)

    kind: Literal["V", "W"]
    scale: int
    t: int
    symmetry: Tuple[int, int] = (1, 1)

    @model_validator(mode="after")
    def _check(self) -> "Sector":
        if self.kind == "V" and self.t < 0:
            raise ValueError("V sectors need t >= 0")
        if any(sign not in (1, -1) for sign in self.symmetry):
            raise ValueError(f"symmetry must be a pair of ±1, got {self.symmetry}")
        return self

    def contains(self, xi1, xi2) -> np.ndarray:
        # the symmetry is an involution, so mapping the point back is the same map
        x = self.symmetry[0] * np.asarray(xi1, dtype=float)
        y = self.symmetry[1] * np.asarray(xi2, dtype=float)
        if self.kind == "W":
            ax, ay = np.abs(x), np.abs(y)
            return (
                (4.0 ** (self.scale - 1) <= ax) & (ax <= 4.0 ** self.scale)
                & (2.0 ** (self.t - 1) <= ay) & (ay <= 2.0 ** self.t)
            )
        r = np.hypot(x, y)
        with np.errstate(invalid="ignore", divide="ignore"):
            cos = np.where(r > 0, x / np.where(r > 0, r, 1.0), 0.0)
        return (
            (2.0 ** self.scale <= r) & (r <= 2.0 ** (self.scale + 1))
            & (x >= 0) & (y >= 0)
            & (2.0 ** -(self.t + 1) <= cos) & (cos <= 2.0 ** -self.t)
        )

    def indicator(self) -> PlaneFunction:
        return lambda xi1, xi2: self.contains(xi1, xi2).astype(float)


class StarNormEstimate(BaseModel):
    """Grid estimate of ``‖F‖_*`` with its scale-truncation tail."""

    value: float
    tail_bound: float
    j_max: int
    grid_n: int
    level_maxima: List[float]
    argmax: Tuple[float, float]


def _star_level(F: PlaneFunction, xi1: np.ndarray, xi2: np.ndarray, j: int) -> np.ndarray:
    level = np.zeros_like(xi1, dtype=float)
    for k in range(2 ** j):
        eta1, eta2 = apply_dual_matrix(j, k, xi1, xi2)
        level += np.abs(F(eta1, eta2))
    return level


def star_levels(F: PlaneFunction, xi1: np.ndarray, xi2: np.ndarray, j_max: int) -> List[np.ndarray]:
    """Per-scale sums ``Σ_k |F(B_{j,k} ξ)|`` for ``j = 1..j_max`` on the given points."""
    return map_ordered(lambda j: _star_level(F, xi1, xi2, j), range(1, j_max + 1))


def geometric_tail(level_maxima: Sequence[float]) -> float:
    """Extrapolate the neglected scales from the decay of the last two level maxima."""
    if not level_maxima or level_maxima[-1] == 0.0:
        return 0.0
    if len(level_maxima) < 2 or level_maxima[-2] <= 0.0:
        return math.inf
    ratio = level_maxima[-1] / level_maxima[-2]
    if ratio >= 1.0:
        return math.inf
    return level_maxima[-1] * ratio / (1.0 - ratio)


def star_norm_on_points(F: PlaneFunction, xi1: np.ndarray, xi2: np.ndarray, j_max: int) -> StarNormEstimate:
    if j_max < 1:
        raise ValueError(f"j_max must be at least 1, got {j_max}")
    levels = star_levels(F, xi1, xi2, j_max)
    total = np.zeros_like(xi1, dtype=float)
    for level in levels:
        total += level
    flat = int(np.argmax(total))
    return StarNormEstimate(
        value=float(total.flat[flat]),
        tail_bound=geometric_tail([float(level.max()) for level in levels]),
        j_max=j_max,
        grid_n=int(xi1.shape[0]),
        level_maxima=[float(level.max()) for level in levels],
        argmax=(float(xi1.flat[flat]), float(xi2.flat[flat])),
    )


def star_norm_estimate(F: PlaneFunction, domain_box: Box, grid_n: int, j_max: int) -> StarNormEstimate:
    """
    Estimate ``‖F‖_* = sup_ξ Σ_{j,k} |F(B_{j,k} ξ)|`` on an inclusive grid over ``domain_box``.

    Args:
        F: vectorized scalar function on the plane
        domain_box: rectangle on which the supremum is sampled
        grid_n: samples per axis
        j_max: finest scale retained

    Returns:
        The estimate with per-scale maxima and an extrapolated tail for the
        scales above ``j_max``.
    """
    xi1, xi2 = domain_box.mesh(grid_n)
    estimate = star_norm_on_points(F, xi1, xi2, j_max)
    logger.debug(f"star norm on {grid_n}^2 grid up to j={j_max}: {estimate.value:.6g} (tail {estimate.tail_bound:.3g})")
    return estimate


def rotated_box_overlap_count(
    r: int,
    t: int,
    j_max: int,
    angles: Sequence[float],
    probe_box: Box,
    probe_n: int,
) -> int:
    """
    Maximum over probe points of how many of ``R_{θ_j} D_j W_{r,t}``, ``j = 1..j_max``,
    contain the point.

    Raises:
        ValueError: if fewer than ``j_max`` angles are given or ``|θ_j| > 2π 2^-j``
    """
    if len(angles) < j_max:
        raise ValueError(f"need {j_max} angles, got {len(angles)}")
    for j, theta in enumerate(angles[:j_max], start=1):
        if abs(theta) > 2.0 * math.pi * 2.0 ** -j + 1e-12:
            raise ValueError(f"angle {theta} for scale {j} exceeds 2π·2^-{j}")
    box = Sector(kind="W", scale=r, t=t)
    xi1, xi2 = probe_box.mesh(probe_n)
    count = np.zeros(xi1.shape, dtype=np.int64)
    for j, theta in enumerate(angles[:j_max], start=1):
        c, s = math.cos(theta), math.sin(theta)
        # ξ ∈ R_θ D_j W  ⇔  D_j^{-1} R_{-θ} ξ ∈ W
        eta1 = (c * xi1 + s * xi2) / 4.0 ** j
        eta2 = (-s * xi1 + c * xi2) / 2.0 ** j
        count += box.contains(eta1, eta2)
    return int(count.max())
