"""Background medium, obstacle shapes, and support functions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Tuple, Union

import numpy as np

__all__ = (
    "Medium",
    "Empty",
    "AxisBox",
    "Ball",
    "ObstacleShape",
    "DomainGeometry",
    "wavenumber",
    "support_function",
    "box_support",
    "contains",
)

Vec3 = Tuple[float, float, float]


@dataclass(frozen=True)
class Medium:
    """Isotropic constant background: permittivity, permeability, frequency.

    Conductivity is identically zero; the reconstruction theory assumed
    here needs a lossless background, so it is not a parameter.
    """

    eps0: float = 1.0
    mu0: float = 1.0
    omega: float = 1.0

    def __post_init__(self) -> None:
        if not (self.eps0 > 0.0 and self.mu0 > 0.0 and self.omega > 0.0):
            raise ValueError("medium requires eps0 > 0, mu0 > 0, omega > 0")


def wavenumber(medium: Medium) -> float:
    """k = omega * sqrt(eps0 * mu0)."""
    return medium.omega * math.sqrt(medium.eps0 * medium.mu0)


@dataclass(frozen=True)
class Empty:
    """No obstacle."""


@dataclass(frozen=True)
class AxisBox:
    """Axis-aligned box obstacle [lo, hi] per coordinate."""

    lo: Vec3
    hi: Vec3

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("AxisBox lo/hi must be 3-vectors")
        if not np.all(hi > lo):
            raise ValueError("AxisBox needs hi > lo componentwise")
        object.__setattr__(self, "lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in hi))

    @property
    def volume(self) -> float:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return float(np.prod(hi - lo))


@dataclass(frozen=True)
class Ball:
    """Ball obstacle with given center and radius."""

    center: Vec3
    radius: float

    def __post_init__(self) -> None:
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,):
            raise ValueError("Ball center must be a 3-vector")
        if not self.radius > 0.0:
            raise ValueError("Ball needs radius > 0")
        object.__setattr__(self, "center", tuple(float(v) for v in c))
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3


ObstacleShape = Union[Empty, AxisBox, Ball]


def box_support(lo: Iterable[float], hi: Iterable[float], rho: np.ndarray) -> float:
    """sup over the box [lo, hi] of x . rho."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    rho = np.asarray(rho, dtype=float)
    return float(np.sum(np.maximum(lo * rho, hi * rho)))


def support_function(shape: ObstacleShape, rho: np.ndarray) -> float:
    """Support function h_D(rho) = sup_{x in D} x . rho for a unit direction.

    Raises ValueError for Empty: there is nothing to support.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (3,):
        raise ValueError("rho must be a 3-vector")
    if abs(float(rho @ rho) - 1.0) > 1e-12:
        raise ValueError("rho must be a unit vector")
    if isinstance(shape, AxisBox):
        return box_support(shape.lo, shape.hi, rho)
    if isinstance(shape, Ball):
        return float(np.dot(shape.center, rho)) + shape.radius
    raise ValueError("support_function undefined for Empty obstacle")


def contains(shape: ObstacleShape, points: np.ndarray) -> np.ndarray:
    """Boolean membership of points (..., 3) in the closed obstacle."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[-1] != 3:
        raise ValueError("points must have trailing dimension 3")
    if isinstance(shape, Empty):
        return np.zeros(pts.shape[:-1], dtype=bool)
    if isinstance(shape, AxisBox):
        lo = np.asarray(shape.lo)
        hi = np.asarray(shape.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)
    if isinstance(shape, Ball):
        d2 = np.sum((pts - np.asarray(shape.center)) ** 2, axis=-1)
        return d2 <= shape.radius**2
    raise TypeError(f"unknown obstacle shape {shape!r}")


@dataclass(frozen=True)
class DomainGeometry:
    """Computational box with an (optional) obstacle strictly inside.

    kind selects the obstacle boundary condition: "hard" (perfectly
    conducting, tangential H vanishes) or "soft" (tangential E vanishes).
    """

    box_lo: Vec3 = (-1.0, -1.0, -1.0)
    box_hi: Vec3 = (1.0, 1.0, 1.0)
    obstacle: ObstacleShape = field(default_factory=Empty)
    kind: str = "hard"

    def __post_init__(self) -> None:
        lo = np.asarray(self.box_lo, dtype=float)
        hi = np.asarray(self.box_hi, dtype=float)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValueError("box_lo/box_hi must be 3-vectors")
        if not np.all(hi > lo):
            raise ValueError("domain box needs hi > lo componentwise")
        if self.kind not in ("hard", "soft"):
            raise ValueError("kind must be 'hard' or 'soft'")
        object.__setattr__(self, "box_lo", tuple(float(v) for v in lo))
        object.__setattr__(self, "box_hi", tuple(float(v) for v in hi))
        bb = self.obstacle_bbox()
        if bb is not None:
            blo, bhi = bb
            if not (np.all(np.asarray(blo) > lo) and np.all(np.asarray(bhi) < hi)):
                raise ValueError("obstacle must lie strictly inside the domain box")

    def obstacle_bbox(self):
        """Axis-aligned bounding box of the obstacle, or None when Empty."""
        ob = self.obstacle
        if isinstance(ob, Empty):
            return None
        if isinstance(ob, AxisBox):
            return np.asarray(ob.lo), np.asarray(ob.hi)
        if isinstance(ob, Ball):
            c = np.asarray(ob.center)
            return c - ob.radius, c + ob.radius
        raise TypeError(f"unknown obstacle shape {ob!r}")

    @property
    def has_obstacle(self) -> bool:
        return not isinstance(self.obstacle, Empty)

    def domain_support(self, rho: np.ndarray) -> float:
        """h_Omega(rho): support of the whole computational box."""
        return box_support(self.box_lo, self.box_hi, rho)

    def half_diagonal(self) -> float:
        lo = np.asarray(self.box_lo)
        hi = np.asarray(self.box_hi)
        return float(0.5 * np.linalg.norm(hi - lo))

    def check_resonance_guard(self, medium: Medium, threshold: float = 3.8) -> float:
        """Guard product k * half-diagonal; raises when >= threshold.

        The forward solves assume the operating frequency sits below the
        first interior cavity resonance of the box; this coarse guard
        rejects configurations that leave that regime.
        """
        guard = wavenumber(medium) * self.half_diagonal()
        if guard >= threshold:
            raise ValueError(
                f"resonance guard violated: k*half_diagonal = {guard:.6g} "
                f">= threshold {threshold:.6g}"
            )
        return guard
