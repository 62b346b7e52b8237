"""Rod geometry, material law and discretization.

A rod is a conical (or cylindrical) circular beam split into ``N`` sections.
Each section is further subdivided into segments over which the strain is
frozen so that the kinematics can be integrated with closed-form
exponentials.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError

STRAIGHT = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0])
DEFAULT_MAX_SEGMENT = 1e-3  # m


@dataclass(frozen=True)
class RadiusProfile:
    """Affine radius ``R(X) = R_base + (R_tip - R_base) X / L``."""

    base_radius: float
    tip_radius: float
    length: float

    def __post_init__(self):
        if not (self.length > 0):
            raise ValueError("length must be positive")
        if not (0 < self.tip_radius <= self.base_radius):
            raise ValueError("need 0 < tip_radius <= base_radius")

    @property
    def slope(self) -> float:
        return (self.tip_radius - self.base_radius) / self.length

    def radius(self, X):
        return self.base_radius + self.slope * np.asarray(X, dtype=float)

    def check(self, X, tol=1e-12):
        X = np.asarray(X, dtype=float)
        if np.any(X < -tol) or np.any(X > self.length * (1 + tol) + tol):
            raise DomainError(f"X outside [0, {self.length}]")
        return np.clip(X, 0.0, self.length)


@dataclass(frozen=True)
class Material:
    young_modulus: float
    shear_modulus: float
    density: float
    viscosity: float = 0.0

    def __post_init__(self):
        for name in ("young_modulus", "shear_modulus", "density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.viscosity < 0:
            raise ValueError("viscosity must be non-negative")

    @classmethod
    def from_poisson(cls, young_modulus, poisson_ratio, density, viscosity=0.0):
        g = young_modulus / (2.0 * (1.0 + poisson_ratio))
        return cls(young_modulus, g, density, viscosity)

    @property
    def theta(self):
        return np.array([self.young_modulus, self.shear_modulus, self.density])

    def with_theta(self, theta):
        e, g, rho = (float(v) for v in theta)
        return dataclasses.replace(self, young_modulus=e, shear_modulus=g, density=rho)


@dataclass(frozen=True)
class Partition:
    """Section bounds ``0 = L_0 < L_1 < ... < L_N`` and segments per section."""

    bounds: tuple
    segments: tuple

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=float)
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("section bounds must start at 0 and increase strictly")
        if len(self.segments) != len(b) - 1 or min(self.segments) < 1:
            raise ValueError("need one positive segment count per section")

    @classmethod
    def from_lengths(cls, lengths: Sequence[float], segments=None, max_segment=DEFAULT_MAX_SEGMENT):
        bounds = np.concatenate([[0.0], np.cumsum(lengths)])
        return cls.from_bounds(bounds, segments, max_segment)

    @classmethod
    def from_bounds(cls, bounds, segments=None, max_segment=DEFAULT_MAX_SEGMENT):
        bounds = tuple(float(b) for b in bounds)
        lengths = np.diff(bounds)
        if segments is None:
            # small slack so 0.09 / 1e-3 does not round up to 91
            segs = tuple(int(np.ceil(l / max_segment - 1e-9)) for l in lengths)
        elif np.isscalar(segments):
            segs = (int(segments),) * len(lengths)
        else:
            segs = tuple(int(k) for k in segments)
        return cls(bounds, segs)

    @property
    def n_sections(self) -> int:
        return len(self.bounds) - 1

    @property
    def length(self) -> float:
        return self.bounds[-1]

    @property
    def section_lengths(self):
        return np.diff(self.bounds)

    @property
    def segment_lengths(self):
        return self.section_lengths / np.asarray(self.segments)


def cross_section(profile: RadiusProfile, X):
    """Area and second moments ``(A, J_x, J_y, J_z)`` of a circular section."""
    X = profile.check(X)
    r = profile.radius(X)
    a = np.pi * r**2
    jy = np.pi * r**4 / 4.0
    return a, 2.0 * jy, jy, jy


def _diag_factors(profile, X):
    # geometric factors and their X-derivatives for the diagonal matrices
    r = profile.radius(X)
    dr = profile.slope
    a = np.pi * r**2
    j = np.pi * r**4 / 4.0
    da = 2.0 * np.pi * r * dr
    dj = np.pi * r**3 * dr
    return a, j, da, dj


def stiffness_diag(material, profile, X, derivative=False):
    a, j, da, dj = _diag_factors(profile, X)
    E, G = material.young_modulus, material.shear_modulus
    if derivative:
        a, j = da, dj
    return np.stack([G * 2 * j, E * j, E * j, E * a, G * a, G * a], axis=-1)


def mass_diag(material, profile, X):
    a, j, _, _ = _diag_factors(profile, X)
    return material.density * np.stack([2 * j, j, j, a, a, a], axis=-1)


def damping_diag(material, profile, X, derivative=False):
    a, j, da, dj = _diag_factors(profile, X)
    if derivative:
        a, j = da, dj
    return material.viscosity * np.stack([2 * j, 3 * j, 3 * j, 3 * a, a, a], axis=-1)


@dataclass(frozen=True)
class SectionProperties:
    mass: np.ndarray
    stiffness: np.ndarray
    damping: np.ndarray


def section_properties(material: Material, profile: RadiusProfile, X) -> SectionProperties:
    X = profile.check(X)
    return SectionProperties(
        np.diag(mass_diag(material, profile, X)),
        np.diag(stiffness_diag(material, profile, X)),
        np.diag(damping_diag(material, profile, X)),
    )


def interp_weights(partition: Partition, X):
    """Return ``(n, a_n, b_n)`` with sections numbered from 1.

    ``X = L_n`` belongs to section ``n`` and ``X = 0`` to section 1.
    """
    L = partition.length
    if X < -1e-12 or X > L * (1 + 1e-12) + 1e-12:
        raise DomainError(f"X={X} outside [0, {L}]")
    X = min(max(float(X), 0.0), L)
    b = np.asarray(partition.bounds)
    n = int(np.searchsorted(b, X, side="left"))
    n = min(max(n, 1), partition.n_sections)
    lo, hi = b[n - 1], b[n]
    bn = (X - lo) / (hi - lo)
    return n, 1.0 - bn, bn


def gauss_legendre01(order):
    """Gauss-Legendre nodes and weights mapped to ``[0, 1]``."""
    t, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (t + 1.0), 0.5 * w


@dataclass(frozen=True)
class Rod:
    """Everything needed to evaluate the discrete rod model.

    ``sampling`` picks where each segment's frozen strain is read from the
    linear strain field: ``"left"`` uses the segment's left end, ``"midpoint"``
    its centre.
    """

    profile: RadiusProfile
    material: Material
    partition: Partition
    base_pose: np.ndarray = field(default_factory=lambda: np.eye(4))
    quad_points: int = 4
    sampling: str = "left"

    def __post_init__(self):
        if abs(self.partition.length - self.profile.length) > 1e-12 * self.profile.length:
            raise ValueError("partition length differs from profile length")
        if self.sampling not in ("left", "midpoint"):
            raise ValueError("sampling must be 'left' or 'midpoint'")
        if self.quad_points < 1:
            raise ValueError("quad_points must be >= 1")

    def __hash__(self):
        return id(self)

    def __eq__(self, other):
        return self is other

    @property
    def length(self):
        return self.profile.length

    @property
    def n_sections(self):
        return self.partition.n_sections

    @property
    def n_nodes(self):
        return self.partition.n_sections + 1

    @property
    def n_coords(self):
        return 6 * self.n_nodes

    def rest_state(self):
        return np.tile(STRAIGHT, self.n_nodes)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def with_theta(self, theta):
        return self.replace(material=self.material.with_theta(theta))

    @cached_property
    def grid(self) -> "SegmentGrid":
        return SegmentGrid.build(self.partition, self.quad_points, self.sampling)

    # property arrays at quadrature points, shape (S, P, 6)
    @cached_property
    def stiffness_q(self):
        return stiffness_diag(self.material, self.profile, self.grid.xq)

    @cached_property
    def stiffness_dq(self):
        return stiffness_diag(self.material, self.profile, self.grid.xq, derivative=True)

    @cached_property
    def mass_q(self):
        return mass_diag(self.material, self.profile, self.grid.xq)

    @cached_property
    def damping_q(self):
        return damping_diag(self.material, self.profile, self.grid.xq)

    @cached_property
    def damping_dq(self):
        return damping_diag(self.material, self.profile, self.grid.xq, derivative=True)

    @cached_property
    def stiffness_tip(self):
        return stiffness_diag(self.material, self.profile, self.length)

    @cached_property
    def damping_tip(self):
        return damping_diag(self.material, self.profile, self.length)


@dataclass(frozen=True)
class SegmentGrid:
    """Flattened segment table and the outer quadrature rule.

    Segment ``j`` starts at ``x0[j]``, has length ``dx[j]``, lies in section
    ``sec[j]`` (0-based) and freezes the strain
    ``alpha[j] * node[sec] + (1 - alpha[j]) * node[sec + 1]``.
    """

    x0: np.ndarray
    dx: np.ndarray
    sec: np.ndarray
    alpha: np.ndarray
    tq: np.ndarray
    wq: np.ndarray
    xq: np.ndarray  # (S, P)
    wx: np.ndarray  # (S, P) quadrature weights including dx
    aq: np.ndarray  # (S, P) continuous interpolation weight a_n(X)
    bounds: np.ndarray

    @classmethod
    def build(cls, partition, quad_points, sampling="left"):
        x0, dx, sec, alpha = [], [], [], []
        shift = 0.5 if sampling == "midpoint" else 0.0
        b = partition.bounds
        for n, k in enumerate(partition.segments):
            h = (b[n + 1] - b[n]) / k
            i = np.arange(k)
            x0.append(b[n] + i * h)
            dx.append(np.full(k, h))
            sec.append(np.full(k, n))
            alpha.append(1.0 - (i + shift) / k)
        x0, dx = np.concatenate(x0), np.concatenate(dx)
        sec, alpha = np.concatenate(sec), np.concatenate(alpha)
        tq, wq = gauss_legendre01(quad_points)
        xq = x0[:, None] + dx[:, None] * tq[None, :]
        wx = dx[:, None] * wq[None, :]
        bnd = np.asarray(b)
        lo, hi = bnd[sec][:, None], bnd[sec + 1][:, None]
        aq = (hi - xq) / (hi - lo)
        return cls(x0, dx, sec, alpha, tq, wq, xq, wx, aq, bnd)

    @property
    def n_segments(self):
        return len(self.dx)

    def locate(self, X):
        """Segment index and local offset for arc length ``X``.

        A point on a segment boundary belongs to the segment on its left,
        except ``X = 0``.
        """
        j = int(np.searchsorted(self.x0, X, side="left")) - 1
        j = min(max(j, 0), self.n_segments - 1)
        return j, X - self.x0[j]
