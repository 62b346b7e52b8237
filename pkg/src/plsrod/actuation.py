"""Cable routing, cable wrench map, gravity and tip loads."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularConfigurationError
from .rod import RadiusProfile
from .se3 import adjoint_inv, cross

# gravity acceleration twist, angular-first
GRAVITY_UP_Z = np.array([0.0, 0.0, 0.0, 0.0, 0.0, 9.81])
GRAVITY_DOWN_Z = -GRAVITY_UP_Z


@dataclass(frozen=True)
class CableLayout:
    """Cables at azimuth ``angles`` (rad) and affine radial offset.

    Cable ``i`` runs at body-frame offset ``d_i(X) = r(X) (0, cos a_i, sin a_i)``
    with ``r(X) = base_offset + (tip_offset - base_offset) X / length``.
    """

    angles: tuple
    base_offset: float
    tip_offset: float
    length: float

    @classmethod
    def on_surface(cls, profile: RadiusProfile, angles_deg=(0.0, 90.0, 180.0, 270.0)):
        return cls(
            tuple(np.deg2rad(a) for a in angles_deg),
            profile.base_radius,
            profile.tip_radius,
            profile.length,
        )

    @property
    def n_cables(self):
        return len(self.angles)

    @property
    def directions(self):
        a = np.asarray(self.angles, dtype=float)
        return np.stack([np.zeros_like(a), np.cos(a), np.sin(a)], axis=-1)

    @property
    def slope(self):
        return (self.tip_offset - self.base_offset) / self.length

    def offsets(self, X):
        """``d_i(X)`` with shape ``X.shape + (C, 3)``."""
        r = self.base_offset + self.slope * np.asarray(X, dtype=float)
        return r[..., None, None] * self.directions

    def offset_rates(self, X=None):
        """``d_i'`` (constant for an affine radius), shape ``(C, 3)``."""
        return self.slope * self.directions


def _tangent_parts(layout, xi, X):
    xi = np.asarray(xi, dtype=float)
    d = layout.offsets(X)
    dp = layout.offset_rates()
    k = xi[..., None, :3]
    w = xi[..., None, 3:] + cross(k, d) + dp
    nrm = np.linalg.norm(w, axis=-1)
    if np.any(nrm < 1e-9):
        raise SingularConfigurationError("cable tangent undefined: zero path derivative")
    return d, dp, w, nrm


def cable_tangent(layout: CableLayout, xi, X=0.0, i=None):
    """Unit tangent of cable ``i`` (or all cables, shape ``(C, 3)``)."""
    _, _, w, nrm = _tangent_parts(layout, xi, X)
    t = w / nrm[..., None]
    return t if i is None else t[..., i, :]


def actuation_matrix(layout: CableLayout, xi, X=0.0):
    """Cable wrench map ``Lambda(X)`` of shape ``(..., 6, C)``."""
    d, _, w, nrm = _tangent_parts(layout, xi, X)
    t = w / nrm[..., None]
    lam = np.concatenate([cross(d, t), t], axis=-1)
    return np.swapaxes(lam, -1, -2)


def actuation_matrix_and_rate(layout: CableLayout, xi, dxi, X):
    """``Lambda`` and its analytic X-derivative for a strain with slope ``dxi``."""
    d, dp, w, nrm = _tangent_parts(layout, xi, X)
    xi = np.asarray(xi, dtype=float)
    dxi = np.asarray(dxi, dtype=float)
    t = w / nrm[..., None]
    k = xi[..., None, :3]
    # d'' = 0 for an affine offset
    wp = dxi[..., None, 3:] + cross(dxi[..., None, :3], d) + cross(k, dp)
    tp = (wp - t * np.sum(t * wp, axis=-1, keepdims=True)) / nrm[..., None]
    lam = np.concatenate([cross(d, t), t], axis=-1)
    dlam = np.concatenate([cross(dp, t) + cross(d, tp), tp], axis=-1)
    return np.swapaxes(lam, -1, -2), np.swapaxes(dlam, -1, -2)


def actuation_rate_fd(layout: CableLayout, strain, X, h):
    """Central difference of ``Lambda`` along X; ``strain`` maps X to xi."""
    up = actuation_matrix(layout, strain(X + h), X + h)
    dn = actuation_matrix(layout, strain(X - h), X - h)
    return (up - dn) / (2.0 * h)


def gravity_wrench(mass_diag, g, gravity, base_pose=None):
    """Distributed body wrench ``M Ad^-1_g Ad^-1_{g_r} G`` per unit length.

    ``g`` is the pose relative to the base and ``mass_diag`` the diagonal of
    the cross-sectional mass matrix; both may carry leading axes.
    """
    gr = np.eye(4) if base_pose is None else base_pose
    acc = adjoint_inv(gr) @ np.asarray(gravity, dtype=float)
    body = adjoint_inv(g) @ acc
    return np.asarray(mass_diag) * body


def tip_wrench(spec=None):
    """Tip load from a scalar axial force or a full 6-vector wrench."""
    if spec is None:
        return np.zeros(6)
    arr = np.asarray(spec, dtype=float)
    if arr.ndim == 0:
        return np.array([0.0, 0.0, 0.0, float(arr), 0.0, 0.0])
    if arr.shape != (6,):
        raise ValueError("tip wrench must be a scalar or a 6-vector")
    return arr.copy()


@dataclass
class Loads:
    """External inputs: cable tensions, gravity twist and tip wrench."""

    layout: CableLayout | None = None
    tensions: np.ndarray | None = None
    gravity: np.ndarray = None
    tip: np.ndarray = None

    def __post_init__(self):
        self.gravity = np.zeros(6) if self.gravity is None else np.asarray(self.gravity, dtype=float)
        self.tip = tip_wrench(self.tip)
        if self.layout is not None:
            t = np.zeros(self.layout.n_cables) if self.tensions is None else self.tensions
            self.tensions = np.asarray(t, dtype=float)
            if self.tensions.shape != (self.layout.n_cables,):
                raise ValueError("one tension per cable required")
            if np.any(self.tensions < 0):
                raise ValueError("cables can only pull: tensions must be >= 0")
        elif self.tensions is not None and np.any(np.asarray(self.tensions) != 0):
            raise ValueError("tensions given without a cable layout")

    @property
    def has_cables(self):
        return self.layout is not None and np.any(self.tensions != 0)

    def with_tensions(self, tensions):
        return Loads(self.layout, tensions, self.gravity, self.tip)

    def with_tip(self, tip):
        return Loads(self.layout, self.tensions, self.gravity, tip)

    def scaled(self, s):
        """Loads multiplied by ``s`` (used for load continuation)."""
        t = None if self.tensions is None else s * self.tensions
        return Loads(self.layout, t, s * self.gravity, s * self.tip)
