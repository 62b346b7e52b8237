"""Rigid-motion kernels on SE(3) and se(3).

Twists are 6-vectors ordered angular-first, ``(K, Q)`` for strains and
``(Omega, V)`` for velocities. Poses are 4x4 homogeneous matrices. Every
function broadcasts over leading axes, so ``v`` may be ``(..., 6)`` and
``s`` any array broadcastable against ``v[..., 0]``.
"""

from __future__ import annotations

import numpy as np

# Below this value of |K|*s the screw coefficients switch to their Taylor
# series; closed forms lose digits to cancellation there.
SERIES_THRESHOLD = 0.1


def skew(a):
    a = np.asarray(a, dtype=float)
    out = np.zeros(a.shape[:-1] + (3, 3))
    out[..., 0, 1] = -a[..., 2]
    out[..., 0, 2] = a[..., 1]
    out[..., 1, 0] = a[..., 2]
    out[..., 1, 2] = -a[..., 0]
    out[..., 2, 0] = -a[..., 1]
    out[..., 2, 1] = a[..., 0]
    return out


def cross(a, b):
    """Broadcasting cross product of 3-vectors (faster than ``np.cross``)."""
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def hat(v):
    """Map a twist to its 4x4 se(3) matrix."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (4, 4))
    out[..., :3, :3] = skew(v[..., :3])
    out[..., :3, 3] = v[..., 3:]
    return out


def vee(m):
    m = np.asarray(m, dtype=float)
    out = np.empty(m.shape[:-2] + (6,))
    out[..., 0] = m[..., 2, 1]
    out[..., 1] = m[..., 0, 2]
    out[..., 2] = m[..., 1, 0]
    out[..., 3:] = m[..., :3, 3]
    return out


def ad(v):
    """Lie-algebra adjoint ``[[K~, 0], [Q~, K~]]``."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (6, 6))
    kt = skew(v[..., :3])
    out[..., :3, :3] = kt
    out[..., 3:, 3:] = kt
    out[..., 3:, :3] = skew(v[..., 3:])
    return out


def pose(rotation=None, translation=None):
    g = np.eye(4)
    if rotation is not None:
        g[:3, :3] = rotation
    if translation is not None:
        g[:3, 3] = translation
    return g


def inv_pose(g):
    g = np.asarray(g, dtype=float)
    out = np.zeros_like(g)
    rt = np.swapaxes(g[..., :3, :3], -1, -2)
    out[..., :3, :3] = rt
    out[..., :3, 3] = -np.einsum("...ij,...j->...i", rt, g[..., :3, 3])
    out[..., 3, 3] = 1.0
    return out


def _series(x2, coeffs):
    # Horner in x^2
    acc = np.zeros_like(x2) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x2 + c
    return acc


_A = (1.0, -1 / 6, 1 / 120, -1 / 5040, 1 / 362880, -1 / 39916800)
_B = (1 / 2, -1 / 24, 1 / 720, -1 / 40320, 1 / 3628800, -1 / 479001600)
_C = (1 / 6, -1 / 120, 1 / 5040, -1 / 362880, 1 / 39916800, -1 / 6227020800)
_F1 = (1 / 2, 0.0, -1 / 720, 1 / 20160, -1 / 1209600, 1 / 119750400)
_F2 = (1 / 6, 0.0, -1 / 5040, 1 / 181440, -1 / 13305600, 1 / 1556755200)
_F3 = (1 / 24, -1 / 360, 1 / 13440, -1 / 907200, 1 / 95800320, -1 / 14529715200)
_F4 = (1 / 120, -1 / 2520, 1 / 120960, -1 / 9979200, 1 / 1245404160, -1 / 217945728000)


def _coefficients(x, closed, series):
    x = np.asarray(x, dtype=float)
    small = x < SERIES_THRESHOLD
    out = _series(x * x, series)
    if not np.all(small):
        xs = np.where(small, 1.0, x)
        with np.errstate(all="ignore"):
            out = np.where(small, out, closed(xs))
    return out


def rotation_coefficients(x):
    """Return ``sin x / x``, ``(1 - cos x)/x^2`` and ``(x - sin x)/x^3``."""
    a = _coefficients(x, lambda t: np.sin(t) / t, _A)
    b = _coefficients(x, lambda t: (1 - np.cos(t)) / t**2, _B)
    c = _coefficients(x, lambda t: (t - np.sin(t)) / t**3, _C)
    return a, b, c


def tangent_coefficients(x):
    f1 = _coefficients(x, lambda t: (4 - 4 * np.cos(t) - t * np.sin(t)) / (2 * t**2), _F1)
    f2 = _coefficients(x, lambda t: (4 * t - 5 * np.sin(t) + t * np.cos(t)) / (2 * t**3), _F2)
    f3 = _coefficients(x, lambda t: (2 - 2 * np.cos(t) - t * np.sin(t)) / (2 * t**4), _F3)
    f4 = _coefficients(x, lambda t: (2 * t - 3 * np.sin(t) + t * np.cos(t)) / (2 * t**5), _F4)
    return f1, f2, f3, f4


def exp_pose(v, s=1.0):
    """Screw exponential ``exp(s * hat(v))`` in closed form."""
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    phi = v[..., :3] * s[..., None]
    rho = v[..., 3:] * s[..., None]
    x = np.linalg.norm(phi, axis=-1)
    a, b, c = rotation_coefficients(x)
    pt = skew(phi)
    pt2 = pt @ pt
    eye = np.eye(3)
    shape = np.broadcast_shapes(phi.shape[:-1], x.shape)
    g = np.zeros(shape + (4, 4))
    g[..., :3, :3] = eye + a[..., None, None] * pt + b[..., None, None] * pt2
    vmat = eye + b[..., None, None] * pt + c[..., None, None] * pt2
    g[..., :3, 3] = np.einsum("...ij,...j->...i", vmat, rho)
    g[..., 3, 3] = 1.0
    return g


def adjoint(g):
    """``Ad_g = [[R, 0], [u~ R, R]]``."""
    g = np.asarray(g, dtype=float)
    r = g[..., :3, :3]
    out = np.zeros(g.shape[:-2] + (6, 6))
    out[..., :3, :3] = r
    out[..., 3:, 3:] = r
    out[..., 3:, :3] = skew(g[..., :3, 3]) @ r
    return out


def adjoint_inv(g):
    """``Ad_g^{-1} = [[R^T, 0], [-R^T u~, R^T]]`` without a matrix inverse."""
    g = np.asarray(g, dtype=float)
    rt = np.swapaxes(g[..., :3, :3], -1, -2)
    out = np.zeros(g.shape[:-2] + (6, 6))
    out[..., :3, :3] = rt
    out[..., 3:, 3:] = rt
    out[..., 3:, :3] = -rt @ skew(g[..., :3, 3])
    return out


def exp_ad(v, s=1.0):
    """``exp(s * ad(v))``, evaluated as ``Ad`` of the screw exponential."""
    return adjoint(exp_pose(v, s))


def tangent_op(v, s=1.0):
    """Integrated adjoint exponential ``int_0^s exp(-(s - t) ad(v)) dt``.

    This is the factor mapping a frozen strain rate to the velocity it
    induces at the end of a segment of length ``s``.
    """
    v = np.asarray(v, dtype=float)
    s = np.asarray(s, dtype=float)
    theta = np.linalg.norm(v[..., :3], axis=-1)
    x = theta * s
    f1, f2, f3, f4 = tangent_coefficients(x)
    m = ad(v)
    m2 = m @ m
    m3 = m2 @ m
    m4 = m3 @ m
    s_ = s[..., None, None]
    return (
        s_ * np.eye(6)
        - (s_**2 * f1[..., None, None]) * m
        + (s_**3 * f2[..., None, None]) * m2
        - (s_**4 * f3[..., None, None]) * m3
        + (s_**5 * f4[..., None, None]) * m4
    )


def is_pose(g, tol=1e-10):
    r = np.asarray(g)[:3, :3]
    return (
        np.linalg.norm(r.T @ r - np.eye(3)) <= tol
        and abs(np.linalg.det(r) - 1.0) <= tol
    )


def rotation_to_quaternion(r):
    """Unit quaternion ``(w, x, y, z)`` of a rotation matrix (Shepperd)."""
    r = np.asarray(r, dtype=float)
    tr = np.trace(r)
    diag = np.array([tr, r[0, 0], r[1, 1], r[2, 2]])
    k = int(np.argmax(diag))
    if k == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        q = np.array([w, (r[2, 1] - r[1, 2]) / (4 * w), (r[0, 2] - r[2, 0]) / (4 * w), (r[1, 0] - r[0, 1]) / (4 * w)])
    elif k == 1:
        x = 0.5 * np.sqrt(1.0 + 2 * r[0, 0] - tr)
        q = np.array([(r[2, 1] - r[1, 2]) / (4 * x), x, (r[0, 1] + r[1, 0]) / (4 * x), (r[0, 2] + r[2, 0]) / (4 * x)])
    elif k == 2:
        y = 0.5 * np.sqrt(1.0 + 2 * r[1, 1] - tr)
        q = np.array([(r[0, 2] - r[2, 0]) / (4 * y), (r[0, 1] + r[1, 0]) / (4 * y), y, (r[1, 2] + r[2, 1]) / (4 * y)])
    else:
        z = 0.5 * np.sqrt(1.0 + 2 * r[2, 2] - tr)
        q = np.array([(r[1, 0] - r[0, 1]) / (4 * z), (r[0, 2] + r[2, 0]) / (4 * z), (r[1, 2] + r[2, 1]) / (4 * z), z])
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)
