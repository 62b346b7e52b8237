"""Piecewise linear strain kinematics: poses, velocities, Jacobians.

The joint vector ``q`` stacks the node strains ``xi_0 ... xi_N``. Inside a
section the strain is interpolated linearly between its two nodes; inside a
segment it is frozen at the interpolated value, so pose and Jacobian follow
from closed-form exponentials chained from base to tip.

The piecewise constant (PCS) baseline reuses the same machinery with one
strain block per section.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from ._sweep_py import segment_eval, weight_matrix
from .rod import Rod, gauss_legendre01, interp_weights
from .se3 import ad, adjoint_inv, rotation_to_quaternion


def node_strains(q):
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or q.size % 6:
        raise ValueError("joint vector length must be a multiple of 6")
    return q.reshape(-1, 6)


def _layout(rod: Rod, model: str):
    grid = rod.grid
    if model == "pls":
        return grid.sec, grid.sec + 1, grid.alpha, rod.n_nodes
    if model == "pcs":
        return grid.sec, grid.sec, np.ones_like(grid.alpha), rod.n_sections
    raise ValueError(f"unknown model {model!r}")


def segment_screws(rod: Rod, q, model="pls"):
    """Frozen strain of every segment, shape ``(S, 6)``."""
    nodes = node_strains(q)
    col0, col1, alpha, ncols = _layout(rod, model)
    if nodes.shape[0] != ncols:
        raise ValueError(f"expected {ncols} strain blocks, got {nodes.shape[0]}")
    a = alpha[:, None]
    return a * nodes[col0] + (1.0 - a) * nodes[col1]


def interpolation_matrix(rod: Rod, X):
    n, a, b = interp_weights(rod.partition, X)
    phi = np.zeros((6, rod.n_coords))
    phi[:, 6 * (n - 1) : 6 * n] = a * np.eye(6)
    phi[:, 6 * n : 6 * (n + 1)] = b * np.eye(6)
    return phi


def strain_field(rod: Rod, q, X):
    """Continuous linear strain ``xi(X) = Phi(X) q``."""
    nodes = node_strains(q)
    n, a, b = interp_weights(rod.partition, X)
    return a * nodes[n - 1] + b * nodes[n]


def strain_field_q(rod: Rod, q):
    """Continuous strain and its X-derivative at the quadrature points."""
    nodes = node_strains(q)
    g = rod.grid
    a = g.aq[..., None]
    lo, hi = nodes[g.sec][:, None], nodes[g.sec + 1][:, None]
    ell = (g.bounds[g.sec + 1] - g.bounds[g.sec])[:, None, None]
    xi = a * lo + (1.0 - a) * hi
    dxi = np.broadcast_to((hi - lo) / ell, xi.shape)
    return xi, dxi


@dataclass
class Sweep:
    """Cached base-to-tip evaluation of one state.

    Poses are relative to the base frame; ``pose`` and friends apply the
    rod's base pose.
    """

    rod: Rod
    model: str
    theta: np.ndarray
    theta_dot: np.ndarray | None
    eta0: np.ndarray | None
    data: dict

    @property
    def has_rates(self):
        return self.theta_dot is not None

    def __getattr__(self, name):
        try:
            return self.__dict__["data"][name]
        except KeyError:
            raise AttributeError(name) from None

    @property
    def g_tip(self):
        return self.data["g_nodes"][-1]

    @property
    def J_tip(self):
        return self.data["J_nodes"][-1]

    def at(self, X):
        """Local evaluation at arc length ``X``: dict with g, J and rates."""
        X = float(self.rod.profile.check(X))
        grid = self.rod.grid
        j, s = grid.locate(X)
        col0, col1, alpha, ncols = _layout(self.rod, self.model)
        sl = slice(j, j + 1)
        W = weight_matrix(alpha[sl], col0[sl], col1[sl], ncols)
        d = self.data
        s = np.array([[s]])
        if self.has_rates:
            out = segment_eval(
                self.theta[sl], s, d["g_nodes"][sl], d["J_nodes"][sl], W,
                self.theta_dot[sl], d["eta_nodes"][sl], d["Jd_nodes"][sl], _nested(self.rod),
            )
        else:
            out = segment_eval(self.theta[sl], s, d["g_nodes"][sl], d["J_nodes"][sl], W)
        return {k: v[0, 0] for k, v in out.items()}


def _nested(rod):
    return gauss_legendre01(rod.quad_points)


def run_sweep(rod: Rod, q, qd=None, eta0=None, quadrature=True, model="pls") -> Sweep:
    theta = segment_screws(rod, q, model)
    col0, col1, alpha, ncols = _layout(rod, model)
    grid = rod.grid
    tq = grid.tq if quadrature else np.empty(0)
    theta_dot = None
    if qd is not None:
        theta_dot = segment_screws(rod, qd, model)
        eta0 = np.zeros(6) if eta0 is None else np.asarray(eta0, dtype=float)
    data = kernels.sweep(
        theta, grid.dx, alpha, col0, col1, ncols, tq,
        theta_dot=theta_dot, eta0=eta0, nested=_nested(rod) if qd is not None else None,
    )
    return Sweep(rod, model, theta, theta_dot, eta0, data)


def pose_at(rod: Rod, q, X, base_pose=None):
    base = rod.base_pose if base_pose is None else base_pose
    return base @ run_sweep(rod, q, quadrature=False).at(X)["g"]


def velocity_at(rod: Rod, q, qd, X, base_velocity=None):
    sw = run_sweep(rod, q, qd, eta0=base_velocity, quadrature=False)
    return sw.at(X)["eta"]


def acceleration_at(rod: Rod, q, qd, qdd, X, base_velocity=None, base_acceleration=None):
    """Body acceleration ``J qdd + Jdot qd`` plus the transported base term."""
    sw = run_sweep(rod, q, qd, eta0=base_velocity, quadrature=False)
    loc = sw.at(X)
    acc = loc["J"] @ np.asarray(qdd, dtype=float) + loc["Jd"] @ np.asarray(qd, dtype=float)
    if base_acceleration is not None:
        acc = acc + adjoint_inv(loc["g"]) @ np.asarray(base_acceleration, dtype=float)
    return acc


def jacobian(rod: Rod, q, X):
    return run_sweep(rod, q, quadrature=False).at(X)["J"]


def jacobian_dot(rod: Rod, q, qd, X):
    """Time derivative of ``J(q(t), X)`` along ``qd``.

    The sweep carries the AD-block form ``int Ad^-1 ad_eta Phi``, which is
    what the Coriolis matrix uses; it differs from ``dJ/dt`` by
    ``ad(eta(X)) J(X)``, a term that vanishes against ``qd``.
    """
    loc = run_sweep(rod, q, qd, quadrature=False).at(X)
    return loc["Jd"] - ad(loc["eta"]) @ loc["J"]


def pcs_pose_at(rod: Rod, q_pcs, X, base_pose=None):
    base = rod.base_pose if base_pose is None else base_pose
    return base @ run_sweep(rod, q_pcs, quadrature=False, model="pcs").at(X)["g"]


def end_effector(rod: Rod, q, model="pls"):
    sw = run_sweep(rod, q, quadrature=False, model=model)
    return (rod.base_pose @ sw.g_tip)[:3, 3]


def centerline(rod: Rod, q, samples: int, model="pls"):
    """Rows ``(X, x, y, z, qw, qx, qy, qz)`` at uniformly spaced X."""
    if samples < 2:
        raise ValueError("need at least two samples")
    sw = run_sweep(rod, q, quadrature=False, model=model)
    rows = []
    for X in np.linspace(0.0, rod.length, samples):
        g = rod.base_pose @ sw.at(X)["g"]
        rows.append([X, *g[:3, 3], *rotation_to_quaternion(g[:3, :3])])
    return np.array(rows)
