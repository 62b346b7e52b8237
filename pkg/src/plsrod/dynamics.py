"""Generalized dynamics of the piecewise linear strain rod.

All integrals over X use the rod's composite Gauss-Legendre rule. Matrices
named ``*_sq`` keep all ``6(N+1)`` rows; the projected versions drop the
last node's rows, which are replaced by the tip boundary condition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .actuation import Loads, actuation_matrix, actuation_matrix_and_rate, gravity_wrench
from .errors import DifferentialAlgebraicError, SingularMatrixError
from .kinematics import node_strains, run_sweep, strain_field_q
from .rod import Rod
from .se3 import ad, adjoint_inv, cross


def coad(xi, f):
    """``ad(xi)^T f`` without forming the 6x6 matrix."""
    k, qv = xi[..., :3], xi[..., 3:]
    m, n = f[..., :3], f[..., 3:]
    top = -cross(k, m) - cross(qv, n)
    return np.concatenate([top, -cross(k, n)], axis=-1)


def _rows(rod):
    return slice(0, 6 * rod.n_sections)


def project(rod: Rod, sw, density):
    """``int J^T f dX`` for a density ``f`` sampled at the quadrature points."""
    return np.einsum("sp,spji,spj->i", rod.grid.wx, sw.J_q, density)


def project_matrix(rod: Rod, sw, B):
    """``int J^T B dX`` for ``B`` of shape ``(S, P, 6, m)``."""
    return np.einsum("sp,spji,spjk->ik", rod.grid.wx, sw.J_q, B)


def _sweep(rod, q, qd=None, sw=None):
    if sw is None or (qd is not None and not sw.has_rates):
        sw = run_sweep(rod, q, qd)
    return sw


def rest_strain_q(rod, q0):
    return strain_field_q(rod, q0)


def internal_wrench_q(rod: Rod, q, qd=None, q0=None):
    """Kelvin-Voigt wrench and its X-derivative at the quadrature points."""
    q0 = rod.rest_state() if q0 is None else q0
    xi, dxi = strain_field_q(rod, q)
    xi0, dxi0 = strain_field_q(rod, q0)
    e, de = xi - xi0, dxi - dxi0
    F = rod.stiffness_q * e
    dF = rod.stiffness_dq * e + rod.stiffness_q * de
    if qd is not None and rod.material.viscosity > 0:
        v, dv = strain_field_q(rod, qd)
        F = F + rod.damping_q * v
        dF = dF + rod.damping_dq * v + rod.damping_q * dv
    return xi, F, dF


def internal_density(rod: Rod, q, qd=None, q0=None):
    """``F_i' - ad_xi^T F_i`` at the quadrature points."""
    xi, F, dF = internal_wrench_q(rod, q, qd, q0)
    return dF - coad(xi, F)


def cable_density(rod: Rod, layout, q):
    """Per-cable ``Lambda' - ad_xi^T Lambda``, shape ``(S, P, 6, C)``."""
    xi, dxi = strain_field_q(rod, q)
    lam, dlam = actuation_matrix_and_rate(layout, xi, dxi, rod.grid.xq)
    adt = np.swapaxes(ad(xi), -1, -2)
    return dlam - adt @ lam


def tip_actuation(rod: Rod, layout, q):
    """``Lambda(L)`` evaluated with the last node strain."""
    return actuation_matrix(layout, node_strains(q)[-1], rod.length)


def _interp_blocks(rod, B, Bp):
    """Assemble ``int J^T (B Phi + Bp Phi') dX`` column blocks section by section.

    ``B`` and ``Bp`` hold per-point 6x6 matrices multiplying ``Phi`` and
    ``Phi'``; returns a ``6(N+1)`` square matrix.
    """
    g = rod.grid
    ell = (g.bounds[g.sec + 1] - g.bounds[g.sec])[:, None, None, None]
    a = g.aq[..., None, None]
    left = a * B - Bp / ell
    right = (1.0 - a) * B + Bp / ell
    return left, right


def _scatter(rod, sw, left, right):
    g = rod.grid
    n = rod.n_coords
    out = np.zeros((n, n))
    JtL = np.einsum("sp,spji,spjk->sik", g.wx, sw.J_q, left)
    JtR = np.einsum("sp,spji,spjk->sik", g.wx, sw.J_q, right)
    for sec in range(rod.n_sections):
        m = g.sec == sec
        out[:, 6 * sec : 6 * sec + 6] += JtL[m].sum(axis=0)
        out[:, 6 * sec + 6 : 6 * sec + 12] += JtR[m].sum(axis=0)
    return out


def stiffness_damping(rod: Rod, q, sw=None, square=False):
    """Decoupled ``K(q)`` and ``D(q)`` with ``F_i = K (q - q0) + D qd``."""
    sw = _sweep(rod, q, sw=sw)
    xi, _ = strain_field_q(rod, q)
    adt = np.swapaxes(ad(xi), -1, -2)

    def block(diag, ddiag):
        S = diag[..., None, :] * np.eye(6)
        B = ddiag[..., None, :] * np.eye(6) - adt * diag[..., None, :]
        return _scatter(rod, sw, *_interp_blocks(rod, B, S))

    K = block(rod.stiffness_q, rod.stiffness_dq)
    if rod.material.viscosity > 0:
        D = block(rod.damping_q, rod.damping_dq)
    else:
        D = np.zeros_like(K)
    if square:
        return K, D
    r = _rows(rod)
    return K[r], D[r]


def internal_generalized(rod: Rod, q, qd=None, q0=None, sw=None, square=False):
    sw = _sweep(rod, q, sw=sw)
    f = project(rod, sw, internal_density(rod, q, qd, q0))
    return f if square else f[_rows(rod)]


def generalized_mass(rod: Rod, q, sw=None, square=False):
    sw = _sweep(rod, q, sw=sw)
    B = rod.mass_q[..., :, None] * sw.J_q
    M = project_matrix(rod, sw, B)
    return M if square else M[_rows(rod)]


def coriolis(rod: Rod, q, qd, sw=None, square=False):
    """``-int J^T (ad_eta^T M J - M Jdot) dX`` with ``eta = J qd``."""
    sw = _sweep(rod, q, qd, sw)
    Mj = rod.mass_q[..., :, None] * sw.J_q
    adt = np.swapaxes(ad(sw.eta_q), -1, -2)
    B = adt @ Mj - rod.mass_q[..., :, None] * sw.Jd_q
    C = -project_matrix(rod, sw, B)
    return C if square else C[_rows(rod)]


def gravity_matrix(rod: Rod, q, sw=None, square=False):
    """``G(q) = int J^T M Ad^-1_g dX``; gravity enters as ``G Ad^-1_{g_r} G``."""
    sw = _sweep(rod, q, sw=sw)
    B = rod.mass_q[..., :, None] * adjoint_inv(sw.g_q)
    G = project_matrix(rod, sw, B)
    return G if square else G[_rows(rod)]


def external_generalized(rod: Rod, q, loads: Loads, sw=None, square=False):
    """Generalized gravity force ``F_e`` and the matrix ``G(q)``."""
    sw = _sweep(rod, q, sw=sw)
    G = gravity_matrix(rod, q, sw, square=True)
    acc = adjoint_inv(rod.base_pose) @ loads.gravity
    Fe = G @ acc
    if square:
        return Fe, G
    r = _rows(rod)
    return Fe[r], G[r]


def actuation_generalized(rod: Rod, layout, q, sw=None, square=False):
    """``H(q) = int J^T (Lambda' - ad_xi^T Lambda) dX``."""
    sw = _sweep(rod, q, sw=sw)
    H = project_matrix(rod, sw, cable_density(rod, layout, q))
    return H if square else H[_rows(rod)]


def load_density(rod: Rod, sw, q, loads: Loads):
    """Total external distributed density: gravity plus cables."""
    dens = gravity_wrench(rod.mass_q, sw.g_q, loads.gravity, rod.base_pose)
    if loads.has_cables:
        dens = dens + cable_density(rod, loads.layout, q) @ loads.tensions
    return dens


def kinetic_energy(rod: Rod, q, qd, sw=None):
    M = generalized_mass(rod, q, sw, square=True)
    return 0.5 * qd @ M @ qd


def potential_energy(rod: Rod, q, loads: Loads, q0=None, sw=None):
    """Elastic energy of the linear strain field plus gravity potential."""
    sw = _sweep(rod, q, sw=sw)
    q0 = rod.rest_state() if q0 is None else q0
    xi, _ = strain_field_q(rod, q)
    xi0, _ = strain_field_q(rod, q0)
    e = xi - xi0
    elastic = 0.5 * np.sum(rod.grid.wx * np.sum(rod.stiffness_q * e * e, axis=-1))
    # inertial linear gravity a: potential -int rho A a . p dX
    g_in = rod.base_pose @ sw.g_q
    a = loads.gravity[3:]
    rhoA = rod.mass_q[..., 3]
    grav = -np.sum(rod.grid.wx * rhoA * (g_in[..., :3, 3] @ a))
    return elastic + grav


@dataclass
class AssembledOde:
    """Stacked square system ``Mbar qdd + Cbar qd - Kbar = Hbar T + Hdot Tdot``."""

    Mbar: np.ndarray
    Cbar: np.ndarray
    Kbar: np.ndarray
    Hbar: np.ndarray
    Hdot: np.ndarray
    parts: dict = field(default_factory=dict)

    def rhs(self, qd, tensions=None, tension_rates=None):
        r = self.Kbar - self.Cbar @ qd
        if tensions is not None and self.Hbar.shape[1]:
            r = r + self.Hbar @ tensions
        if tension_rates is not None and self.Hdot.shape[1]:
            r = r + self.Hdot @ tension_rates
        return r

    def accelerations(self, qd, tensions=None, tension_rates=None):
        cond = np.linalg.cond(self.Mbar)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularMatrixError("stacked mass matrix is singular", condition=float(cond))
        return np.linalg.solve(self.Mbar, self.rhs(qd, tensions, tension_rates))


def assemble(rod: Rod, q, qd, loads: Loads, q0=None, sw=None) -> AssembledOde:
    if rod.material.viscosity <= 0:
        raise DifferentialAlgebraicError(
            "zero viscosity: the tip boundary condition is algebraic, no stacked ODE form"
        )
    q = np.asarray(q, dtype=float)
    qd = np.asarray(qd, dtype=float)
    q0 = rod.rest_state() if q0 is None else q0
    sw = _sweep(rod, q, qd, sw)
    n = rod.n_coords
    M = generalized_mass(rod, q, sw)
    C = coriolis(rod, q, qd, sw)
    Fe, G = external_generalized(rod, q, loads, sw)
    Fi = internal_generalized(rod, q, qd, q0, sw)
    gam = np.zeros((6, n))
    gam[:, -6:] = np.diag(rod.damping_tip)
    sig = np.zeros((6, n))
    sig[:, -6:] = np.diag(rod.stiffness_tip)
    nc = loads.layout.n_cables if loads.layout is not None else 0
    H = np.zeros((6 * rod.n_sections, nc))
    lam_tip = np.zeros((6, nc))
    if nc:
        H = actuation_generalized(rod, loads.layout, q, sw)
        lam_tip = tip_actuation(rod, loads.layout, q)
    return AssembledOde(
        Mbar=np.vstack([M, gam]),
        Cbar=np.vstack([C, sig]),
        Kbar=np.concatenate([Fe + Fi, np.zeros(6)]),
        Hbar=np.vstack([H, np.zeros((6, nc))]),
        Hdot=np.vstack([np.zeros((6 * rod.n_sections, nc)), -lam_tip]),
        parts={"M": M, "C": C, "Fe": Fe, "G": G, "Fi": Fi, "H": H, "gamma": gam, "sigma": sig,
               "lambda_tip": lam_tip, "sweep": sw},
    )


# ---------------------------------------------------------------- simulation


@dataclass
class TensionInput:
    """Tension trajectory ``T(t)`` with its rate ``Tdot(t)``.

    ``breaks`` lists times where ``T`` jumps; the integrator re-projects the
    tip boundary condition there instead of integrating an impulse.
    """

    values: object
    rates: object = None
    breaks: tuple = ()

    @classmethod
    def constant(cls, tensions):
        T = np.asarray(tensions, dtype=float)
        return cls(lambda t: T, lambda t: np.zeros_like(T))

    @classmethod
    def step(cls, tensions, t_on=0.0, before=None):
        T = np.asarray(tensions, dtype=float)
        T0 = np.zeros_like(T) if before is None else np.asarray(before, dtype=float)
        return cls(lambda t: T if t >= t_on else T0, lambda t: np.zeros_like(T), (float(t_on),))

    @classmethod
    def ramp(cls, tensions, duration):
        T = np.asarray(tensions, dtype=float)
        if duration <= 0:
            raise ValueError("ramp duration must be positive")
        return cls(
            lambda t: T * min(max(t / duration, 0.0), 1.0),
            lambda t: T / duration if 0.0 <= t < duration else np.zeros_like(T),
        )

    def __call__(self, t):
        T = np.asarray(self.values(t), dtype=float)
        Td = np.zeros_like(T) if self.rates is None else np.asarray(self.rates(t), dtype=float)
        return T, Td


def boundary_residual(rod: Rod, q, qd, loads: Loads, q0=None):
    """Tip condition ``Sigma (xi_N - xi0) + gamma xidot_N - F_tip + Lambda(L) T``."""
    q0 = rod.rest_state() if q0 is None else q0
    r = rod.stiffness_tip * (np.asarray(q)[-6:] - q0[-6:]) + rod.damping_tip * np.asarray(qd)[-6:]
    r = r - loads.tip
    if loads.has_cables:
        r = r + tip_actuation(rod, loads.layout, q) @ loads.tensions
    return r


def _tip_tension_jacobian(rod, layout, q, tensions, h=1e-7):
    """``d(Lambda(L) T)/d xi_N`` by central differences (6x6)."""
    out = np.zeros((6, 6))
    for i in range(6):
        qp, qm = q.copy(), q.copy()
        qp[-6 + i] += h
        qm[-6 + i] -= h
        out[:, i] = (tip_actuation(rod, layout, qp) - tip_actuation(rod, layout, qm)) @ tensions / (2 * h)
    return out


def project_boundary(rod: Rod, q, qd, loads: Loads, q0=None, tol=1e-12, max_iter=30):
    """Solve the tip condition for ``xi_N`` with the interior and rates fixed."""
    from .errors import ConvergenceError

    q = np.array(q, dtype=float)
    q0 = rod.rest_state() if q0 is None else q0
    scale = np.maximum(rod.stiffness_tip, 1e-300)
    for _ in range(max_iter):
        r = boundary_residual(rod, q, qd, loads, q0)
        if np.linalg.norm(r / scale) <= tol:
            return q
        A = np.diag(rod.stiffness_tip)
        if loads.has_cables:
            A = A + _tip_tension_jacobian(rod, loads.layout, q, loads.tensions)
        q[-6:] -= np.linalg.solve(A, r)
    raise ConvergenceError("tip boundary projection failed", residual=float(np.linalg.norm(r)))


@dataclass
class Trajectory:
    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    tip: np.ndarray  # inertial end-effector position per sample
    energy: np.ndarray  # kinetic + elastic + gravity, every step
    energy_t: np.ndarray
    boundary_drift: float = 0.0
    max_condition: float = 0.0

    @property
    def energy_increments(self):
        return np.diff(self.energy)


def total_energy(rod: Rod, q, qd, loads: Loads, q0=None, sw=None):
    sw = _sweep(rod, q, sw=sw)
    return kinetic_energy(rod, q, qd, sw) + potential_energy(rod, q, loads, q0, sw)


def simulate(
    rod: Rod,
    loads: Loads,
    t_end,
    dt=1e-3,
    q_init=None,
    qd_init=None,
    inputs: TensionInput | None = None,
    q0=None,
    sample_every=1,
    blowup=1e8,
    project_initial=True,
):
    """Fixed-step semi-implicit rollout of the stacked system.

    Stiffness and damping are implicit (``K(q)``, ``D(q)`` frozen over the
    step), while Coriolis, gravity and the geometric nonlinearity are
    explicit. The bottom rows integrate the time derivative of the tip
    condition, including the ``d(Lambda(L))/dt T`` term, so the linear part
    of that condition is carried exactly by the update.
    """
    from .errors import ConvergenceError
    from .kinematics import end_effector

    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    q0 = rod.rest_state() if q0 is None else np.asarray(q0, dtype=float)
    q = q0.copy() if q_init is None else np.array(q_init, dtype=float)
    qd = np.zeros_like(q) if qd_init is None else np.array(qd_init, dtype=float)
    cables = loads.layout is not None
    if inputs is None and cables:
        inputs = TensionInput.constant(loads.tensions)

    def loads_at(t):
        if not cables:
            return loads, None
        T, Td = inputs(t)
        return loads.with_tensions(T), Td

    L0, _ = loads_at(0.0)
    if project_initial:
        q = project_boundary(rod, q, qd, L0, q0)
    n_steps = int(round(t_end / dt))
    n = q.size
    breaks = sorted(inputs.breaks) if inputs is not None else []
    ts, qs, qds, tips = [0.0], [q.copy()], [qd.copy()], [end_effector(rod, q)]
    energy = [total_energy(rod, q, qd, L0, q0)]
    drift, cond_max = 0.0, 0.0
    scale = np.maximum(rod.stiffness_tip, 1e-300)
    for k in range(n_steps):
        t = k * dt
        Ln, Td = loads_at(t + dt)
        if any(t < b <= t + dt for b in breaks):
            q = project_boundary(rod, q, qd, Ln, q0)
        elif cables:
            # secant rate: the tension increment over the step is then exact
            Td = (Ln.tensions - inputs(t)[0]) / dt
        sw = run_sweep(rod, q, qd)
        ode = assemble(rod, q, qd, Ln, q0, sw)
        Kq, Dq = stiffness_damping(rod, q, sw)
        P = ode.parts
        extra = np.zeros((6, n))
        if Ln.has_cables:
            extra[:, -6:] = _tip_tension_jacobian(rod, Ln.layout, q, Ln.tensions)
        f = ode.rhs(qd, Ln.tensions if cables else None, Td)
        f[-6:] -= extra @ qd
        Kb = np.vstack([Kq, np.zeros((6, n))])
        Db = np.vstack([Dq - P["C"], -P["sigma"] - extra])
        A = ode.Mbar - dt * Db - dt * dt * Kb
        cond = float(np.linalg.cond(A))
        cond_max = max(cond_max, cond)
        if not np.isfinite(cond) or cond > 1e14:
            raise SingularMatrixError("step matrix is singular", condition=cond, time=t)
        dqd = np.linalg.solve(A, dt * (f + dt * Kb @ qd))
        acc = float(np.linalg.norm(dqd)) / dt
        if not np.isfinite(acc) or acc > blowup:
            raise ConvergenceError("integration blew up", time=t, acceleration=acc)
        qd = qd + dqd
        q = q + dt * qd
        energy.append(total_energy(rod, q, qd, Ln, q0))
        drift = max(drift, float(np.linalg.norm(boundary_residual(rod, q, qd, Ln, q0) / scale)))
        if (k + 1) % sample_every == 0 or k + 1 == n_steps:
            ts.append(t + dt)
            qs.append(q.copy())
            qds.append(qd.copy())
            tips.append(end_effector(rod, q))
    return Trajectory(
        np.array(ts), np.array(qs), np.array(qds), np.array(tips),
        np.array(energy), dt * np.arange(n_steps + 1), drift, cond_max,
    )
