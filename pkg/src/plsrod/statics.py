"""Static equilibrium of the rod under gravity, tip loads and cables."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .actuation import Loads, actuation_matrix
from .dynamics import _rows, internal_density, load_density, project, tip_actuation
from .errors import ConvergenceError, PlsRodError
from .kinematics import node_strains, run_sweep
from .rod import STRAIGHT, Rod


@dataclass
class StaticProblem:
    rod: Rod
    loads: Loads = field(default_factory=Loads)
    selection: object = None  # reduction.ModeSelection or None for all modes
    model: str = "pls"  # or "pcs"
    q_init: np.ndarray | None = None
    q0: np.ndarray | None = None
    tol: float = 1e-8
    step_tol: float = 1e-13
    max_iter: int = 50
    max_rotation: float = 5.0  # cap on a Newton step, rad over the rod length
    max_stretch: float = 0.1  # cap on a Newton step in the linear strains
    min_increment: float = 1.0 / 128  # continuation gives up below this load increment

    def __post_init__(self):
        if self.tol <= 0 or self.step_tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive and max_iter >= 1")
        if self.max_rotation <= 0 or self.max_stretch <= 0:
            raise ValueError("step caps must be positive")
        if not 0 < self.min_increment <= 1:
            raise ValueError("min_increment must lie in (0, 1]")
        if self.model not in ("pls", "pcs"):
            raise ValueError("model must be 'pls' or 'pcs'")
        if self.model == "pcs" and self.selection is not None:
            raise ValueError("mode selection applies to the linear strain model only")

    def rest(self):
        if self.q0 is not None:
            return np.asarray(self.q0, dtype=float)
        if self.model == "pcs":
            return np.tile(STRAIGHT, self.rod.n_sections)
        return self.rod.rest_state()

    def with_loads(self, loads):
        import dataclasses

        return dataclasses.replace(self, loads=loads)


@dataclass
class StaticSolution:
    q: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    coords: np.ndarray | None = None  # reduced coordinates when a selection is used
    seconds: float = 0.0


def pls_residual(rod: Rod, q, loads: Loads, q0=None, sw=None):
    """Full static residual: projected wrench balance and tip condition."""
    q = np.asarray(q, dtype=float)
    q0 = rod.rest_state() if q0 is None else q0
    if sw is None:
        sw = run_sweep(rod, q)
    dens = internal_density(rod, q, None, q0) + load_density(rod, sw, q, loads)
    top = -project(rod, sw, dens)[_rows(rod)]
    e = node_strains(q)[-1] - node_strains(q0)[-1]
    bot = rod.stiffness_tip * e - loads.tip
    if loads.has_cables:
        bot = bot + tip_actuation(rod, loads.layout, q) @ loads.tensions
    return np.concatenate([top, bot])


def pcs_residual(rod: Rod, q, loads: Loads, q0=None):
    """Weak-form residual of the constant strain baseline, one block per section.

    For section ``n``: ``int_n (Sigma (xi_n - xi0) + Lambda T) dX
    - int J_n^T F_e dX - J_n(L)^T F_tip``.
    """
    q = np.asarray(q, dtype=float)
    N = rod.n_sections
    q0 = np.tile(STRAIGHT, N) if q0 is None else q0
    sw = run_sweep(rod, q, model="pcs")
    g = rod.grid
    xi = node_strains(q)[g.sec][:, None, :] * np.ones_like(g.xq)[..., None]
    e = xi - node_strains(q0)[g.sec][:, None, :]
    F = rod.stiffness_q * e
    if loads.has_cables:
        lam = actuation_matrix(loads.layout, xi, g.xq)
        F = F + lam @ loads.tensions
    inner = np.zeros(6 * N)
    wF = g.wx[..., None] * F
    for n in range(N):
        inner[6 * n : 6 * n + 6] = wF[g.sec == n].sum(axis=(0, 1))
    from .actuation import gravity_wrench

    fe = gravity_wrench(rod.mass_q, sw.g_q, loads.gravity, rod.base_pose)
    ext = project(rod, sw, fe) + sw.J_tip.T @ loads.tip
    return inner - ext


def residual_scale(rod: Rod, blocks: int):
    """Row scale: ``EJ_y(0)/L`` for moment rows, ``EA(0)`` for force rows."""
    return np.tile(_base_stiffness(rod), blocks)


def _base_stiffness(rod):
    from .rod import stiffness_diag

    k = stiffness_diag(rod.material, rod.profile, 0.0)
    ej, ea = k[1], k[3]
    return np.array([ej / rod.length] * 3 + [ea] * 3)


def fd_jacobian(fun, x, f0=None, rel=1e-6):
    """Central-difference Jacobian with step ``rel * max(1, |x_i|)``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        h = rel * max(1.0, abs(x[i]))
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        cols.append((fun(xp) - fun(xm)) / (2.0 * h))
    return np.stack(cols, axis=1)


def _trial(fun, x, scale):
    try:
        ft = fun(x) / scale
        nt = float(np.linalg.norm(ft))
    except (FloatingPointError, ValueError, ArithmeticError, PlsRodError):
        return None, np.inf
    return ft, (nt if np.isfinite(nt) else np.inf)


def newton(fun, x0, scale, tol=1e-8, step_tol=1e-13, max_iter=50, jac=None, max_step=None):
    """Damped Newton on ``fun(x) / scale`` with a Levenberg-Marquardt fallback.

    A full step is shrunk uniformly so no coordinate exceeds ``max_step``,
    then halved until the residual norm drops. When that yields less than a
    small fraction of the predicted decrease (typical near a fold, where the
    Newton direction is huge and nearly singular), Marquardt-scaled steps on
    the same Jacobian are tried instead.
    Returns ``(x, norm, iterations, converged, history, last_jacobian)``.
    """
    x = np.array(x0, dtype=float)
    f = fun(x) / scale
    nrm = float(np.linalg.norm(f))
    history = [nrm]
    A = None
    mu = None
    for it in range(1, max_iter + 1):
        if nrm <= tol:
            return x, nrm, it - 1, True, history, A
        A = (jac(x) if jac is not None else fd_jacobian(fun, x)) / scale[:, None]
        try:
            dx = np.linalg.solve(A, -f)
        except np.linalg.LinAlgError:
            dx = None
        xt, ft, nt, lam = x, None, np.inf, 1.0
        if dx is not None and np.all(np.isfinite(dx)):
            if max_step is not None:
                ratio = float(np.max(np.abs(dx) / max_step))
                if ratio > 1.0:
                    lam = 1.0 / ratio
            while lam >= 1e-4:
                ft, nt = _trial(fun, x + lam * dx, scale)
                if nt < nrm:
                    break
                lam *= 0.5
            xt = x + lam * dx
        if not nt <= (1.0 - 0.1 * min(lam, 1.0)) * nrm:
            H = A.T @ A
            g = A.T @ f
            d = np.maximum(np.diag(H), 1e-12 * max(1.0, float(np.max(np.diag(H)))))
            mu = 1e-3 if mu is None else mu
            for _ in range(16):
                step = np.linalg.solve(H + mu * np.diag(d), -g)
                if max_step is not None:
                    ratio = float(np.max(np.abs(step) / max_step))
                    if ratio > 1.0:
                        step = step / ratio
                fl, nl = _trial(fun, x + step, scale)
                if nl < min(nt, nrm):
                    xt, ft, nt, dx, lam = x + step, fl, nl, step, 1.0
                    mu = max(mu / 3.0, 1e-9)
                    break
                mu *= 4.0
        if not nt < nrm:
            break  # no descent, typically at or near a fold of the equilibrium path
        step = lam * float(np.linalg.norm(dx))
        x, f, nrm = xt, ft, nt
        history.append(nrm)
        if nrm <= tol:
            return x, nrm, it, True, history, A
        if step <= step_tol * max(1.0, float(np.linalg.norm(x))):
            break
    return x, nrm, len(history) - 1, nrm <= tol, history, A


def step_caps(problem: StaticProblem):
    """Per-coordinate Newton step caps in the problem's own coordinates."""
    caps = np.array([problem.max_rotation / problem.rod.length] * 3 + [problem.max_stretch] * 3)
    if problem.model == "pcs":
        return np.tile(caps, problem.rod.n_sections)
    if problem.selection is None:
        return np.tile(caps, problem.rod.n_nodes)
    return np.tile(caps[list(problem.selection.allowed)], problem.rod.n_nodes)


def _problem_functions(problem: StaticProblem, loads: Loads):
    rod = problem.rod
    q0 = problem.rest()
    if problem.model == "pcs":
        fun = lambda q: pcs_residual(rod, q, loads, q0)
        return fun, (lambda x: x), (lambda q: q), residual_scale(rod, rod.n_sections)
    if problem.selection is None:
        fun = lambda q: pls_residual(rod, q, loads, q0)
        return fun, (lambda x: x), (lambda q: q), residual_scale(rod, rod.n_nodes)
    from .reduction import lift, reduce, reduced_residual

    sel = problem.selection
    fun = lambda x: reduced_residual(rod, sel, x, loads, q0)
    scale = np.tile(_base_stiffness(rod)[list(sel.allowed)], rod.n_nodes)
    return fun, (lambda x: lift(sel, x, q0)), (lambda q: reduce(sel, q)), scale


def static_residual(problem: StaticProblem, q):
    """Residual in the problem's own coordinates (full, reduced or PCS)."""
    fun, _, _, _ = _problem_functions(problem, problem.loads)
    return fun(q)


def solve_static(problem: StaticProblem, raise_on_failure=True) -> StaticSolution:
    """Newton from the initial guess, then adaptive load continuation.

    When the direct attempt fails, the load factor is advanced from zero
    with warm-started solves; the increment grows after a success and is
    halved after a failure.
    """
    t0 = time.perf_counter()
    fun, to_full, to_coords, scale = _problem_functions(problem, problem.loads)
    x0 = to_coords(problem.rest() if problem.q_init is None else np.asarray(problem.q_init, float))
    kw = dict(tol=problem.tol, step_tol=problem.step_tol, max_step=step_caps(problem))
    direct = min(problem.max_iter, 10)
    try:
        x, nrm, it, ok, hist, _ = newton(fun, x0, scale, max_iter=direct, **kw)
    except PlsRodError:
        x, nrm, it, ok, hist = x0, np.inf, 0, False, []
    if not ok:
        it_total, hist_total = it, list(hist)
        x = to_coords(problem.rest())
        s, ds = 0.0, 0.25
        while s < 1.0 and ds >= problem.min_increment:
            target = min(1.0, s + ds)
            f_s, _, _, _ = _problem_functions(problem, problem.loads.scaled(target))
            try:
                xt, nrm, it, ok_s, hist, _ = newton(f_s, x, scale, max_iter=direct, **kw)
            except PlsRodError:
                xt, it, ok_s, hist = x, 0, False, []
            it_total += it
            hist_total += hist
            if ok_s:
                x, s, ds = xt, target, ds * 1.5
            else:
                ds *= 0.5
        ok = s >= 1.0
        it, hist = it_total, hist_total
    sol = StaticSolution(to_full(x), nrm, it, ok, hist, x, time.perf_counter() - t0)
    if not ok and raise_on_failure:
        raise ConvergenceError("static solve did not converge", history=hist, residual=nrm)
    return sol


def end_effector(rod: Rod, q, model="pls"):
    from .kinematics import end_effector as _ee

    return _ee(rod, q, model)


def load_sweep(problem: StaticProblem, schedule, raise_on_failure=False):
    """Warm-started solves over a monotone tip-force schedule.

    ``schedule`` holds scalar axial forces or 6-vector tip wrenches; a failed
    step halts the sweep and the partial list is returned.
    """
    out = []
    guess = problem.q_init
    for item in schedule:
        p = problem.with_loads(problem.loads.with_tip(item))
        p.q_init = guess
        sol = solve_static(p, raise_on_failure=raise_on_failure)
        out.append(sol)
        if not sol.converged:
            break
        guess = sol.q
    return out
