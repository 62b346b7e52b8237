"""Material identification (E, G, rho) from end-effector measurements.

Each experiment's equilibrium is eliminated by an inner static solve, so the
outer problem only sees ``theta``. Tip sensitivities come from implicit
differentiation of the static residual, ``dq/dtheta = -A^-1 dr/dtheta``,
which costs one Jacobian factorization per experiment instead of extra
static solves.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares, minimize

from .actuation import GRAVITY_DOWN_Z, CableLayout, Loads
from .errors import ConvergenceError, DomainError, PlsRodError
from .kinematics import run_sweep
from .rod import Rod
from .statics import (
    StaticProblem,
    fd_jacobian,
    newton,
    pls_residual,
    residual_scale,
    solve_static,
    step_caps,
)

DEFAULT_BOUNDS = ((1e4, 1e7), (1e3, 5e6), (500.0, 5000.0))
# rows (azimuth, deg) that reproduce the signs in the bundled experiment tables
TABLE_CABLE_ANGLES = (180.0, 270.0, 0.0, 90.0)


@dataclass(frozen=True)
class Experiment:
    tensions: np.ndarray
    tip: np.ndarray  # measured end-effector position, m
    name: str = ""

    def __post_init__(self):
        t = np.asarray(self.tensions, dtype=float)
        u = np.asarray(self.tip, dtype=float)
        if np.any(t < 0):
            raise DomainError("cable tensions must be non-negative", experiment=self.name)
        if u.shape != (3,) or not np.all(np.isfinite(u)):
            raise DomainError("measured tip must be a finite 3-vector", experiment=self.name)
        object.__setattr__(self, "tensions", t)
        object.__setattr__(self, "tip", u)


@dataclass(frozen=True)
class ThetaVector:
    E: float
    G: float
    rho: float

    def __post_init__(self):
        if min(self.E, self.G, self.rho) <= 0:
            raise DomainError("material parameters must be positive")

    @classmethod
    def of(cls, v):
        if isinstance(v, ThetaVector):
            return v
        return cls(*(float(x) for x in v))

    def array(self):
        return np.array([self.E, self.G, self.rho])


def load_experiments(path):
    """Read experiments from CSV.

    Tension columns start with ``T``; position columns are ``x``, ``y``, ``z``
    with an optional ``_cm``/``_mm``/``_m`` suffix declaring the unit.
    """
    units = {"m": 1.0, "cm": 1e-2, "mm": 1e-3}
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header = [h.strip() for h in rows[0]]
    tcols = [i for i, h in enumerate(header) if h.upper().startswith("T")]
    pcols, scale = [], None
    for axis in "xyz":
        for i, h in enumerate(header):
            base, _, unit = h.partition("_")
            if base == axis:
                pcols.append(i)
                s = units.get(unit or "m")
                if s is None:
                    raise DomainError(f"unknown length unit in column {h!r}")
                if scale is not None and s != scale:
                    raise DomainError("position columns use mixed units")
                scale = s
    if len(pcols) != 3 or not tcols:
        raise DomainError("experiment file needs T* columns and x, y, z columns", path=str(path))
    name_col = header.index("name") if "name" in header else None
    for k, r in enumerate(rows[1:]):
        name = r[name_col] if name_col is not None else str(k + 1)
        out.append(
            Experiment(
                [float(r[i]) for i in tcols],
                [float(r[i]) * scale for i in pcols],
                name,
            )
        )
    return out


@dataclass
class IdentificationProblem:
    rod: Rod
    layout: CableLayout
    experiments: list
    gravity: np.ndarray = field(default_factory=lambda: GRAVITY_DOWN_Z.copy())
    tol: float = 1e-10
    # coarser than the solver default: inside a fit a failed solve is only a penalty
    min_increment: float = 1.0 / 32

    def __post_init__(self):
        if not self.experiments:
            raise DomainError("at least one experiment is required")
        for e in self.experiments:
            if e.tensions.shape != (self.layout.n_cables,):
                raise DomainError("tension count does not match the cable layout", experiment=e.name)
        self.reset()

    def reset(self):
        """Forget warm starts and cached Jacobians."""
        self._warm = [None] * len(self.experiments)
        self._jac = [None] * len(self.experiments)

    def loads(self, exp):
        return Loads(self.layout, exp.tensions, self.gravity)

    def rod_at(self, theta):
        return self.rod.with_theta(ThetaVector.of(theta).array())

    def solve(self, theta, i):
        """Equilibrium of experiment ``i``; warm-started from the last success.

        With a Jacobian cached from a nearby theta, a chord iteration is
        tried first; the full Newton solve runs only if it stalls.
        """
        rod = self.rod_at(theta)
        prob = StaticProblem(rod, self.loads(self.experiments[i]), q_init=self._warm[i], tol=self.tol,
                             min_increment=self.min_increment)
        if self._warm[i] is not None and self._jac[i] is not None:
            fun = _residual_fn(self, self.experiments[i], theta)
            scale = residual_scale(rod, rod.n_nodes)
            A = self._jac[i]
            try:
                q, _, _, ok, _, _ = newton(fun, self._warm[i], scale, tol=self.tol, max_iter=12,
                                           jac=lambda x: A, max_step=step_caps(prob))
            except PlsRodError:
                ok = False
            if ok:
                self._warm[i] = q
                return rod, q
        sol = solve_static(prob)
        self._warm[i] = sol.q
        return rod, sol.q

    def tip(self, rod, q):
        sw = run_sweep(rod, q, quadrature=False)
        return (rod.base_pose @ sw.g_tip)[:3, 3], sw


def _residual_fn(problem, exp, theta):
    rod = problem.rod_at(theta)
    loads = problem.loads(exp)
    q0 = rod.rest_state()
    return lambda q: pls_residual(rod, q, loads, q0)


def tip_sensitivity(problem: IdentificationProblem, theta, i, q, rel=1e-6):
    """Implicit ``du_i/dlog(theta)`` for experiment ``i`` at equilibrium ``q``."""
    th = ThetaVector.of(theta).array()
    exp = problem.experiments[i]
    rod = problem.rod_at(th)
    scale = residual_scale(rod, rod.n_nodes)
    A = fd_jacobian(_residual_fn(problem, exp, th), q) / scale[:, None]
    B = np.empty((q.size, 3))
    for k in range(3):
        h = rel
        up, dn = th.copy(), th.copy()
        up[k] *= np.exp(h)
        dn[k] *= np.exp(-h)
        B[:, k] = (_residual_fn(problem, exp, up)(q) - _residual_fn(problem, exp, dn)(q)) / (2 * h)
    problem._jac[i] = A * scale[:, None]
    dq = -np.linalg.solve(A, B / scale[:, None])
    sw = run_sweep(rod, q, quadrature=False)
    R = (rod.base_pose @ sw.g_tip)[:3, :3]
    return R @ sw.J_tip[3:6] @ dq, A


@dataclass
class Evaluation:
    theta: np.ndarray
    tips: np.ndarray  # (n_exp, 3)
    residuals: np.ndarray  # (n_exp, 3), model minus measured
    qs: list
    ok: bool

    @property
    def errors(self):
        return np.linalg.norm(self.residuals, axis=1)

    @property
    def objective(self):
        return float(self.errors.sum()) if self.ok else np.inf


def evaluate(problem: IdentificationProblem, theta, stop_on_failure=False) -> Evaluation:
    """Solve every experiment at ``theta``.

    With ``stop_on_failure`` the remaining experiments are skipped (and carry
    NaN) once one inner solve fails, since the objective is already infinite.
    """
    th = ThetaVector.of(theta).array()
    tips, qs, ok = [], [], True
    for i, exp in enumerate(problem.experiments):
        if not ok and stop_on_failure:
            tips.append(np.full(3, np.nan))
            qs.append(None)
            continue
        try:
            rod, q = problem.solve(th, i)
        except PlsRodError:
            ok = False
            tips.append(np.full(3, np.nan))
            qs.append(None)
            continue
        tips.append(problem.tip(rod, q)[0])
        qs.append(q)
    tips = np.array(tips)
    meas = np.array([e.tip for e in problem.experiments])
    return Evaluation(th, tips, tips - meas, qs, ok)


def objective(problem: IdentificationProblem, theta):
    """Sum of Euclidean tip errors (m); ``inf`` when any inner solve fails."""
    return evaluate(problem, theta).objective


def _sensitivities(problem, ev):
    return np.stack([tip_sensitivity(problem, ev.theta, i, q)[0] for i, q in enumerate(ev.qs)])


def rank_probe(problem: IdentificationProblem, theta, rtol=1e-6):
    """Singular values of the stacked ``du/dlog(theta)`` and a rank flag."""
    ev = evaluate(problem, theta)
    if not ev.ok:
        raise ConvergenceError("inner static solve failed during rank probe")
    S = _sensitivities(problem, ev).reshape(-1, 3)
    sv = np.linalg.svd(S, compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0])) if sv[0] > 0 else 0
    return sv, rank


@dataclass
class IdentificationResult:
    theta: ThetaVector
    objective: float
    objective_init: float
    tips: np.ndarray
    errors: np.ndarray
    qs: list
    singular_values: np.ndarray
    rank: int
    starts: list
    evaluations: int
    seconds: float

    @property
    def rank_deficient(self):
        return self.rank < 3


def _clip_log(x, lo, hi):
    return np.minimum(np.maximum(x, lo), hi)


def identify(
    problem: IdentificationProblem,
    theta_init,
    bounds=DEFAULT_BOUNDS,
    n_starts=1,
    seed=0,
    spread=0.3,
    max_nfev=40,
    polish=True,
    fit_floor=1e-9,
):
    """Fit ``theta`` by a bounded Gauss-Newton trust region in ``log(theta)``.

    Extra starts are drawn log-uniformly within ``spread`` of ``theta_init``
    from a seeded generator. The best start is then polished on the
    sum-of-norms objective itself, unless every tip already fits to within
    ``fit_floor`` (m).
    """
    t0 = time.perf_counter()
    lo = np.log([b[0] for b in bounds])
    hi = np.log([b[1] for b in bounds])
    x_init = np.log(ThetaVector.of(theta_init).array())
    if np.any(x_init < lo) or np.any(x_init > hi):
        raise DomainError("initial theta lies outside the bounds")
    n_eval = [0]
    cache = {}
    problem.reset()

    def ev_at(x):
        key = np.asarray(x, dtype=float).tobytes()
        if key not in cache:
            n_eval[0] += 1
            cache.clear()
            cache[key] = evaluate(problem, np.exp(x), stop_on_failure=True)
        return cache[key]

    def res(x):
        ev = ev_at(x)
        return ev.residuals.ravel() if ev.ok else np.full(3 * len(problem.experiments), 1.0)

    def jac(x):
        return _sensitivities(problem, ev_at(x)).reshape(-1, 3)

    f_init = ev_at(x_init).objective
    x_first = x_init
    if not np.isfinite(f_init):
        # some experiments have no equilibrium here: stiffen E and G together
        # until every inner solve succeeds, then start from that point
        for k in range(1, 9):
            xt = _clip_log(x_init + np.array([k * np.log(1.5)] * 2 + [0.0]), lo, hi)
            if np.isfinite(ev_at(xt).objective):
                x_first = xt
                break
        else:
            raise ConvergenceError("no feasible starting point found by stiffening theta_init")
    rng = np.random.default_rng(seed)
    starts = [x_first] + [
        _clip_log(x_first + rng.uniform(-spread, spread, 3), lo, hi) for _ in range(n_starts - 1)
    ]
    runs = []
    for k, xs in enumerate(starts):
        if k:
            problem.reset()  # each extra start runs from cold equilibria
        try:
            r = least_squares(res, xs, jac=jac, bounds=(lo, hi), method="trf", x_scale=1.0,
                              xtol=1e-10, ftol=1e-12, gtol=1e-12, max_nfev=max_nfev)
        except PlsRodError:
            continue
        runs.append((ev_at(r.x).objective, r.x))
    if not runs:
        raise ConvergenceError("no identification start converged", starts=len(starts))
    best_f, best_x = min(runs, key=lambda p: p[0])
    if polish and best_f > fit_floor * len(problem.experiments):
        def f_and_g(x):
            ev = ev_at(x)
            if not ev.ok:
                return 1e3, np.zeros(3)
            S = _sensitivities(problem, ev)
            e = ev.errors
            w = np.where(e > 0, 1.0 / np.maximum(e, 1e-300), 0.0)
            g = np.einsum("i,ij,ijk->k", w, ev.residuals, S)
            return ev.objective, g

        try:
            p = minimize(f_and_g, best_x, jac=True, method="L-BFGS-B",
                         bounds=list(zip(lo, hi)), options={"maxiter": 30})
            if p.fun < best_f:
                best_f, best_x = float(p.fun), p.x
        except PlsRodError:
            pass
    ev = ev_at(best_x)
    if ev.objective > f_init:  # never report worse than the start
        best_x, ev = x_init, ev_at(x_init)
    S = _sensitivities(problem, ev).reshape(-1, 3)
    sv = np.linalg.svd(S, compute_uv=False)
    rank = int(np.sum(sv > 1e-6 * sv[0])) if sv[0] > 0 else 0
    return IdentificationResult(
        ThetaVector.of(np.exp(best_x)), ev.objective, f_init, ev.tips, ev.errors, ev.qs, sv, rank,
        [np.exp(x) for _, x in runs], n_eval[0], time.perf_counter() - t0,
    )


def validate(problem: IdentificationProblem, theta):
    """Per-experiment tip error ``|u_model - u_measured|`` (m).

    Returns ``(errors, tips, converged)``; experiments whose static solve
    fails are flagged and carry NaN.
    """
    ev = evaluate(problem, theta)
    converged = np.array([q is not None for q in ev.qs])
    return ev.errors, ev.tips, converged


def kkt_check(problem: IdentificationProblem, theta, qs, bounds=DEFAULT_BOUNDS, fit_floor=1e-9):
    """Full-space optimality check for ``(theta, q_1..q_n)``.

    Multipliers are recovered from the q-stationarity rows,
    ``A_i^T lambda_i = -df/dq_i``; what remains is the theta gradient of the
    Lagrangian (projected onto the bounds) and the constraint residuals.
    A tip error below ``fit_floor`` (m) sits on the kink of its norm, where
    the zero subgradient is used.
    """
    th = ThetaVector.of(theta).array()
    grad = np.zeros(3)
    feas, lams = 0.0, []
    for i, (exp, q) in enumerate(zip(problem.experiments, qs)):
        rod = problem.rod_at(th)
        fun = _residual_fn(problem, exp, th)
        scale = residual_scale(rod, rod.n_nodes)
        feas = max(feas, float(np.linalg.norm(fun(q) / scale)))
        A = fd_jacobian(fun, q)
        sw = run_sweep(rod, q, quadrature=False)
        R = (rod.base_pose @ sw.g_tip)[:3, :3]
        du_dq = R @ sw.J_tip[3:6]
        r = (rod.base_pose @ sw.g_tip)[:3, 3] - exp.tip
        e = np.linalg.norm(r)
        df_dq = (r / e) @ du_dq if e > fit_floor else np.zeros(q.size)
        lam = np.linalg.solve(A.T, -df_dq)
        lams.append(lam)
        Bt = np.empty((q.size, 3))
        for k in range(3):
            up, dn = th.copy(), th.copy()
            up[k] *= np.exp(1e-6)
            dn[k] *= np.exp(-1e-6)
            Bt[:, k] = (_residual_fn(problem, exp, up)(q) - _residual_fn(problem, exp, dn)(q)) / 2e-6
        grad += Bt.T @ lam
    x = np.log(th)
    lo = np.log([b[0] for b in bounds])
    hi = np.log([b[1] for b in bounds])
    proj = grad.copy()
    proj[(x <= lo + 1e-12) & (grad > 0)] = 0.0
    proj[(x >= hi - 1e-12) & (grad < 0)] = 0.0
    return {"stationarity": proj, "feasibility": feas, "multipliers": lams}
