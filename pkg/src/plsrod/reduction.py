"""Strain-mode selection and the reduced beam models.

A selection splits each node strain into allowed slots (unknowns) and
constrained slots (held at their rest values). The reaction wrench that
enforces the constraints only enters the reduced equations through the tip,
because the interpolation matrix never maps a constrained slot onto an
allowed one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .actuation import Loads
from .dynamics import AssembledOde, assemble, tip_actuation
from .errors import DomainError
from .kinematics import interpolation_matrix, run_sweep
from .rod import Rod

# allowed strain rows (0-based, angular-first)
NAMED_MODES = {
    "full": (0, 1, 2, 3, 4, 5),
    "euler_bernoulli": (1, 2),
    "extensible_kirchhoff": (0, 1, 2, 3),
    "timoshenko": (1, 2, 4, 5),
}


@dataclass(frozen=True)
class ModeSelection:
    allowed: tuple
    name: str = "custom"

    def __post_init__(self):
        a = tuple(sorted(set(int(i) for i in self.allowed)))
        if not a:
            raise DomainError("a mode selection needs at least one allowed strain")
        if a[0] < 0 or a[-1] > 5:
            raise DomainError("strain rows are numbered 0..5")
        object.__setattr__(self, "allowed", a)

    @property
    def constrained(self):
        return tuple(i for i in range(6) if i not in self.allowed)

    @property
    def n_allowed(self):
        return len(self.allowed)

    @property
    def Ba(self):
        return np.eye(6)[:, list(self.allowed)]

    @property
    def Bc(self):
        return np.eye(6)[:, list(self.constrained)]

    def stacked(self, blocks):
        """``I_blocks kron B_a``."""
        return np.kron(np.eye(blocks), self.Ba)


def make_selection(mode) -> ModeSelection:
    """Named mode, a 6-character 0/1 mask, or an iterable of allowed rows."""
    if isinstance(mode, ModeSelection):
        return mode
    if isinstance(mode, str):
        if mode in NAMED_MODES:
            return ModeSelection(NAMED_MODES[mode], mode)
        if len(mode) == 6 and set(mode) <= {"0", "1"}:
            rows = tuple(i for i, c in enumerate(mode) if c == "1")
            return ModeSelection(rows, mode)
        raise DomainError(f"unknown mode {mode!r}")
    return ModeSelection(tuple(mode))


def lift(selection: ModeSelection, qbar, q0):
    """Full joint vector with constrained slots taken from ``q0``."""
    q = np.array(q0, dtype=float)
    blocks = q.size // 6
    qbar = np.asarray(qbar, dtype=float)
    if qbar.size != blocks * selection.n_allowed:
        raise DomainError("reduced vector has the wrong length")
    q.reshape(blocks, 6)[:, list(selection.allowed)] = qbar.reshape(blocks, -1)
    return q


def lift_rate(selection: ModeSelection, qbar_dot, blocks):
    return lift(selection, qbar_dot, np.zeros(6 * blocks))


def reduce(selection: ModeSelection, q):
    q = np.asarray(q, dtype=float)
    return q.reshape(-1, 6)[:, list(selection.allowed)].ravel()


def theorem_identity(rod: Rod, selection: ModeSelection, X):
    """``(I kron B_a)^T Phi(X)^T B_c``; zero for every selection."""
    phi = interpolation_matrix(rod, X)
    return selection.stacked(rod.n_nodes).T @ phi.T @ selection.Bc


def constrained_wrench_profile(rod: Rod, selection: ModeSelection, q, loads: Loads):
    """Tip reaction ``lambda(L) = B_c^T (F_tip - Lambda(L) T)``."""
    w = loads.tip.copy()
    if loads.has_cables:
        w = w - tip_actuation(rod, loads.layout, q) @ loads.tensions
    return selection.Bc.T @ w


def reduced_residual(rod: Rod, selection: ModeSelection, qbar, loads: Loads, q0=None):
    from .statics import pls_residual

    q0 = rod.rest_state() if q0 is None else q0
    q = lift(selection, qbar, q0)
    sw = run_sweep(rod, q)
    r = pls_residual(rod, q, loads, q0, sw)
    N = rod.n_sections
    top, bot = r[: 6 * N], r[6 * N :]
    BaN = selection.stacked(N)
    lam = constrained_wrench_profile(rod, selection, q, loads)
    f_lam = (sw.J_tip.T @ (selection.Bc @ lam))[: 6 * N]
    return np.concatenate([BaN.T @ (top - f_lam), selection.Ba.T @ bot])


def reduced_dynamics(rod: Rod, selection: ModeSelection, qbar, qbar_dot, loads: Loads, q0=None):
    """Reduced stacked system in the allowed coordinates."""
    q0 = rod.rest_state() if q0 is None else q0
    q = lift(selection, qbar, q0)
    qd = lift_rate(selection, qbar_dot, rod.n_nodes)
    full = assemble(rod, q, qd, loads, q0)
    N = rod.n_sections
    Ba_all = selection.stacked(rod.n_nodes)
    BaN = selection.stacked(N)
    Ba = selection.Ba
    P = full.parts
    J_tip = P["sweep"].J_tip
    proj = (J_tip.T @ selection.Bc @ selection.Bc.T)[: 6 * N]  # 6N x 6
    top_rows = lambda A: BaN.T @ A
    Mbar = np.vstack([top_rows(P["M"]) @ Ba_all, Ba.T @ P["gamma"] @ Ba_all])
    Cbar = np.vstack([top_rows(P["C"]) @ Ba_all, Ba.T @ P["sigma"] @ Ba_all])
    Kbar = np.concatenate([top_rows(P["Fe"] + P["Fi"] + proj @ loads.tip), np.zeros(selection.n_allowed)])
    nc = P["H"].shape[1]
    Htop = top_rows(P["H"] - proj @ P["lambda_tip"]) if nc else np.zeros((BaN.shape[1], 0))
    Hbar = np.vstack([Htop, np.zeros((selection.n_allowed, nc))])
    Hdot = np.vstack([np.zeros((BaN.shape[1], nc)), -Ba.T @ P["lambda_tip"]])
    return AssembledOde(Mbar, Cbar, Kbar, Hbar, Hdot, parts={"full": full})
