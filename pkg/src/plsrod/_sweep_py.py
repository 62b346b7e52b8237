"""Pure numpy implementation of the base-to-tip kinematic sweep.

The compiled extension ``_sweep`` provides the same ``sweep`` function; this
module is the reference and the fallback when the extension is missing.
"""

from __future__ import annotations

import numpy as np

from .se3 import ad, adjoint, adjoint_inv, exp_pose, tangent_op


def weight_matrix(alpha, col0, col1, ncols):
    """Per-segment ``(S, 6, 6 * ncols)`` map from node rates to the frozen rate."""
    S = len(alpha)
    w = np.zeros((S, 6, 6 * ncols))
    rows = np.arange(S)
    for k in range(6):
        w[rows, k, 6 * col0 + k] += alpha
        w[rows, k, 6 * col1 + k] += 1.0 - alpha
    return w


def segment_eval(theta, s, g0, J0, W, theta_dot=None, eta0=None, Jd0=None, nested=None):
    """Evaluate pose, Jacobian and optionally rates inside segments.

    ``theta``, ``g0``, ``J0`` and ``W`` carry a leading segment axis ``S``;
    ``s`` is ``(S, P)`` local arc lengths. Rates need ``theta_dot``, ``eta0``,
    ``Jd0`` and the nested rule ``(t, w)`` on ``[0, 1]``.
    """
    th = theta[:, None, :]
    E = exp_pose(th, s)
    Ai = adjoint_inv(E)
    T = tangent_op(th, s)
    out = {
        "g": g0[:, None] @ E,
        "J": Ai @ J0[:, None] + T @ W[:, None],
    }
    if theta_dot is None:
        return out
    td = theta_dot[:, None, :, None]
    out["eta"] = (Ai @ eta0[:, None, :, None] + T @ td)[..., 0]
    nt, nw = nested
    tau = s[..., None] * nt  # (S, P, M)
    thm = theta[:, None, None, :]
    Ei = adjoint_inv(exp_pose(thm, tau))
    Ti = tangent_op(thm, tau)
    eta_tau = (Ei @ eta0[:, None, None, :, None] + Ti @ theta_dot[:, None, None, :, None])[..., 0]
    back = adjoint_inv(exp_pose(thm, s[..., None] - tau))
    AD = np.einsum("spm,spmij->spij", s[..., None] * nw, back @ ad(eta_tau))
    out["AD"] = AD
    out["Jd"] = Ai @ Jd0[:, None] + AD @ W[:, None]
    return out


def sweep(theta, dx, alpha, col0, col1, ncols, tq, theta_dot=None, eta0=None, nested=None):
    theta = np.asarray(theta, dtype=float)
    dx = np.asarray(dx, dtype=float)
    S = len(dx)
    W = weight_matrix(alpha, col0, col1, ncols)
    rates = theta_dot is not None
    if rates:
        theta_dot = np.asarray(theta_dot, dtype=float)
        eta0 = np.zeros(6) if eta0 is None else np.asarray(eta0, dtype=float)

    # segment-end transfer
    th = theta[:, None, :]
    send = dx[:, None]
    E = exp_pose(th, send)[:, 0]
    T = tangent_op(th, send)[:, 0]

    g = np.empty((S + 1, 4, 4))
    g[0] = np.eye(4)
    for j in range(S):
        g[j + 1] = g[j] @ E[j]
    Ad = adjoint(g)
    Adi = adjoint_inv(g)

    # spatial-frame increments telescope into cumulative sums
    inc = Ad[1:] @ T @ W
    Js = np.concatenate([np.zeros((1, 6, 6 * ncols)), np.cumsum(inc, axis=0)])
    J = Adi @ Js
    res = {"g_nodes": g, "J_nodes": J}

    if rates:
        inc = (Ad[1:] @ T @ theta_dot[..., None])[..., 0]
        es = np.concatenate([eta0[None], eta0 + np.cumsum(inc, axis=0)])
        eta = (Adi @ es[..., None])[..., 0]
        last = segment_eval(
            theta, send, g[:-1], J[:-1], W, theta_dot, eta[:-1], np.zeros((S, 6, 6 * ncols)), nested
        )
        inc = Ad[1:] @ last["AD"][:, 0] @ W
        Jds = np.concatenate([np.zeros((1, 6, 6 * ncols)), np.cumsum(inc, axis=0)])
        Jd = Adi @ Jds
        res["eta_nodes"] = eta
        res["Jd_nodes"] = Jd

    if len(tq):
        s = dx[:, None] * np.asarray(tq)[None, :]
        if rates:
            q = segment_eval(theta, s, g[:-1], J[:-1], W, theta_dot, eta[:-1], Jd[:-1], nested)
            res["eta_q"] = q["eta"]
            res["Jd_q"] = q["Jd"]
        else:
            q = segment_eval(theta, s, g[:-1], J[:-1], W)
        res["g_q"] = q["g"]
        res["J_q"] = q["J"]
    return res
