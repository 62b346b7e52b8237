# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled base-to-tip kinematic sweep; mirrors ``_sweep_py.sweep``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt

cnp.import_array()

cdef double SERIES = 0.1


cdef inline double poly(double x2, double c0, double c1, double c2, double c3,
                        double c4, double c5) noexcept nogil:
    return c0 + x2 * (c1 + x2 * (c2 + x2 * (c3 + x2 * (c4 + x2 * c5))))


cdef void rot_coeffs(double x, double* a, double* b, double* c) noexcept nogil:
    cdef double x2 = x * x
    if x < SERIES:
        a[0] = poly(x2, 1.0, -1.0 / 6.0, 1.0 / 120.0, -1.0 / 5040.0, 1.0 / 362880.0, -1.0 / 39916800.0)
        b[0] = poly(x2, 0.5, -1.0 / 24.0, 1.0 / 720.0, -1.0 / 40320.0, 1.0 / 3628800.0, -1.0 / 479001600.0)
        c[0] = poly(x2, 1.0 / 6.0, -1.0 / 120.0, 1.0 / 5040.0, -1.0 / 362880.0, 1.0 / 39916800.0,
                    -1.0 / 6227020800.0)
    else:
        a[0] = sin(x) / x
        b[0] = (1.0 - cos(x)) / x2
        c[0] = (x - sin(x)) / (x2 * x)


cdef void tan_coeffs(double x, double* f) noexcept nogil:
    cdef double x2 = x * x
    cdef double sx, cx
    if x < SERIES:
        f[0] = poly(x2, 0.5, 0.0, -1.0 / 720.0, 1.0 / 20160.0, -1.0 / 1209600.0, 1.0 / 119750400.0)
        f[1] = poly(x2, 1.0 / 6.0, 0.0, -1.0 / 5040.0, 1.0 / 181440.0, -1.0 / 13305600.0,
                    1.0 / 1556755200.0)
        f[2] = poly(x2, 1.0 / 24.0, -1.0 / 360.0, 1.0 / 13440.0, -1.0 / 907200.0, 1.0 / 95800320.0,
                    -1.0 / 14529715200.0)
        f[3] = poly(x2, 1.0 / 120.0, -1.0 / 2520.0, 1.0 / 120960.0, -1.0 / 9979200.0,
                    1.0 / 1245404160.0, -1.0 / 217945728000.0)
    else:
        sx = sin(x)
        cx = cos(x)
        f[0] = (4.0 - 4.0 * cx - x * sx) / (2.0 * x2)
        f[1] = (4.0 * x - 5.0 * sx + x * cx) / (2.0 * x2 * x)
        f[2] = (2.0 - 2.0 * cx - x * sx) / (2.0 * x2 * x2)
        f[3] = (2.0 * x - 3.0 * sx + x * cx) / (2.0 * x2 * x2 * x)


cdef inline void skew(const double* a, double* m) noexcept nogil:
    m[0] = 0.0; m[1] = -a[2]; m[2] = a[1]
    m[3] = a[2]; m[4] = 0.0; m[5] = -a[0]
    m[6] = -a[1]; m[7] = a[0]; m[8] = 0.0


cdef void mm3(const double* a, const double* b, double* c) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc = acc + a[3 * i + k] * b[3 * k + j]
            c[3 * i + j] = acc


cdef void mm6(const double* a, const double* b, double* c) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(6):
        for j in range(6):
            acc = 0.0
            for k in range(6):
                acc = acc + a[6 * i + k] * b[6 * k + j]
            c[6 * i + j] = acc


cdef void expmap(const double* v, double s, double* R, double* p) noexcept nogil:
    """Rotation and translation of exp(s hat(v))."""
    cdef double phi[3]
    cdef double rho[3]
    cdef double P[9]
    cdef double P2[9]
    cdef double V[9]
    cdef double a, b, c, x
    cdef int i, j
    for i in range(3):
        phi[i] = s * v[i]
        rho[i] = s * v[3 + i]
    x = sqrt(phi[0] * phi[0] + phi[1] * phi[1] + phi[2] * phi[2])
    rot_coeffs(x, &a, &b, &c)
    skew(phi, P)
    mm3(P, P, P2)
    for i in range(9):
        R[i] = a * P[i] + b * P2[i]
        V[i] = b * P[i] + c * P2[i]
    for i in range(3):
        R[4 * i] += 1.0
        V[4 * i] += 1.0
    for i in range(3):
        p[i] = 0.0
        for j in range(3):
            p[i] += V[3 * i + j] * rho[j]


cdef void adinv(const double* R, const double* p, double* A) noexcept nogil:
    """Ad^{-1} of the pose (R, p) as a row-major 6x6."""
    cdef double P[9]
    cdef double RtP[9]
    cdef double Rt[9]
    cdef int i, j
    skew(p, P)
    for i in range(3):
        for j in range(3):
            Rt[3 * i + j] = R[3 * j + i]
    mm3(Rt, P, RtP)
    for i in range(36):
        A[i] = 0.0
    for i in range(3):
        for j in range(3):
            A[6 * i + j] = Rt[3 * i + j]
            A[6 * (i + 3) + j + 3] = Rt[3 * i + j]
            A[6 * (i + 3) + j] = -RtP[3 * i + j]


cdef void admat(const double* v, double* m) noexcept nogil:
    cdef double K[9]
    cdef double Q[9]
    cdef int i, j
    skew(v, K)
    skew(v + 3, Q)
    for i in range(36):
        m[i] = 0.0
    for i in range(3):
        for j in range(3):
            m[6 * i + j] = K[3 * i + j]
            m[6 * (i + 3) + j + 3] = K[3 * i + j]
            m[6 * (i + 3) + j] = Q[3 * i + j]


cdef void tangent(const double* v, double s, double* T) noexcept nogil:
    cdef double m1[36]
    cdef double m2[36]
    cdef double m3[36]
    cdef double m4[36]
    cdef double f[4]
    cdef double x, c1, c2, c3, c4
    cdef int i
    x = s * sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    tan_coeffs(x, f)
    admat(v, m1)
    mm6(m1, m1, m2)
    mm6(m2, m1, m3)
    mm6(m3, m1, m4)
    c1 = s * s * f[0]
    c2 = s * s * s * f[1]
    c3 = s * s * s * s * f[2]
    c4 = s * s * s * s * s * f[3]
    for i in range(36):
        T[i] = -c1 * m1[i] + c2 * m2[i] - c3 * m3[i] + c4 * m4[i]
    for i in range(6):
        T[7 * i] += s


cdef void mv6(const double* A, const double* x, double* y) noexcept nogil:
    cdef int i, k
    cdef double acc
    for i in range(6):
        acc = 0.0
        for k in range(6):
            acc = acc + A[6 * i + k] * x[k]
        y[i] = acc


cdef void transport(const double* A, const double* J, double* out, int ncol, int used) noexcept nogil:
    """out[:, :used] = A @ J[:, :used] for 6 x ncol row-major blocks; rest zeroed."""
    cdef int i, j, k
    cdef double acc
    for i in range(6):
        for j in range(used):
            acc = 0.0
            for k in range(6):
                acc = acc + A[6 * i + k] * J[ncol * k + j]
            out[ncol * i + j] = acc
        for j in range(used, ncol):
            out[ncol * i + j] = 0.0


cdef void add_weighted(const double* T, double* out, int ncol, int c0, int c1,
                       double w0, double w1) noexcept nogil:
    cdef int i, k
    for i in range(6):
        for k in range(6):
            out[ncol * i + 6 * c0 + k] += w0 * T[6 * i + k]
            out[ncol * i + 6 * c1 + k] += w1 * T[6 * i + k]


cdef void compose(const double* g, const double* R, const double* p, double* out) noexcept nogil:
    """out = g @ [[R, p], [0, 1]] for row-major 4x4 g."""
    cdef int i, j, k
    cdef double acc
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc = acc + g[4 * i + k] * R[3 * k + j]
            out[4 * i + j] = acc
        acc = g[4 * i + 3]
        for k in range(3):
            acc = acc + g[4 * i + k] * p[k]
        out[4 * i + 3] = acc
    out[12] = 0.0; out[13] = 0.0; out[14] = 0.0; out[15] = 1.0


cdef void ad_integral(const double* th, const double* thd, const double* eta0, double s,
                      const double* nt, const double* nw, int M, double* AD) noexcept nogil:
    """Nested quadrature of int_0^s Ad^-1(exp((s - tau) th)) ad(eta(tau)) dtau."""
    cdef double R[9]
    cdef double p[3]
    cdef double Ai[36]
    cdef double T[36]
    cdef double adm[36]
    cdef double prod[36]
    cdef double e1[6]
    cdef double e2[6]
    cdef double tau
    cdef int m, i
    for i in range(36):
        AD[i] = 0.0
    for m in range(M):
        tau = s * nt[m]
        expmap(th, tau, R, p)
        adinv(R, p, Ai)
        tangent(th, tau, T)
        mv6(Ai, eta0, e1)
        mv6(T, thd, e2)
        for i in range(6):
            e1[i] += e2[i]
        admat(e1, adm)
        expmap(th, s - tau, R, p)
        adinv(R, p, Ai)
        mm6(Ai, adm, prod)
        for i in range(36):
            AD[i] += s * nw[m] * prod[i]


def sweep(theta, dx, alpha, col0, col1, int ncols, tq, theta_dot=None, eta0=None,
          nested=None):
    cdef double[:, ::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[::1] dxv = np.ascontiguousarray(dx, dtype=np.float64)
    cdef double[::1] al = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef long[::1] c0 = np.ascontiguousarray(col0, dtype=np.int64)
    cdef long[::1] c1 = np.ascontiguousarray(col1, dtype=np.int64)
    cdef double[::1] tqv = np.ascontiguousarray(tq, dtype=np.float64)
    cdef int S = dxv.shape[0]
    cdef int P = tqv.shape[0]
    cdef int nc = 6 * ncols
    cdef bint rates = theta_dot is not None
    cdef int j, p_, i, used, M = 0

    g_nodes = np.zeros((S + 1, 4, 4))
    J_nodes = np.zeros((S + 1, 6, nc))
    cdef double[:, :, ::1] gn = g_nodes
    cdef double[:, :, ::1] Jn = J_nodes
    g_q = np.zeros((S, P, 4, 4))
    J_q = np.zeros((S, P, 6, nc))
    cdef double[:, :, :, ::1] gq = g_q
    cdef double[:, :, :, ::1] Jq = J_q

    cdef double[:, ::1] thd
    cdef double[:, ::1] en
    cdef double[:, :, ::1] Jdn
    cdef double[:, :, ::1] eq
    cdef double[:, :, :, ::1] Jdq
    cdef double[::1] ntv
    cdef double[::1] nwv
    if rates:
        thd = np.ascontiguousarray(theta_dot, dtype=np.float64)
        eta_nodes = np.zeros((S + 1, 6))
        Jd_nodes = np.zeros((S + 1, 6, nc))
        eta_q = np.zeros((S, P, 6))
        Jd_q = np.zeros((S, P, 6, nc))
        en = eta_nodes
        Jdn = Jd_nodes
        eq = eta_q
        Jdq = Jd_q
        if eta0 is not None:
            e0 = np.asarray(eta0, dtype=np.float64)
            for i in range(6):
                en[0, i] = e0[i]
        ntv = np.ascontiguousarray(nested[0], dtype=np.float64)
        nwv = np.ascontiguousarray(nested[1], dtype=np.float64)
        M = ntv.shape[0]

    cdef double R[9]
    cdef double pv[3]
    cdef double Ai[36]
    cdef double T[36]
    cdef double AD[36]
    cdef double v1[6]
    cdef double v2[6]
    cdef double s, w0, w1

    for i in range(4):
        gn[0, i, i] = 1.0

    with nogil:
        for j in range(S):
            used = 6 * (c1[j] + 1)
            if 6 * (c0[j] + 1) > used:
                used = 6 * (c0[j] + 1)
            w0 = al[j]
            w1 = 1.0 - al[j]
            # quadrature points, then the segment end (p_ == P)
            for p_ in range(P + 1):
                if p_ < P:
                    s = dxv[j] * tqv[p_]
                else:
                    s = dxv[j]
                expmap(&th[j, 0], s, R, pv)
                adinv(R, pv, Ai)
                tangent(&th[j, 0], s, T)
                if p_ < P:
                    compose(&gn[j, 0, 0], R, pv, &gq[j, p_, 0, 0])
                    transport(Ai, &Jn[j, 0, 0], &Jq[j, p_, 0, 0], nc, used)
                    add_weighted(T, &Jq[j, p_, 0, 0], nc, c0[j], c1[j], w0, w1)
                else:
                    compose(&gn[j, 0, 0], R, pv, &gn[j + 1, 0, 0])
                    transport(Ai, &Jn[j, 0, 0], &Jn[j + 1, 0, 0], nc, used)
                    add_weighted(T, &Jn[j + 1, 0, 0], nc, c0[j], c1[j], w0, w1)
                if rates:
                    mv6(Ai, &en[j, 0], v1)
                    mv6(T, &thd[j, 0], v2)
                    ad_integral(&th[j, 0], &thd[j, 0], &en[j, 0], s, &ntv[0], &nwv[0], M, AD)
                    if p_ < P:
                        for i in range(6):
                            eq[j, p_, i] = v1[i] + v2[i]
                        transport(Ai, &Jdn[j, 0, 0], &Jdq[j, p_, 0, 0], nc, used)
                        add_weighted(AD, &Jdq[j, p_, 0, 0], nc, c0[j], c1[j], w0, w1)
                    else:
                        for i in range(6):
                            en[j + 1, i] = v1[i] + v2[i]
                        transport(Ai, &Jdn[j, 0, 0], &Jdn[j + 1, 0, 0], nc, used)
                        add_weighted(AD, &Jdn[j + 1, 0, 0], nc, c0[j], c1[j], w0, w1)

    res = {"g_nodes": g_nodes, "J_nodes": J_nodes}
    if rates:
        res["eta_nodes"] = eta_nodes
        res["Jd_nodes"] = Jd_nodes
    if P:
        res["g_q"] = g_q
        res["J_q"] = J_q
        if rates:
            res["eta_q"] = eta_q
            res["Jd_q"] = Jd_q
    return res
