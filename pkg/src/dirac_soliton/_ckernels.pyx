# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: RK4 shooting trajectories and exponential sweeps.

Every function here has a line-for-line twin in ``_pykernels.py``; the two
must return identical results up to floating-point reassociation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, exp, isfinite, ceil

cnp.import_array()

# trajectory classification codes
cdef enum:
    UNDECIDED = 0
    OVERSHOOT = 1
    UNDERSHOOT = -1

# near the origin the 2/r coefficient is stiff relative to the cell width;
# each cell gets at least NEAR_ORIGIN * width / r substeps
cdef double NEAR_ORIGIN = 64.0


cdef inline int _n_sub(double r, double width, int substeps) nogil:
    cdef int m = <int>ceil(NEAR_ORIGIN * width / r)
    return m if m > substeps else substeps


cdef inline void _nls_rhs(double r, double q, double p, double two_theta,
                          double *dq, double *dp) nogil:
    dq[0] = p
    dp[0] = q - pow(fabs(q), two_theta) * q - 2.0 * p / r


def nls_trajectory(const double[::1] r, double q_start, double p_start,
                   double theta, int substeps, bint stop_on_event):
    """Integrate Q'' + 2Q'/r = Q - |Q|^{2 theta} Q across the nodes ``r``."""
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] q_out = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] p_out = np.full(n, np.nan)
    cdef double[::1] qv = q_out
    cdef double[::1] pv = p_out
    cdef double two_theta = 2.0 * theta
    cdef double q = q_start, p = p_start, q0 = q_start
    cdef double rr, hs, k1q, k1p, k2q, k2p, k3q, k3p, k4q, k4p
    cdef Py_ssize_t j, s
    cdef int m
    cdef int status = UNDECIDED
    cdef Py_ssize_t last = 0

    qv[0] = q
    pv[0] = p
    for j in range(n - 1):
        m = _n_sub(r[j], r[j + 1] - r[j], substeps)
        hs = (r[j + 1] - r[j]) / m
        rr = r[j]
        for s in range(m):
            _nls_rhs(rr, q, p, two_theta, &k1q, &k1p)
            _nls_rhs(rr + 0.5 * hs, q + 0.5 * hs * k1q, p + 0.5 * hs * k1p,
                     two_theta, &k2q, &k2p)
            _nls_rhs(rr + 0.5 * hs, q + 0.5 * hs * k2q, p + 0.5 * hs * k2p,
                     two_theta, &k3q, &k3p)
            _nls_rhs(rr + hs, q + hs * k3q, p + hs * k3p, two_theta,
                     &k4q, &k4p)
            q += hs * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
            p += hs * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
            rr += hs
        qv[j + 1] = q
        pv[j + 1] = p
        last = j + 1
        if status == UNDECIDED:
            if q < 0.0:
                status = OVERSHOOT
            elif p > 0.0 or fabs(q) > 10.0 * fabs(q0) or not isfinite(q):
                status = UNDERSHOOT
            if status != UNDECIDED and stop_on_event:
                break
    return q_out, p_out, status, last


cdef inline void _dirac_rhs(double r, double f, double g, double theta,
                            double eps, double *df, double *dg) nogil:
    cdef double s = pow(fabs(g * g - f * f), theta)
    df[0] = -2.0 * f / r + (s - eps) * g
    dg[0] = (s - (1.0 - eps)) * f


def dirac_trajectory(const double[::1] r, double f_start, double g_start,
                     double theta, double eps, int substeps,
                     bint stop_on_event):
    """Integrate the radial Dirac pair (m = 1/2, omega = 1/2 - eps)."""
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] f_out = np.full(n, np.nan)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_out = np.full(n, np.nan)
    cdef double[::1] fv = f_out
    cdef double[::1] gv = g_out
    cdef double f = f_start, g = g_start, g0 = g_start
    cdef double rr, hs, k1f, k1g, k2f, k2g, k3f, k3g, k4f, k4g, slope
    cdef Py_ssize_t j, s
    cdef int m
    cdef int status = UNDECIDED
    cdef Py_ssize_t last = 0

    fv[0] = f
    gv[0] = g
    for j in range(n - 1):
        m = _n_sub(r[j], r[j + 1] - r[j], substeps)
        hs = (r[j + 1] - r[j]) / m
        rr = r[j]
        for s in range(m):
            _dirac_rhs(rr, f, g, theta, eps, &k1f, &k1g)
            _dirac_rhs(rr + 0.5 * hs, f + 0.5 * hs * k1f, g + 0.5 * hs * k1g,
                       theta, eps, &k2f, &k2g)
            _dirac_rhs(rr + 0.5 * hs, f + 0.5 * hs * k2f, g + 0.5 * hs * k2g,
                       theta, eps, &k3f, &k3g)
            _dirac_rhs(rr + hs, f + hs * k3f, g + hs * k3g, theta, eps,
                       &k4f, &k4g)
            f += hs * (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
            g += hs * (k1g + 2.0 * k2g + 2.0 * k3g + k4g) / 6.0
            rr += hs
        fv[j + 1] = f
        gv[j + 1] = g
        last = j + 1
        if status == UNDECIDED:
            slope = (pow(fabs(g * g - f * f), theta) - (1.0 - eps)) * f
            if g < 0.0:
                status = OVERSHOOT
            # g may rise near the origin while f > 0 when g0^(2 theta) > 1 - eps;
            # only a rise after f changes sign marks an undershoot
            elif (slope > 0.0 and f < 0.0) or fabs(g) > 10.0 * fabs(g0) or not isfinite(g):
                status = UNDERSHOOT
            if status != UNDECIDED and stop_on_event:
                break
    return f_out, g_out, status, last


def exp_sweeps(const double[::1] r, const double[::1] s, const double[::1] ds,
               const double[::1] t, const double[::1] dt):
    """Forward/backward exponentially weighted running integrals.

    F[j] = int_{r[0]}^{r[j]} exp(-(r[j] - x)) s(x) dx
    B[j] = int_{r[j]}^{r[-1]} exp(-(x - r[j])) t(x) dx

    Each cell uses the trapezoid rule with the Euler-Maclaurin end
    correction, so derivatives of the integrands are required.
    """
    cdef Py_ssize_t n = r.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] F_out = np.zeros(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] B_out = np.zeros(n)
    cdef double[::1] F = F_out
    cdef double[::1] B = B_out
    cdef double h, w, ua, ub, dua, dub
    cdef Py_ssize_t j

    for j in range(n - 1):
        h = r[j + 1] - r[j]
        w = exp(-h)
        ua = w * s[j]
        dua = w * (s[j] + ds[j])
        ub = s[j + 1]
        dub = s[j + 1] + ds[j + 1]
        F[j + 1] = w * F[j] + 0.5 * h * (ua + ub) - h * h / 12.0 * (dub - dua)
    for j in range(n - 2, -1, -1):
        h = r[j + 1] - r[j]
        w = exp(-h)
        ua = t[j]
        dua = dt[j] - t[j]
        ub = w * t[j + 1]
        dub = w * (dt[j + 1] - t[j + 1])
        B[j] = w * B[j + 1] + 0.5 * h * (ua + ub) - h * h / 12.0 * (dub - dua)
    return F_out, B_out
