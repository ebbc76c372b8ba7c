"""Pure-Python twins of the compiled kernels in ``_ckernels.pyx``.

Used when the extension is not built, or when ``DIRAC_SOLITON_PURE_PYTHON``
is set.  Scalar arithmetic goes through :mod:`math` so that the operation
order matches the C loops.
"""

import math

import numpy as np

UNDECIDED = 0
OVERSHOOT = 1
UNDERSHOOT = -1

NEAR_ORIGIN = 64.0


def _n_sub(r, width, substeps):
    m = int(math.ceil(NEAR_ORIGIN * width / r))
    return m if m > substeps else substeps


def nls_trajectory(r, q_start, p_start, theta, substeps, stop_on_event):
    """Integrate Q'' + 2Q'/r = Q - |Q|^{2 theta} Q across the nodes ``r``."""
    r = [float(x) for x in r]
    n = len(r)
    q_out = np.full(n, np.nan)
    p_out = np.full(n, np.nan)
    two_theta = 2.0 * theta
    q, p, q0 = float(q_start), float(p_start), float(q_start)
    status = UNDECIDED
    last = 0
    fabs, pw = math.fabs, math.pow

    def rhs(rr, q, p):
        return p, q - pw(fabs(q), two_theta) * q - 2.0 * p / rr

    q_out[0] = q
    p_out[0] = p
    for j in range(n - 1):
        m = _n_sub(r[j], r[j + 1] - r[j], substeps)
        hs = (r[j + 1] - r[j]) / m
        rr = r[j]
        for _ in range(m):
            k1q, k1p = rhs(rr, q, p)
            k2q, k2p = rhs(rr + 0.5 * hs, q + 0.5 * hs * k1q, p + 0.5 * hs * k1p)
            k3q, k3p = rhs(rr + 0.5 * hs, q + 0.5 * hs * k2q, p + 0.5 * hs * k2p)
            k4q, k4p = rhs(rr + hs, q + hs * k3q, p + hs * k3p)
            q += hs * (k1q + 2.0 * k2q + 2.0 * k3q + k4q) / 6.0
            p += hs * (k1p + 2.0 * k2p + 2.0 * k3p + k4p) / 6.0
            rr += hs
        q_out[j + 1] = q
        p_out[j + 1] = p
        last = j + 1
        if status == UNDECIDED:
            if q < 0.0:
                status = OVERSHOOT
            elif p > 0.0 or fabs(q) > 10.0 * fabs(q0) or not math.isfinite(q):
                status = UNDERSHOOT
            if status != UNDECIDED and stop_on_event:
                break
    return q_out, p_out, status, last


def dirac_trajectory(r, f_start, g_start, theta, eps, substeps, stop_on_event):
    """Integrate the radial Dirac pair (m = 1/2, omega = 1/2 - eps)."""
    r = [float(x) for x in r]
    n = len(r)
    f_out = np.full(n, np.nan)
    g_out = np.full(n, np.nan)
    f, g, g0 = float(f_start), float(g_start), float(g_start)
    status = UNDECIDED
    last = 0
    fabs, pw = math.fabs, math.pow

    def rhs(rr, f, g):
        s = pw(fabs(g * g - f * f), theta)
        return -2.0 * f / rr + (s - eps) * g, (s - (1.0 - eps)) * f

    f_out[0] = f
    g_out[0] = g
    for j in range(n - 1):
        m = _n_sub(r[j], r[j + 1] - r[j], substeps)
        hs = (r[j + 1] - r[j]) / m
        rr = r[j]
        for _ in range(m):
            k1f, k1g = rhs(rr, f, g)
            k2f, k2g = rhs(rr + 0.5 * hs, f + 0.5 * hs * k1f, g + 0.5 * hs * k1g)
            k3f, k3g = rhs(rr + 0.5 * hs, f + 0.5 * hs * k2f, g + 0.5 * hs * k2g)
            k4f, k4g = rhs(rr + hs, f + hs * k3f, g + hs * k3g)
            f += hs * (k1f + 2.0 * k2f + 2.0 * k3f + k4f) / 6.0
            g += hs * (k1g + 2.0 * k2g + 2.0 * k3g + k4g) / 6.0
            rr += hs
        f_out[j + 1] = f
        g_out[j + 1] = g
        last = j + 1
        if status == UNDECIDED:
            slope = (pw(fabs(g * g - f * f), theta) - (1.0 - eps)) * f
            if g < 0.0:
                status = OVERSHOOT
            # g may rise near the origin while f > 0 when g0^(2 theta) > 1 - eps;
            # only a rise after f changes sign marks an undershoot
            elif (slope > 0.0 and f < 0.0) or fabs(g) > 10.0 * fabs(g0) or not math.isfinite(g):
                status = UNDERSHOOT
            if status != UNDECIDED and stop_on_event:
                break
    return f_out, g_out, status, last


def exp_sweeps(r, s, ds, t, dt):
    """Forward/backward exponentially weighted running integrals.

    See the compiled version for the definition of ``F`` and ``B``.
    """
    r, s, ds, t, dt = (np.asarray(a, dtype=float).tolist() for a in (r, s, ds, t, dt))
    n = len(r)
    F = [0.0] * n
    B = [0.0] * n
    for j in range(n - 1):
        h = r[j + 1] - r[j]
        w = math.exp(-h)
        ua = w * s[j]
        dua = w * (s[j] + ds[j])
        ub = s[j + 1]
        dub = s[j + 1] + ds[j + 1]
        F[j + 1] = w * F[j] + 0.5 * h * (ua + ub) - h * h / 12.0 * (dub - dua)
    for j in range(n - 2, -1, -1):
        h = r[j + 1] - r[j]
        w = math.exp(-h)
        ua = t[j]
        dua = dt[j] - t[j]
        ub = w * t[j + 1]
        dub = w * (dt[j + 1] - t[j + 1])
        B[j] = w * B[j + 1] + 0.5 * h * (ua + ub) - h * h / 12.0 * (dub - dua)
    return np.array(F), np.array(B)
