# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_kernels_py``.

Every arithmetic expression mirrors the fallback's evaluation order exactly
(left-to-right, no FMA: the extension is compiled with -ffp-contract=off), so
both backends produce bitwise identical results.  Do not reorder operations
here without changing the fallback in lockstep.
"""

import numpy as np

from libc.math cimport copysign, fabs, isnan

BACKEND = "compiled"

OVERFLOW_CLAMP = 1e150

cdef double CLAMP = 1e150
cdef double INVERT_TOL_SCALE = 1e-13
cdef int INVERT_BISECTIONS = 10
cdef int INVERT_NEWTON_MAX = 100


cdef inline const double* _ptr(const double[::1] view) noexcept nogil:
    if view.shape[0] == 0:
        return NULL
    return &view[0]


cdef inline double _piece_eval(const double* breaks, int m, const double* coefs,
                               int width, double x) noexcept nogil:
    cdef int idx = 0
    cdef int i
    while idx < m and x >= breaks[idx]:
        idx += 1
    cdef const double* c = coefs + idx * width
    cdef double r = c[width - 1]
    for i in range(width - 2, -1, -1):
        r = r * x + c[i]
    return r


cdef inline double _poly_eval(const double* coefs, int width, double x) noexcept nogil:
    cdef double r = coefs[width - 1]
    cdef int i
    for i in range(width - 2, -1, -1):
        r = r * x + coefs[i]
    return r


cdef inline double _tame(double mu, double delta, double cap) noexcept nogil:
    cdef double t = mu / (1.0 + delta * fabs(mu))
    if not (fabs(t) <= cap):
        t = copysign(cap, mu)
    return t


cdef inline double _clamp_value(double xn) noexcept nogil:
    if isnan(xn):
        return CLAMP
    return copysign(CLAMP, xn)


def simulate_em_batch(const double[::1] breaks, const double[:, ::1] dcoefs,
                      const double[::1] scoefs, double x0, double delta,
                      const double[:, ::1] dw, bint tamed):
    """Euler recursion for a batch of paths; see the fallback for semantics."""
    cdef Py_ssize_t n = dw.shape[0]
    cdef Py_ssize_t steps = dw.shape[1]
    values_arr = np.empty((n, steps + 1), dtype=np.float64)
    flags_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] values = values_arr
    cdef unsigned char[::1] flags = flags_arr
    cdef int m = breaks.shape[0]
    cdef int dwidth = dcoefs.shape[1]
    cdef int swidth = scoefs.shape[0]
    cdef const double* bptr = _ptr(breaks)
    cdef const double* dptr = &dcoefs[0, 0]
    cdef const double* sptr = &scoefs[0]
    cdef double cap = 1.0 / delta
    cdef Py_ssize_t p, k
    cdef double x, mu, drift, sig, xn
    cdef bint frozen
    with nogil:
        for p in range(n):
            x = x0
            frozen = 0
            values[p, 0] = x
            for k in range(steps):
                if frozen:
                    values[p, k + 1] = x
                    continue
                mu = _piece_eval(bptr, m, dptr, dwidth, x)
                if tamed:
                    drift = _tame(mu, delta, cap)
                else:
                    drift = mu
                sig = _poly_eval(sptr, swidth, x)
                xn = x + drift * delta + sig * dw[p, k]
                if not (fabs(xn) <= CLAMP):
                    frozen = 1
                    xn = _clamp_value(xn)
                x = xn
                values[p, k + 1] = x
            flags[p] = frozen
    return values_arr, flags_arr.view(np.bool_)


def fine_eval_batch(const double[:, ::1] coarse, const double[::1] breaks,
                    const double[:, ::1] dcoefs, const double[::1] scoefs,
                    double delta_c, int factor, const double[:, ::1] dw_fine):
    """Time-continuous extension of a coarse tamed solution on a nested grid."""
    cdef Py_ssize_t n = coarse.shape[0]
    cdef Py_ssize_t nc = coarse.shape[1] - 1
    cdef Py_ssize_t nf = nc * factor
    cdef double delta_f = delta_c / factor
    fine_arr = np.empty((n, nf + 1), dtype=np.float64)
    cdef double[:, ::1] fine = fine_arr
    cdef int m = breaks.shape[0]
    cdef int dwidth = dcoefs.shape[1]
    cdef int swidth = scoefs.shape[0]
    cdef const double* bptr = _ptr(breaks)
    cdef const double* dptr = &dcoefs[0, 0]
    cdef const double* sptr = &scoefs[0]
    cdef double cap = 1.0 / delta_c
    cdef Py_ssize_t p, c, r
    cdef double base, mu, t, sig, w, rdf
    with nogil:
        for p in range(n):
            for c in range(nc):
                base = coarse[p, c]
                mu = _piece_eval(bptr, m, dptr, dwidth, base)
                t = _tame(mu, delta_c, cap)
                sig = _poly_eval(sptr, swidth, base)
                fine[p, c * factor] = base
                w = 0.0
                for r in range(1, factor):
                    w = w + dw_fine[p, c * factor + r - 1]
                    rdf = r * delta_f
                    fine[p, c * factor + r] = base + t * rdf + sig * w
            fine[p, nf] = coarse[p, nc]
    return fine_arr


# --- smoothing-transform helpers (mirror _kernels_py) ---


cdef inline double _g_value(const double* zetas, const double* alphas, int mt,
                            double nu, double x) noexcept nogil:
    cdef double g = x
    cdef double s, u, a, ph
    cdef int k
    for k in range(mt):
        s = x - zetas[k]
        u = s / nu
        if fabs(u) < 1.0:
            a = 1.0 - u * u
            ph = a * a * a
        else:
            ph = 0.0
        g = g + alphas[k] * (s * fabs(s) * ph)
    return g


cdef inline double _g_deriv(const double* zetas, const double* alphas, int mt,
                            double nu, double x) noexcept nogil:
    cdef double gp = 1.0
    cdef double s, u, a, ph, dph, term
    cdef int k
    for k in range(mt):
        s = x - zetas[k]
        u = s / nu
        if fabs(u) < 1.0:
            a = 1.0 - u * u
            ph = a * a * a
            dph = -6.0 * u * (a * a)
        else:
            ph = 0.0
            dph = 0.0
        term = 2.0 * fabs(s) * ph + s * fabs(s) * dph / nu
        gp = gp + alphas[k] * term
    return gp


cdef inline double _g_second(const double* zetas, const double* alphas, int mt,
                             double nu, double x) noexcept nogil:
    cdef double gpp = 0.0
    cdef double s, u, a, ph, dph, d2, sgn, term
    cdef int k
    for k in range(mt):
        s = x - zetas[k]
        u = s / nu
        if fabs(u) < 1.0:
            a = 1.0 - u * u
            ph = a * a * a
            dph = -6.0 * u * (a * a)
            d2 = a * (30.0 * u * u - 6.0)
        else:
            ph = 0.0
            dph = 0.0
            d2 = 0.0
        if s >= 0.0:
            sgn = 1.0
        else:
            sgn = -1.0
        term = 2.0 * sgn * ph + 4.0 * fabs(s) * dph / nu + s * fabs(s) * d2 / (nu * nu)
        gpp = gpp + alphas[k] * term
    return gpp


cdef inline double _g_invert(const double* zetas, const double* alphas, int mt,
                             double nu, double bracket, double y) noexcept nogil:
    cdef double dist, cand, lo, hi, tol, mid, g, x, d, x1
    cdef int k, it
    if mt == 0:
        return y
    dist = fabs(y - zetas[0])
    for k in range(1, mt):
        cand = fabs(y - zetas[k])
        if cand < dist:
            dist = cand
    if not (dist < nu):
        # the bump regions map onto themselves, so outside them the map is
        # exactly the identity
        return y
    lo = y - bracket
    hi = y + bracket
    tol = INVERT_TOL_SCALE * (1.0 + fabs(y))
    for it in range(INVERT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        g = _g_value(zetas, alphas, mt, nu, mid)
        if g > y:
            hi = mid
        else:
            lo = mid
    x = 0.5 * (lo + hi)
    for it in range(INVERT_NEWTON_MAX):
        g = _g_value(zetas, alphas, mt, nu, x)
        if g > y:
            hi = x
        else:
            lo = x
        d = g - y
        if not (fabs(d) > tol):
            break
        x1 = x - d / _g_deriv(zetas, alphas, mt, nu, x)
        if not (x1 > lo and x1 < hi):
            x1 = 0.5 * (lo + hi)
        if x1 == x:
            break
        x = x1
    return x


cdef inline void _transformed_coeffs(const double* zetas, const double* alphas, int mt,
                                     double nu, double bracket,
                                     const double* bptr, int m,
                                     const double* dptr, int dwidth,
                                     const double* sptr, int swidth,
                                     double z, double* mut, double* sigt) noexcept nogil:
    cdef double xg = _g_invert(zetas, alphas, mt, nu, bracket, z)
    cdef double gp = _g_deriv(zetas, alphas, mt, nu, xg)
    cdef double gpp = _g_second(zetas, alphas, mt, nu, xg)
    cdef double mu = _piece_eval(bptr, m, dptr, dwidth, xg)
    cdef double sig = _poly_eval(sptr, swidth, xg)
    mut[0] = gp * mu + 0.5 * gpp * sig * sig
    sigt[0] = gp * sig


def transformed_em_batch(const double[::1] zetas, const double[::1] alphas,
                         double nu, double bracket,
                         const double[::1] breaks, const double[:, ::1] dcoefs,
                         const double[::1] scoefs, double z0, double delta,
                         const double[:, ::1] dw):
    """Tamed Euler recursion driven by the transformed drift/diffusion."""
    cdef Py_ssize_t n = dw.shape[0]
    cdef Py_ssize_t steps = dw.shape[1]
    values_arr = np.empty((n, steps + 1), dtype=np.float64)
    flags_arr = np.zeros(n, dtype=np.uint8)
    cdef double[:, ::1] values = values_arr
    cdef unsigned char[::1] flags = flags_arr
    cdef int mt = zetas.shape[0]
    cdef int m = breaks.shape[0]
    cdef int dwidth = dcoefs.shape[1]
    cdef int swidth = scoefs.shape[0]
    cdef const double* zptr = _ptr(zetas)
    cdef const double* aptr = _ptr(alphas)
    cdef const double* bptr = _ptr(breaks)
    cdef const double* dptr = &dcoefs[0, 0]
    cdef const double* sptr = &scoefs[0]
    cdef double cap = 1.0 / delta
    cdef Py_ssize_t p, k
    cdef double z, mut, sigt, t, zn
    cdef bint frozen
    with nogil:
        for p in range(n):
            z = z0
            frozen = 0
            values[p, 0] = z
            for k in range(steps):
                if frozen:
                    values[p, k + 1] = z
                    continue
                _transformed_coeffs(zptr, aptr, mt, nu, bracket, bptr, m,
                                    dptr, dwidth, sptr, swidth, z, &mut, &sigt)
                t = _tame(mut, delta, cap)
                zn = z + t * delta + sigt * dw[p, k]
                if not (fabs(zn) <= CLAMP):
                    frozen = 1
                    zn = _clamp_value(zn)
                z = zn
                values[p, k + 1] = z
            flags[p] = frozen
    return values_arr, flags_arr.view(np.bool_)
