"""Pure-numpy fallback for the hot simulation kernels.

Every function here has a compiled twin in ``_kernels.pyx``.  The two must
stay BITWISE identical: expressions are written in the exact evaluation order
of the C code (left-to-right, no fused multiply-add, branchless selections via
``np.where`` matching the C branches), so do not "simplify" the arithmetic.

Vectorization is across paths; the step recursion stays a Python loop.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

# untamed runaway paths are frozen at this magnitude and flagged
OVERFLOW_CLAMP = 1e150

_INVERT_TOL_SCALE = 1e-13
_INVERT_BISECTIONS = 10
_INVERT_NEWTON_MAX = 100


def _piece_eval(breaks, coefs, x):
    """Piecewise Horner evaluation, right-continuous at the breakpoints."""
    if len(breaks) == 0:
        c = np.broadcast_to(coefs[0], (len(x), coefs.shape[1]))
    else:
        idx = np.searchsorted(breaks, x, side="right")
        c = coefs[idx]
    L = coefs.shape[1]
    r = c[:, L - 1].copy()
    for i in range(L - 2, -1, -1):
        r = r * x + c[:, i]
    return r


def _poly_eval(coefs, x):
    """Single-polynomial Horner evaluation (diffusion)."""
    L = len(coefs)
    r = np.full_like(x, coefs[L - 1])
    for i in range(L - 2, -1, -1):
        r = r * x + coefs[i]
    return r


def _tame(mu, delta):
    # the clamp keeps |result| <= 1/delta exact even when rounding in the
    # denominator would overshoot by an ulp (and when mu overflowed to inf)
    t = mu / (1.0 + delta * np.abs(mu))
    cap = 1.0 / delta
    return np.where(np.abs(t) <= cap, t, np.copysign(cap, mu))


def _clamp_step(x, xn, frozen):
    bad = ~(np.abs(xn) <= OVERFLOW_CLAMP)  # catches NaN as well
    xn = np.where(
        bad, np.where(np.isnan(xn), OVERFLOW_CLAMP, np.copysign(OVERFLOW_CLAMP, xn)), xn
    )
    x = np.where(frozen, x, xn)
    return x, frozen | bad


def simulate_em_batch(breaks, dcoefs, scoefs, x0, delta, dw, tamed):
    """Euler recursion for a batch of paths.

    dw has shape (n_paths, n_steps); returns (values, overflowed) with values
    of shape (n_paths, n_steps + 1).  Overflowed paths freeze at the clamp.
    """
    n, steps = dw.shape
    values = np.empty((n, steps + 1), dtype=np.float64)
    x = np.full(n, x0, dtype=np.float64)
    frozen = np.zeros(n, dtype=bool)
    values[:, 0] = x
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            mu = _piece_eval(breaks, dcoefs, x)
            drift = _tame(mu, delta) if tamed else mu
            sig = _poly_eval(scoefs, x)
            xn = x + drift * delta + sig * dw[:, k]
            x, frozen = _clamp_step(x, xn, frozen)
            values[:, k + 1] = x
    return values, frozen


def fine_eval_batch(coarse, breaks, dcoefs, scoefs, delta_c, factor, dw_fine):
    """Time-continuous extension of a coarse tamed solution on a nested grid.

    Within each coarse interval the value is base + tamed_drift * (t - t_floor)
    + sigma(base) * (W_t - W_floor); at coarse grid times the coarse values are
    copied bitwise.
    """
    n, nc1 = coarse.shape
    nc = nc1 - 1
    nf = nc * factor
    delta_f = delta_c / factor
    fine = np.empty((n, nf + 1), dtype=np.float64)
    with np.errstate(over="ignore", invalid="ignore"):
        for c in range(nc):
            base = coarse[:, c]
            mu = _piece_eval(breaks, dcoefs, base)
            t = _tame(mu, delta_c)
            sig = _poly_eval(scoefs, base)
            fine[:, c * factor] = base
            w = np.zeros(n, dtype=np.float64)
            for r in range(1, factor):
                w = w + dw_fine[:, c * factor + r - 1]
                rdf = r * delta_f
                fine[:, c * factor + r] = base + t * rdf + sig * w
    fine[:, nf] = coarse[:, nc]
    return fine


# --- smoothing-transform helpers (mirror transform.SmoothingTransform) ---


def _g_value(zetas, alphas, nu, x):
    g = x.copy()
    for k in range(len(zetas)):
        s = x - zetas[k]
        u = s / nu
        a = 1.0 - u * u
        ph = np.where(np.abs(u) < 1.0, a * a * a, 0.0)
        g = g + alphas[k] * (s * np.abs(s) * ph)
    return g


def _g_deriv(zetas, alphas, nu, x):
    gp = np.ones_like(x)
    for k in range(len(zetas)):
        s = x - zetas[k]
        u = s / nu
        a = 1.0 - u * u
        inside = np.abs(u) < 1.0
        ph = np.where(inside, a * a * a, 0.0)
        dph = np.where(inside, -6.0 * u * (a * a), 0.0)
        term = 2.0 * np.abs(s) * ph + s * np.abs(s) * dph / nu
        gp = gp + alphas[k] * term
    return gp


def _g_second(zetas, alphas, nu, x):
    gpp = np.zeros_like(x)
    for k in range(len(zetas)):
        s = x - zetas[k]
        u = s / nu
        a = 1.0 - u * u
        inside = np.abs(u) < 1.0
        ph = np.where(inside, a * a * a, 0.0)
        dph = np.where(inside, -6.0 * u * (a * a), 0.0)
        d2 = np.where(inside, a * (30.0 * u * u - 6.0), 0.0)
        sgn = np.where(s >= 0.0, 1.0, -1.0)
        term = (
            2.0 * sgn * ph + 4.0 * np.abs(s) * dph / nu + s * np.abs(s) * d2 / (nu * nu)
        )
        gpp = gpp + alphas[k] * term
    return gpp


def _g_invert(zetas, alphas, nu, bracket, y):
    """Preimage under the smoothing map; exact outside the bump supports."""
    x = y.copy()
    if len(zetas) == 0:
        return x
    dist = np.min(np.abs(y[:, None] - zetas[None, :]), axis=1)
    active = dist < nu
    if not active.any():
        return x
    ya = y[active]
    lo = ya - bracket
    hi = ya + bracket
    tol = _INVERT_TOL_SCALE * (1.0 + np.abs(ya))
    for _ in range(_INVERT_BISECTIONS):
        mid = 0.5 * (lo + hi)
        g = _g_value(zetas, alphas, nu, mid)
        above = g > ya
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid)
    xa = 0.5 * (lo + hi)
    live = np.ones_like(ya, dtype=bool)
    for _ in range(_INVERT_NEWTON_MAX):
        g = _g_value(zetas, alphas, nu, xa)
        above = g > ya
        hi = np.where(live & above, xa, hi)
        lo = np.where(live & ~above, xa, lo)
        d = g - ya
        live = live & (np.abs(d) > tol)
        if not live.any():
            break
        x1 = xa - d / _g_deriv(zetas, alphas, nu, xa)
        inside = (x1 > lo) & (x1 < hi)
        x1 = np.where(inside, x1, 0.5 * (lo + hi))
        live = live & (x1 != xa)
        xa = np.where(live, x1, xa)
    x[active] = xa
    return x


def _transformed_coeffs(zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z):
    xg = _g_invert(zetas, alphas, nu, bracket, z)
    gp = _g_deriv(zetas, alphas, nu, xg)
    gpp = _g_second(zetas, alphas, nu, xg)
    mu = _piece_eval(breaks, dcoefs, xg)
    sig = _poly_eval(scoefs, xg)
    mut = gp * mu + 0.5 * gpp * sig * sig
    sigt = gp * sig
    return mut, sigt


def transformed_em_batch(
    zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z0, delta, dw
):
    """Tamed Euler recursion driven by the transformed drift/diffusion."""
    n, steps = dw.shape
    values = np.empty((n, steps + 1), dtype=np.float64)
    z = np.full(n, z0, dtype=np.float64)
    frozen = np.zeros(n, dtype=bool)
    values[:, 0] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            mut, sigt = _transformed_coeffs(
                zetas, alphas, nu, bracket, breaks, dcoefs, scoefs, z
            )
            t = _tame(mut, delta)
            zn = z + t * delta + sigt * dw[:, k]
            z, frozen = _clamp_step(z, zn, frozen)
            values[:, k + 1] = z
    return values, frozen
