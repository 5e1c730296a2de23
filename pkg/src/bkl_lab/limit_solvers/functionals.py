"""Limit functionals built from PDE output by a small-window extrapolation.

The shared kernel is

    G(w) = (1/sqrt(w)) * (2/sqrt(2 pi sigma2))
           * integral_0^inf z exp(-z^2/2) v(1-w, z sigma sqrt(w)) dz,

whose w -> 0 limit yields the fixed-start survival constant (from the
survival intensity) and, normalized by that constant, the Laplace functional
of the unit-time conditioned profile (from the intensity started at bounded
data). The limit is taken by Richardson extrapolation over a geometric
ladder of windows with an empirically fitted order.
"""
from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from ..errors import NoConvergence
from .pde import GridParams, PdeSolution, _ramp_profile, _v_infinity_cached, \
    solve_semilinear
from .ode import csbp_extinction

_DEFAULT_WINDOWS = (0.08, 0.04, 0.02, 0.01)


def _g_transform(pde: PdeSolution, sigma2: float, w: float) -> float:
    """Rayleigh-weighted near-origin average of the stored row at time 1-w."""
    if not 0.0 < w < 1.0:
        raise ValueError("window must lie in (0, 1)")
    row = pde.row(1.0 - w)
    spline = CubicSpline(pde.grid, row)
    scale = math.sqrt(sigma2 * w)
    z_grid = pde.grid[-1] / scale
    z_hi = min(z_grid, 40.0)

    def integrand(z):
        return z * math.exp(-0.5 * z * z) * float(spline(z * scale))

    val, _ = quad(integrand, 0.0, z_hi, epsabs=1e-10, epsrel=1e-8, limit=200)
    if z_grid < 40.0:
        val += float(row[-1]) * math.exp(-0.5 * z_grid * z_grid)
    return val * 2.0 / math.sqrt(2.0 * math.pi * sigma2) / math.sqrt(w)


def _triple_extrapolant(g1, g2, g3, r):
    """Limit of G(w) = L + a*w^p through three ladder values, and p."""
    d1, d2 = g1 - g2, g2 - g3
    if d1 / d2 <= 1.0:
        raise NoConvergence("window differences do not decay",
                            values=[float(g1), float(g2), float(g3)])
    p = math.log(d1 / d2) / math.log(r)
    return g3 - d2 / (r ** p - 1.0), p


def window_extrapolation(values, windows, *, rel_tol: float = 0.02,
                         order_band=(0.25, 2.5)):
    """Extrapolate G(w) -> w=0 from a geometric window ladder.

    Fits G(w) = L + a*w^p on the last three points with p estimated from the
    difference ratio. Three points fix the fit exactly, so a cross-check
    needs four: the extrapolant from the previous triple must then agree
    with the final one within rel_tol, otherwise NoConvergence. Returns
    (L, diagnostics).
    """
    w = np.asarray(windows, dtype=float)
    g = np.asarray(values, dtype=float)
    if w.size != g.size or w.size < 3:
        raise ValueError("need at least three windows with matching values")
    if np.any(np.diff(w) >= 0.0):
        raise ValueError("windows must be strictly decreasing")
    ratios = w[:-1] / w[1:]
    if not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("windows must form a geometric ladder")
    r = float(ratios[0])
    scale = max(abs(g[-1]), 1e-300)
    if abs(g[-2] - g[-1]) <= 1e-12 * scale:
        return float(g[-1]), {"order": None, "order_in_band": True,
                              "extrapolants": (float(g[-1]), float(g[-1])),
                              "windows": tuple(map(float, w)),
                              "values": tuple(map(float, g))}
    limit, p = _triple_extrapolant(g[-3], g[-2], g[-1], r)
    prev = limit
    if g.size >= 4:
        prev, _ = _triple_extrapolant(g[-4], g[-3], g[-2], r)
    diag = {"order": p, "order_in_band": order_band[0] <= p <= order_band[1],
            "extrapolants": (float(prev), float(limit)),
            "windows": tuple(map(float, w)), "values": tuple(map(float, g))}
    if abs(prev - limit) > rel_tol * max(abs(limit), 1e-300):
        raise NoConvergence(
            f"window extrapolants {prev:.6g} and {limit:.6g} disagree beyond "
            f"{rel_tol:.0%}", **diag)
    return float(limit), diag


def constant_C0inf(pde: PdeSolution, sigma2: float,
                   w_values=_DEFAULT_WINDOWS, *, full: bool = False):
    """Fixed-start survival constant from a killed survival intensity.

    pde must store rows at every time 1-w; the w -> 0 limit of the kernel G
    is the constant multiplying the harmonic factor in the fixed-start
    survival decay.
    """
    g = [_g_transform(pde, sigma2, w) for w in w_values]
    limit, diag = window_extrapolation(g, w_values)
    return (limit, diag) if full else limit


def eta1_laplace(pde_f: PdeSolution, C0inf: float, sigma2: float,
                 w_values=_DEFAULT_WINDOWS, *, full: bool = False):
    """Laplace functional of the unit-time conditioned profile.

    pde_f is the intensity evolved from the bounded test data f; the value is
    1 - lim_w G(w)/C0inf, in [0, 1] for admissible f.
    """
    if not C0inf > 0:
        raise ValueError("C0inf must be positive")
    g = [_g_transform(pde_f, sigma2, w) for w in w_values]
    limit, diag = window_extrapolation(g, w_values)
    value = 1.0 - limit / C0inf
    return (value, diag) if full else value


def yaglom_max_cdf(alpha: float, C: float, sigma2: float, y: float, z, *,
                   grid_params: GridParams = GridParams(),
                   delta0: float = 1e-3, delta_tol: float = 5e-4,
                   max_halvings: int = 14):
    """Conditional law of the diffusive-scale maximum at unit time.

    P(max <= z | alive at 1, started at y) = 1 - u_z(1, y) / v(1, y), where
    v is the killed survival intensity and u_z the intensity of charging
    (z, inf) at time 1; u_z evolves from data exploding only past z.
    """
    if not y > 0:
        raise ValueError("y must be positive")
    zarr = np.asarray(z, dtype=float)
    if np.any(zarr <= 0.0):
        raise ValueError("z must be positive")
    gp = grid_params if grid_params.y_max is not None else \
        replace(grid_params, y_max=12.0 * math.sqrt(sigma2))
    v_inf = _v_infinity_cached(alpha, C, sigma2, 1.0, gp, (1.0,))
    denom = v_inf.value_at(1.0, y)
    out = np.empty_like(np.atleast_1d(zarr))
    for i, zi in enumerate(np.atleast_1d(zarr)):
        num = _exceedance_intensity(alpha, C, sigma2, float(zi), gp,
                                    delta0, delta_tol, max_halvings)
        out[i] = 1.0 - num.value_at(1.0, y) / denom
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if zarr.ndim == 0 else out.reshape(zarr.shape)


def _exceedance_intensity(alpha, C, sigma2, z, gp, delta0, delta_tol,
                          max_halvings) -> PdeSolution:
    """Intensity u_z(t, y) of putting mass past z by time 1, absorbing at 0.

    The ramp start converges like sqrt(delta) here (the edge layer at z has
    the wrong similarity shape at any finite delta), so successive halvings
    are combined by Richardson extrapolation at order 1/2 and the halving
    stops once the extrapolants settle.
    """
    if z >= gp.y_max:
        raise ValueError("threshold beyond the grid window")
    run_gp = replace(gp, refine_check=False)
    grid = np.linspace(0.0, gp.y_max, gp.n_y)
    gain = 1.0 / (math.sqrt(2.0) - 1.0)

    def run(delta):
        level = csbp_extinction(alpha, C, delta)
        width = math.sqrt(sigma2 * delta)
        f = _ramp_profile(grid, level, z, width)
        return solve_semilinear(f, alpha, C, sigma2, 1.0, run_gp,
                                t_start=delta, store_times=(1.0,))

    delta = float(delta0)
    prev = run(delta)
    prev_ext = None
    diff = math.inf
    for k in range(max_halvings):
        delta *= 0.5
        cur = run(delta)
        ext = np.clip(cur.values + gain * (cur.values - prev.values),
                      0.0, None)
        if prev_ext is not None:
            diff = float(np.max(np.abs(ext - prev_ext)))
            if k >= 2 and diff < delta_tol:
                meta = dict(cur.meta, delta0=delta, z=z,
                            layer_order=0.5, layer_diff=diff)
                return PdeSolution(grid=cur.grid, times=cur.times,
                                   values=ext, meta=meta)
        prev, prev_ext = cur, ext
    raise NoConvergence(
        f"threshold initial layer still moving by {diff:.3e}",
        diff=diff, tol=delta_tol, z=z)
