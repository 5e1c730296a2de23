"""Blow-up two-point problem for the all-time-maximum exponent profile.

Solve (sigma2/2) K'' = C K^alpha with K(0) = 0, K increasing and blowing up
at a prescribed location, by shooting on the slope at the origin. Multiplying
by K' gives the conserved quantity

    (sigma2/4) K'^2 - (C/(alpha+1)) K^(alpha+1) = (sigma2/4) slope^2,

so once the integrator reaches a large K the remaining distance to blow-up is
a convergent integral of 1/K' and needs no further stepping.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..errors import BracketingFailure, NonConvergence

_SWITCH_FACTOR = 1e3        # leave the ODE once K exceeds this multiple of slope
_SERIES_TARGET = 1e-7       # relative size of the first correction at the start


@dataclass(frozen=True)
class ShootingSolution:
    """Profile K on a grid inside (0, blowup_location).

    Entries past switch_index come from the conserved-quantity distance map
    rather than the time stepper; K_prime there is the exact square root of
    the conserved quantity through the switch state.
    """
    slope_at_0: float
    blowup_location: float
    grid: np.ndarray
    K_values: np.ndarray
    K_prime: np.ndarray
    switch_index: int
    meta: dict = field(default_factory=dict, compare=False)

    def value_at(self, y):
        yarr = np.asarray(y, dtype=float)
        if np.any(yarr < 0.0) or np.any(yarr >= self.blowup_location):
            raise ValueError("query point outside [0, blow-up)")
        out = np.empty_like(np.atleast_1d(yarr))
        flat = np.atleast_1d(yarr)
        low = flat < self.grid[0]
        if np.any(low):
            out[low] = _series_K(flat[low], self.slope_at_0, self.meta["c2"])
        if np.any(~low):
            out[~low] = PchipInterpolator(self.grid, self.K_values)(flat[~low])
        return float(out[0]) if yarr.ndim == 0 else out.reshape(yarr.shape)


def _series_K(y, slope, c2):
    """Two-term origin expansion K = slope*y + c2*slope^alpha*y^(alpha+2)."""
    return slope * y + c2["coef"] * slope ** c2["alpha"] * y ** (c2["alpha"] + 2.0)


def _tail_distance(K_from, Kp_from, c, alpha):
    """Distance in y from K_from to blow-up along the conserved trajectory.

    The substitution w = k^(-(alpha-1)/2) flattens the measure exactly,
    turning the slowly decaying infinite integral into a bounded smooth one
    on (0, K_from^(-(alpha-1)/2)].
    """
    base = Kp_from * Kp_from - c * K_from ** (alpha + 1.0)
    expo = 2.0 * (alpha + 1.0) / (alpha - 1.0)
    w_hi = K_from ** (-0.5 * (alpha - 1.0))
    val, _ = quad(lambda w: 1.0 / math.sqrt(c + base * w ** expo),
                  0.0, w_hi, epsabs=1e-14, epsrel=1e-12, limit=200)
    return 2.0 / (alpha - 1.0) * val


def _integrate(slope, alpha, C, sigma2, target, dense):
    """Shoot from the origin; return (blowup_location, state) for this slope.

    state is None unless dense output was requested; it carries everything
    needed to build the profile grid afterwards.
    """
    two_c_over_s = 2.0 * C / sigma2
    c = 4.0 * C / (sigma2 * (alpha + 1.0))
    coef = two_c_over_s / ((alpha + 1.0) * (alpha + 2.0))
    y0 = (_SERIES_TARGET / (coef * slope ** (alpha - 1.0))) ** (1.0 / (alpha + 1.0))
    y0 = min(y0, 0.05 * target)
    K0 = slope * y0 + coef * slope ** alpha * y0 ** (alpha + 2.0)
    Kp0 = slope + two_c_over_s * slope ** alpha * y0 ** (alpha + 1.0) / (alpha + 1.0)
    K_switch = _SWITCH_FACTOR * max(slope, 1.0)

    def rhs(_, s):
        return (s[1], two_c_over_s * max(s[0], 0.0) ** alpha)

    def hit_switch(_, s):
        return s[0] - K_switch
    hit_switch.terminal = True
    hit_switch.direction = 1.0

    # rtol sits near the permitted floor: the conserved quantity scales like
    # slope^2, so meeting an absolute drift budget at small K demands nearly
    # machine-level relative accuracy when the slope is large
    sol = solve_ivp(rhs, (y0, y0 + 2.0 * target), (K0, Kp0), method="DOP853",
                    rtol=5e-14, atol=1e-15 * max(slope, 1.0),
                    events=(hit_switch,), dense_output=dense)
    if not sol.success:
        raise NonConvergence(f"shooting integration failed: {sol.message}",
                             slope=slope)
    if sol.t_events[0].size:
        y_end = float(sol.t_events[0][0])
        K_end, Kp_end = (float(q) for q in sol.y_events[0][0])
    else:
        y_end = float(sol.t[-1])
        K_end, Kp_end = float(sol.y[0, -1]), float(sol.y[1, -1])
    tail = _tail_distance(K_end, Kp_end, c, alpha)
    location = y_end + tail
    state = None
    if dense:
        state = {"sol": sol, "y0": y0, "y_end": y_end, "K_end": K_end,
                 "Kp_end": Kp_end, "c": c,
                 "c2": {"coef": coef, "alpha": alpha}}
    return location, state


def shoot_K(alpha: float, C: float, sigma2: float, tol: float = 1e-9, *,
            blowup_at: float = 1.0, theta_bracket=(1e-3, 1e6),
            n_grid: int = 2001) -> ShootingSolution:
    """Find the slope at 0 whose profile blows up at blowup_at.

    The blow-up location decreases strictly in the slope, so a bracketed
    root search on the log-slope converges; BracketingFailure if the supplied
    bracket does not straddle the target location.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    if not C > 0 or not sigma2 > 0 or not blowup_at > 0:
        raise ValueError("C, sigma2 and blowup_at must be positive")
    lo, hi = theta_bracket
    n_evals = 0

    def gap(log_slope):
        nonlocal n_evals
        n_evals += 1
        return _integrate(math.exp(log_slope), alpha, C, sigma2,
                          blowup_at, False)[0] - blowup_at

    g_lo, g_hi = gap(math.log(lo)), gap(math.log(hi))
    if not g_lo > 0.0 > g_hi:
        raise BracketingFailure(
            f"slope bracket {theta_bracket} does not straddle a blow-up "
            f"at {blowup_at}", gap_low=g_lo, gap_high=g_hi)
    log_slope = brentq(gap, math.log(lo), math.log(hi), xtol=1e-13,
                       rtol=8.9e-16, maxiter=200)
    slope = math.exp(log_slope)

    location, state = _integrate(slope, alpha, C, sigma2, blowup_at, True)
    if abs(location - blowup_at) > max(tol, 1e-11 * blowup_at):
        raise NonConvergence(
            f"blow-up location {location} missed target {blowup_at}",
            location=location, tol=tol)

    grid = location * np.arange(1, n_grid + 1) / (n_grid + 1.0)
    K = np.empty(n_grid)
    Kp = np.empty(n_grid)
    sol, y0, y_end = state["sol"], state["y0"], state["y_end"]
    c = state["c"]
    below = grid < y0
    K[below] = _series_K(grid[below], slope, state["c2"])
    Kp[below] = slope + 2.0 * C / sigma2 * slope ** alpha \
        * grid[below] ** (alpha + 1.0) / (alpha + 1.0)
    mid = (~below) & (grid <= y_end)
    if np.any(mid):
        vals = sol.sol(grid[mid])
        K[mid], Kp[mid] = vals[0], vals[1]
    switch_index = int(np.sum(grid <= y_end)) - 1

    past = grid > y_end
    if np.any(past):
        K_end, Kp_end = state["K_end"], state["Kp_end"]
        base = Kp_end * Kp_end - c * K_end ** (alpha + 1.0)
        # tabulate the distance map on a geometric ladder, then invert
        k_hi = _asymptote_K(location - grid[past].max(), alpha, C, sigma2)
        ladder = np.geomspace(K_end, max(4.0 * k_hi, 10.0 * K_end), 600)
        dist = np.empty(ladder.size)
        dist[0] = 0.0
        for i in range(1, ladder.size):
            seg, _ = quad(lambda k: 1.0 / math.sqrt(base + c * k ** (alpha + 1.0)),
                          ladder[i - 1], ladder[i], epsabs=1e-15, epsrel=1e-11)
            dist[i] = dist[i - 1] + seg
        K[past] = PchipInterpolator(y_end + dist, ladder)(grid[past])
        Kp[past] = np.sqrt(base + c * K[past] ** (alpha + 1.0))

    meta = {"c2": state["c2"], "iterations": n_evals, "y_series_end": y0,
            "y_switch": y_end, "first_integral_base": 0.25 * sigma2 * slope ** 2,
            # accepted integrator states, the trajectory the conservation
            # invariant is certified on (grid values interpolate between them)
            "trajectory": (sol.t.copy(), sol.y[0].copy(), sol.y[1].copy())}
    return ShootingSolution(slope_at_0=slope, blowup_location=location,
                            grid=grid, K_values=K, K_prime=Kp,
                            switch_index=switch_index, meta=meta)


def _asymptote_K(gap, alpha, C, sigma2):
    """Leading blow-up size A * gap^(-2/(alpha-1)) at distance gap from it."""
    q = 2.0 / (alpha - 1.0)
    A = (sigma2 * q * (q + 1.0) / (2.0 * C)) ** (1.0 / (alpha - 1.0))
    return A * gap ** (-q)
