"""Scalar limit objects: motion-free survival and the extinction exponent."""
from __future__ import annotations

import numpy as np
from scipy.integrate import solve_ivp

from ..offspring import BranchingSpec, mechanism


def gw_survival(spec: BranchingSpec, t, *, rtol: float = 1e-11):
    """Survival probability u(t) of the branching system with motion ignored.

    u solves u' = -mechanism(u), u(0) = 1, integrated adaptively; u is the
    probability that the population born from one ancestor is nonempty at t.
    Accepts a scalar time or an array of times >= 0.
    """
    tarr = np.asarray(t, dtype=float)
    if np.any(tarr < 0.0) or not np.all(np.isfinite(tarr)):
        raise ValueError("times must be finite and nonnegative")
    t_query = np.atleast_1d(tarr).ravel()
    t_max = float(t_query.max(initial=0.0))
    if t_max == 0.0:
        ones = np.ones_like(t_query)
        return float(ones[0]) if tarr.ndim == 0 else ones.reshape(tarr.shape)

    def rhs(_, u):
        return (-mechanism(spec, float(np.clip(u[0], 0.0, 1.0))),)

    t_eval = np.unique(t_query)
    sol = solve_ivp(rhs, (0.0, t_max), (1.0,), method="DOP853",
                    rtol=rtol, atol=1e-14, t_eval=t_eval)
    if not sol.success:
        raise RuntimeError(f"survival ODE integration failed: {sol.message}")
    lookup = dict(zip(sol.t, np.clip(sol.y[0], 0.0, 1.0)))
    out = np.array([lookup[tq] for tq in t_query])
    return float(out[0]) if tarr.ndim == 0 else out.reshape(tarr.shape)


def csbp_extinction(alpha: float, C: float, r: float, y: float | None = None) -> float:
    """Extinction exponent -log P(dead by r) of the mass-branching limit.

    The limit of a unit point mass anywhere on the line, with nonlinearity
    C * v^alpha: the exponent ((alpha-1) C r)^(-1/(alpha-1)) does not depend
    on the starting point, so y is accepted and ignored.
    """
    if not 1.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (1, 2]")
    if not C > 0:
        raise ValueError("C must be positive")
    if not r > 0:
        raise ValueError("r must be positive")
    return float(((alpha - 1.0) * C * r) ** (-1.0 / (alpha - 1.0)))
