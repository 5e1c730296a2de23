"""Deterministic numerics for the scaling-limit objects.

ode: survival of the motion-free branching system and the closed-form
extinction exponent of the mass-branching limit. pde: semilinear heat
solver on a half-line window with absorbing origin. shooting: blow-up
two-point problem whose slope at the origin is the all-time-maximum tail
constant. functionals: window extrapolations built on PDE output (limit
constant, Yaglom maximum law, conditioned-profile Laplace values).
"""
from .functionals import constant_C0inf, eta1_laplace, window_extrapolation, yaglom_max_cdf
from .ode import csbp_extinction, gw_survival
from .pde import (GridParams, PdeSolution, n_measure_survival,
                  semilinear_residual, solve_semilinear, solve_v_infinity)
from .shooting import ShootingSolution, shoot_K

__all__ = [
    "GridParams",
    "PdeSolution",
    "ShootingSolution",
    "constant_C0inf",
    "csbp_extinction",
    "eta1_laplace",
    "gw_survival",
    "n_measure_survival",
    "semilinear_residual",
    "shoot_K",
    "solve_semilinear",
    "solve_v_infinity",
    "window_extrapolation",
    "yaglom_max_cdf",
]
