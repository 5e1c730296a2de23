"""Error taxonomy shared by all modules.

Every error carries a machine-readable payload (``as_record``) so the CLI can
emit structured JSON on failure instead of a traceback.
"""
from __future__ import annotations

from typing import Any


class BklError(Exception):
    """Base class; subclasses set ``code`` used in error records and exit codes."""

    code = "error"
    exit_code = 1

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    def as_record(self) -> dict:
        return {"error": {"type": type(self).__name__, "code": self.code,
                          "message": self.message, "context": self.context}}


class ConfigError(BklError):
    """Bad or inconsistent experiment configuration."""
    code = "config"
    exit_code = 3


class NumericalError(BklError):
    """Base for all solver/estimator failures mapped to CLI exit code 4."""
    code = "numerical"
    exit_code = 4


class InfeasibleScale(ConfigError):
    """Stable-tail scale leaves no probability mass for the 0/1 prefix."""
    code = "infeasible_scale"


class CapExceeded(NumericalError):
    """Simulation event/population cap hit; carries the partial outcome."""
    code = "cap_exceeded"

    def __init__(self, message: str, partial=None, **context: Any):
        super().__init__(message, **context)
        self.partial = partial


class NonConvergence(NumericalError):
    """Grid refinement did not settle within tolerance (Richardson check failed)."""
    code = "non_convergence"


class NoConvergence(NonConvergence):
    """Window extrapolation of a limit constant did not settle."""
    code = "no_convergence"


class BracketingFailure(NumericalError):
    """Root bracket for the shooting parameter does not straddle the target."""
    code = "bracketing_failure"


class TooCensored(NumericalError):
    """Censored fraction too high for the requested estimate."""
    code = "too_censored"


class TooFewSurvivors(NumericalError):
    """Conditioning event too rare in the ensemble for the requested estimate."""
    code = "too_few_survivors"


class DegenerateDesign(NumericalError):
    """Regression design matrix unusable (too few or collinear points)."""
    code = "degenerate_design"


class NotConverged(NumericalError):
    """Plateau detection failed: largest-x estimates still drift."""
    code = "not_converged"
