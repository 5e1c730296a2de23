"""Ensemble statistics: tail probabilities, exponent fits, conditional laws.

Ensembles are duck-typed: anything exposing `extinction_time`, `censored`,
`horizon`, `max_all_time`, `max_floor` and `snapshots` arrays works (see
particle_system.Ensemble). All estimators are pure folds, so sharded runs
merge deterministically.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegenerateDesign, NotConverged, TooCensored, TooFewSurvivors


@dataclass(frozen=True)
class TailEstimate:
    value: float
    std_err: float
    n: int
    censored_fraction: float = 0.0

    def as_row(self, op: str, **params) -> dict:
        row = {"op": op}
        row.update(params)
        row.update(value=self.value, std_err=self.std_err, n=self.n,
                   censored_fraction=self.censored_fraction)
        return row


def indicator_estimate(hits: int, n: int, censored: int = 0) -> TailEstimate:
    p = hits / n
    se = float(np.sqrt(p * (1.0 - p) / n))
    return TailEstimate(value=p, std_err=se, n=n, censored_fraction=censored / n)


@dataclass(frozen=True)
class MergeState:
    """Associative accumulator for a mean: (sum, sum of squares, count)."""
    total: float = 0.0
    total_sq: float = 0.0
    count: int = 0
    censored: int = 0

    def add(self, values, censored: int = 0) -> "MergeState":
        v = np.asarray(values, dtype=float)
        return MergeState(self.total + float(v.sum()),
                          self.total_sq + float((v * v).sum()),
                          self.count + v.size,
                          self.censored + censored)

    def combine(self, other: "MergeState") -> "MergeState":
        return MergeState(self.total + other.total,
                          self.total_sq + other.total_sq,
                          self.count + other.count,
                          self.censored + other.censored)

    def estimate(self) -> TailEstimate:
        n = self.count
        mean = self.total / n
        var = max(self.total_sq / n - mean * mean, 0.0)
        return TailEstimate(value=mean, std_err=float(np.sqrt(var / n)), n=n,
                            censored_fraction=self.censored / n)


def merge(states: Sequence[MergeState]) -> MergeState:
    out = MergeState()
    for s in states:
        out = out.combine(s)
    return out


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    slope_ci: tuple
    grid: tuple

    def __post_init__(self):
        lo, hi = self.slope_ci
        assert lo <= self.slope <= hi


def fit_exponent(points) -> ExponentFit:
    """Weighted least squares of log p on log x; weights from delta-method
    standard errors se/p. Points: iterable of (x, p, se)."""
    pts = [(float(x), float(p), float(se)) for x, p, se in points]
    if len(pts) < 4:
        raise DegenerateDesign(f"need >= 4 points, got {len(pts)}", n_points=len(pts))
    x = np.array([p[0] for p in pts])
    p = np.array([p[1] for p in pts])
    se = np.array([p[2] for p in pts])
    if np.any(p <= 0) or np.any(x <= 0):
        raise DegenerateDesign("nonpositive point cannot be log-fitted")
    lx, lp = np.log(x), np.log(p)
    if np.ptp(lx) < 1e-12:
        raise DegenerateDesign("all abscissae equal")
    w = np.where(se > 0, 1.0 / np.maximum(se / p, 1e-300) ** 2, np.nan)
    w = np.where(np.isfinite(w), w, np.nanmax(w[np.isfinite(w)]) if np.any(np.isfinite(w)) else 1.0)
    sw = w.sum()
    mx = (w * lx).sum() / sw
    mp = (w * lp).sum() / sw
    sxx = (w * (lx - mx) ** 2).sum()
    slope = (w * (lx - mx) * (lp - mp)).sum() / sxx
    intercept = mp - slope * mx
    var_slope = 1.0 / sxx
    half = 1.96 * np.sqrt(var_slope)
    return ExponentFit(slope=float(slope), intercept=float(intercept),
                       slope_ci=(float(slope - half), float(slope + half)),
                       grid=tuple(zip(lx.tolist(), lp.tolist())))


def survival_tail(ensemble, y_mode: str, y: float, t_values) -> list:
    """P(extinction time > t) per t. Start-point handling (fixed start y or
    sqrt(t)-scaled start) is a property of how the ensemble was generated;
    y and y_mode are echoed into rows for bookkeeping."""
    if y_mode not in ("fixed", "sqrt_t_scaled"):
        raise ValueError(f"unknown y_mode {y_mode!r}")
    ext = np.asarray(ensemble.extinction_time)
    cens = np.asarray(ensemble.censored)
    horizon = float(ensemble.horizon)
    out = []
    n = ext.size
    for t in t_values:
        t = float(t)
        unknown = int(np.count_nonzero(cens & (horizon < t)))
        if unknown / n > 1e-3:
            raise TooCensored(
                f"{unknown}/{n} replicas censored before t={t}", t=t)
        hits = int(np.count_nonzero(cens | (ext > t)))
        out.append(indicator_estimate(hits, n, censored=unknown))
    return out


def max_tail(ensemble, y_mode: str, y: float, x_values) -> list:
    """P(all-time running maximum >= x) per x.

    Prefers per-level touch indicators when the ensemble tracked them
    (level_flags), falling back to thresholding stored exact maxima. Either
    way, a censored replica whose record stays below x counts as unknown."""
    if y_mode not in ("fixed", "x_scaled"):
        raise ValueError(f"unknown y_mode {y_mode!r}")
    flags = getattr(ensemble, "level_flags", None) or {}
    cens = np.asarray(ensemble.censored)
    n = cens.size
    mx = getattr(ensemble, "max_all_time", None)
    floor = (np.asarray(ensemble.max_floor)
             if getattr(ensemble, "max_floor", None) is not None else mx)
    out = []
    for x in x_values:
        x = float(x)
        if x in flags:
            f = np.asarray(flags[x])
            unknown = int(np.count_nonzero(cens & ~f))
            hits = int(np.count_nonzero(f))
        elif mx is not None:
            mxa = np.asarray(mx)
            unknown = int(np.count_nonzero(cens & (floor < x)))
            hits = int(np.count_nonzero(np.where(cens, floor >= x, mxa >= x)))
        else:
            raise ValueError(
                f"no maximum information for x={x}: not a tracked level "
                "and no exact maxima stored")
        if unknown / n > 1e-3:
            raise TooCensored(
                f"{unknown}/{n} replicas still running below x={x}", x=x)
        out.append(indicator_estimate(hits, n, censored=unknown))
    return out


@dataclass(frozen=True)
class EmpiricalDistribution:
    values: np.ndarray = field(repr=False)
    n: int

    def cdf(self, x) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(x), side="right") / self.n

    def ks_distance(self, cdf_callable) -> float:
        ref = np.asarray(cdf_callable(self.values), dtype=float)
        k = np.arange(1, self.n + 1)
        return float(np.max(np.maximum(np.abs(k / self.n - ref),
                                       np.abs((k - 1) / self.n - ref))))


def yaglom_empirical(ensemble, t: float, statistic: str, alpha: float = 2.0,
                     min_survivors: int = 500) -> EmpiricalDistribution:
    """Empirical law of the scaled maximum (max/sqrt(t)) or of the scaled
    population mass at time t, conditioned on survival to t."""
    snap = ensemble.snapshots[float(t)]
    counts = np.asarray(snap["count"])
    alive = counts > 0
    n_surv = int(np.count_nonzero(alive))
    if n_surv < min_survivors:
        raise TooFewSurvivors(f"{n_surv} survivors at t={t}", t=t, survivors=n_surv)
    if statistic == "max":
        vals = np.asarray(snap["max"])[alive] / np.sqrt(t)
    elif statistic == "mass":
        vals = counts[alive] * t ** (-1.0 / (alpha - 1.0))
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return EmpiricalDistribution(values=np.sort(vals), n=n_surv)


def plateau(points) -> TailEstimate:
    """Declare the limit value from the last three points of a curve if they
    agree pairwise within 2 pooled standard errors."""
    pts = [(float(x), float(v), float(se)) for x, v, se in points]
    if len(pts) < 3:
        raise NotConverged("need at least 3 points for a plateau")
    tail = pts[-3:]
    for i in range(3):
        for j in range(i + 1, 3):
            gap = abs(tail[i][1] - tail[j][1])
            pooled = np.hypot(tail[i][2], tail[j][2])
            if gap > 2.0 * pooled:
                raise NotConverged(
                    f"last points disagree: |{tail[i][1]:.6g}-{tail[j][1]:.6g}| > 2*{pooled:.3g}",
                    gap=gap, pooled_se=pooled)
    w = np.array([1.0 / max(se, 1e-300) ** 2 for _, _, se in tail])
    vals = np.array([v for _, v, _ in tail])
    value = float((w * vals).sum() / w.sum())
    se = float(np.sqrt(1.0 / w.sum()))
    n = 3
    return TailEstimate(value=value, std_err=se, n=n)
