"""Acceptance suite: oracle-equivalence and invariant checks at desk scale.

Each criterion function runs one self-contained check against an
independent oracle (closed form, quadrature, or the deterministic
solvers) and returns a CriterionResult. run_all executes a selection in
order, printing one PASS/FAIL line per criterion. Everything is seeded,
so the suite is reproducible bit for bit.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator

from . import estimators as est
from . import levy_motion as lm
from .limit_solvers import (GridParams, csbp_extinction, gw_survival,
                            n_measure_survival, semilinear_residual, shoot_K,
                            solve_semilinear, solve_v_infinity, yaglom_max_cdf)
from .offspring import (BranchingSpec, make_binary, make_stable_tail,
                        mechanism, mechanism_constant)
from .particle_system import Caps, run_ensemble

BINARY = BranchingSpec(law=make_binary(), beta=1.0)
STABLE = BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=1.0)
BM = lm.BrownianMotion(sigma2=1.0)
JD = lm.JumpDiffusion(sigma2=0.5, jump_rate=1.0, jump=lm.JumpLaw("laplace", 0.5))


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: float
    target: float
    tolerance: str
    runtime_s: float
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return (f"[{tag}] criterion {self.number:2d} {self.name}: "
                f"measured={self.measured:.6g} target={self.target:.6g} "
                f"tol={self.tolerance} ({self.runtime_s:.1f}s)")

    def as_record(self) -> dict:
        return {"criterion": self.number, "name": self.name,
                "passed": self.passed, "measured": self.measured,
                "target": self.target, "tolerance": self.tolerance,
                "runtime_s": round(self.runtime_s, 3), "detail": self.detail}


def _result(number, name, passed, measured, target, tolerance, t0, **detail):
    return CriterionResult(number=number, name=name, passed=bool(passed),
                           measured=float(measured), target=float(target),
                           tolerance=tolerance, runtime_s=time.time() - t0,
                           detail=detail)


def criterion_1(seed: int = 0) -> CriterionResult:
    """Motion-free survival against the exact closed form."""
    t0 = time.time()
    ts = np.array([1.0, 10.0, 100.0])
    got = gw_survival(BINARY, ts)
    err = float(np.max(np.abs(got - 2.0 / (2.0 + ts))))
    runtime = time.time() - t0
    return _result(1, "gw-survival-closed-form", err < 1e-8 and runtime < 1.0,
                   err, 0.0, "<1e-8, <1s", t0,
                   values=[float(v) for v in got])


def criterion_2(seed: int = 0) -> CriterionResult:
    """Far field of the self-similar profile equals the mass-extinction level."""
    t0 = time.time()
    worst = 0.0
    levels = {}
    for alpha, C in ((2.0, 0.5), (1.5, mechanism_constant(STABLE))):
        pde = solve_v_infinity(alpha, C, 1.0, 1.0)
        y_far = 0.9 * float(pde.grid[-1])
        target = csbp_extinction(alpha, C, 1.0)
        diff = abs(float(pde.value_at(1.0, y_far)) - target)
        worst = max(worst, diff)
        levels[f"alpha={alpha}"] = {"target": target, "diff": diff}
    runtime = time.time() - t0
    return _result(2, "mass-extinction-far-field",
                   worst < 1e-3 and runtime < 60.0, worst, 0.0,
                   "<1e-3, <1min", t0, **levels)


def criterion_3(seed: int = 0) -> CriterionResult:
    """Singular steady profile annihilates the reaction-diffusion operator."""
    t0 = time.time()
    h = 1.5e-3
    y = np.arange(0.0, 0.9 + h / 2, h)
    res = semilinear_residual(lambda s: 6.0 / (1.0 - s) ** 2, y, 2.0, 0.5, 1.0)
    sup = float(np.max(np.abs(res)))
    bound = 10.0 * h * h
    return _result(3, "singular-profile-residual", sup < bound, sup, bound,
                   "<10*h^2 on [0,0.9]", t0, h=h)


def criterion_4(seed: int = 0) -> CriterionResult:
    """Scaled survival functional of killed Brownian motion (constant f)."""
    t0 = time.time()
    out = lm.killed_clt_functional(BM, 1.0, 400.0,
                                   lambda z: np.ones_like(z), 1_000_000,
                                   seed=seed + 41)
    target = 2.0 / math.sqrt(2.0 * math.pi)
    dev = abs(out.value - target)
    runtime = time.time() - t0
    return _result(4, "killed-survival-functional",
                   dev <= 4.0 * out.std_err and runtime < 120.0, out.value,
                   target, "4 SE at n=1e6, <2min", t0,
                   std_err=out.std_err, dev_se=dev / out.std_err)


def criterion_5(seed: int = 0) -> CriterionResult:
    """Scaled exit-above odds: exact Brownian ratio, renewal plateau with jumps."""
    t0 = time.time()
    rows = lm.exit_up_asymptotic(BM, 0.3, 1.0, [3.0, 10.0, 30.0], 300_000,
                                 seed=seed + 51)
    dev_se = [abs(val - 0.3) / se for _, val, se in rows]
    bm_ok = all(d <= 3.0 for d in dev_se)
    r1 = lm.renewal_R(JD, 1.0, 150_000, seed=seed + 52)
    (x, val, se), = lm.exit_up_asymptotic(JD, 1.0, 1.0, [100.0], 60_000,
                                          seed=seed + 53)
    pooled = math.hypot(se, r1.std_err)
    jd_dev = abs(val - r1.value) / pooled
    return _result(5, "exit-above-asymptotics", bm_ok and jd_dev <= 3.0,
                   max(max(dev_se), jd_dev), 0.0, "3 SE each", t0,
                   brownian_dev_se=dev_se, renewal=r1.value,
                   jd_value=val, jd_dev_se=jd_dev)


def criterion_6(seed: int = 0) -> CriterionResult:
    """sqrt(t)-started survival at t=200 against the self-similar profile."""
    t0 = time.time()
    t = 200.0
    n = 10_000_000
    pde = solve_v_infinity(2.0, 0.5, 1.0, 1.0)
    target = float(n_measure_survival(pde, 1.0))
    # ~169 events per replica here; the budget must clear n times that
    ens = run_ensemble(BINARY, BM, math.sqrt(t), n_replicas=n,
                       seed=seed + 61,
                       caps=Caps(max_events=4_000_000_000, horizon=t),
                       exact_stamps=False)
    row = est.survival_tail(ens, "sqrt_t_scaled", 1.0, [t])[0]
    measured = t * row.value
    se = t * row.std_err
    dev = abs(measured - target)
    ok = dev <= 3.0 * se or dev <= 0.10 * target
    return _result(6, "scaled-survival-vs-profile", ok, measured, target,
                   "3 SE or 10% at n=1e7", t0, std_err=se,
                   dev_se=dev / se, rel_dev=dev / target, events=ens.events)


def criterion_7(seed: int = 0) -> CriterionResult:
    """Fixed-start survival: exponent -3/2 and linearity of the constant."""
    t0 = time.time()
    ts = [25.0, 50.0, 100.0, 200.0]
    n = 4_000_000
    scaled = {}
    slopes = {}
    for y0 in (1.0, 2.0):
        ens = run_ensemble(BINARY, BM, y0, n_replicas=n,
                           seed=seed + 71 + int(y0),
                           caps=Caps(max_events=1_000_000_000, horizon=200.0),
                           snapshot_times=(25.0, 50.0, 100.0),
                           exact_stamps=False)
        rows = est.survival_tail(ens, "fixed", y0, ts)
        fit = est.fit_exponent([(t, r.value, r.std_err)
                                for t, r in zip(ts, rows)])
        slopes[y0] = fit.slope
        last = rows[-1]
        scaled[y0] = (ts[-1] ** 1.5 * last.value, ts[-1] ** 1.5 * last.std_err)
    slope_ok = all(abs(s + 1.5) <= 0.15 for s in slopes.values())
    (s1, e1), (s2, e2) = scaled[1.0], scaled[2.0]
    ratio = s2 / s1
    ratio_se = ratio * math.hypot(e1 / s1, e2 / s2)
    ratio_ok = abs(ratio - 2.0) <= 3.0 * ratio_se
    worst_slope = max(slopes.values(), key=lambda s: abs(s + 1.5))
    return _result(7, "survival-exponent-and-linearity",
                   slope_ok and ratio_ok, worst_slope, -1.5,
                   "slope 0.15, ratio 3 SE", t0,
                   slopes={str(k): v for k, v in slopes.items()},
                   ratio=ratio, ratio_se=ratio_se)


def criterion_8(seed: int = 0) -> CriterionResult:
    """All-time-maximum tail constant: quadrature oracle, then plain MC at x=30.

    The MC leg compares the scaled tail at the fixed threshold x=30
    against the shooting limit. The exact finite-threshold value there
    (the boundary shifts the blow-up point by about sqrt(6)/x) sits 21%
    below the limit, so the 15% window cannot close at this x; the check
    is kept as stated and the gap is reported.
    """
    t0 = time.time()
    sol = shoot_K(2.0, 0.5, 1.0)
    theta = sol.slope_at_0
    integral, _ = quad(lambda u: 1.0 / math.sqrt(1.0 + (2.0 / 3.0) * u ** 3),
                       0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    oracle = integral ** 3
    shoot_ok = abs(theta - oracle) <= 1e-3 * oracle
    x = 30.0
    ens = run_ensemble(BINARY, BM, 1.0, n_replicas=10_000_000,
                       seed=seed + 81,
                       caps=Caps(max_events=2_000_000_000, horizon=3000.0),
                       levels=(x,), exact_stamps=False)
    row = est.max_tail(ens, "fixed", 1.0, [x])[0]
    measured = x ** 3 * row.value
    mc_ok = abs(measured - theta) <= 0.15 * theta
    return _result(8, "max-tail-constant", shoot_ok and mc_ok, measured,
                   theta, "shoot 0.1%, MC 15% at x=30 n=1e7", t0,
                   quadrature_oracle=oracle, slope=theta,
                   shoot_rel_err=abs(theta - oracle) / oracle,
                   mc_std_err=x ** 3 * row.std_err,
                   mc_rel_dev=abs(measured - theta) / theta,
                   finite_threshold_exact=26.1439)


def criterion_9(seed: int = 0) -> CriterionResult:
    """Threshold-scaled start: maximum tail plateau against the blow-up profile."""
    t0 = time.time()
    sol = shoot_K(2.0, 0.5, 1.0)
    target = float(sol.value_at(0.5))
    points = []
    rows = {}
    # ~1300-2000 events per replica at these thresholds
    for x, horizon, n, budget in (
            (70.0, 2000.0, 40_000, 300_000_000),
            (85.0, 2200.0, 100_000, 600_000_000),
            (110.0, 2200.0, 1_500_000, 8_000_000_000)):
        ens = run_ensemble(BINARY, BM, 0.5 * x, n_replicas=n,
                           seed=seed + 91 + int(x),
                           caps=Caps(max_events=budget, horizon=horizon),
                           levels=(x,), exact_stamps=False)
        row = est.max_tail(ens, "x_scaled", 0.5, [x])[0]
        points.append((x, x * x * row.value, x * x * row.std_err))
        rows[str(int(x))] = {"scaled": x * x * row.value,
                             "se": x * x * row.std_err,
                             "censored": row.censored_fraction}
    flat = est.plateau(points)
    rel = abs(flat.value - target) / target
    return _result(9, "scaled-max-tail-plateau", rel <= 0.15, flat.value,
                   target, "15% of blow-up profile at 0.5", t0,
                   rel_dev=rel, plateau_se=flat.std_err, points=rows)


def criterion_10(seed: int = 0) -> CriterionResult:
    """Conditional law of the scaled snapshot maximum against the PDE curve."""
    t0 = time.time()
    t = 400.0
    root = math.sqrt(t)
    ens = run_ensemble(BINARY, BM, root, n_replicas=3_000_000,
                       seed=seed + 101,
                       caps=Caps(max_events=3_000_000_000, horizon=t),
                       snapshot_times=(t,), exact_stamps=False)
    emp = est.yaglom_empirical(ens, t, "max")
    zs = np.linspace(0.1, 8.0, 80)
    cdf = yaglom_max_cdf(2.0, 0.5, 1.0, 1.0, zs)
    interp = PchipInterpolator(zs, cdf)

    def curve(z):
        return np.clip(interp(np.clip(z, zs[0], zs[-1])), 0.0, 1.0)

    ks = emp.ks_distance(curve)
    enough = emp.n >= 10_000
    return _result(10, "snapshot-max-conditional-law", enough and ks < 0.05,
                   ks, 0.0, "KS<0.05, >=1e4 survivors", t0,
                   survivors=emp.n)


def _merge_drift(states):
    a = est.merge(states)
    b = est.merge([est.merge(states[:2]), est.merge(states[2:])])
    c = est.merge(list(reversed(states)))
    vals = [s.estimate() for s in (a, b, c)]
    return max(abs(vals[0].value - v.value) + abs(vals[0].std_err - v.std_err)
               for v in vals[1:])


def criterion_11(seed: int = 0) -> CriterionResult:
    """Invariant suites: mechanism shape, rescaling, harmonicity,
    conservation, comparison, determinism/merge."""
    t0 = time.time()
    checks = {}

    v = np.linspace(0.0, 1.0, 401)
    worst = 0.0
    for spec in (BINARY, STABLE):
        phi = np.asarray(mechanism(spec, v))
        worst = max(worst, float(-phi.min()),
                    float(-np.diff(phi, 2).min()))
    checks["mechanism-nonneg-convex"] = (worst, 1e-10)

    drift = 0.0
    for alpha in (1.5, 2.0):
        base = csbp_extinction(alpha, 0.7, 3.0)
        for lam in (0.25, 4.0):
            scaled = csbp_extinction(alpha, 0.7, lam * 3.0)
            drift = max(drift, abs(scaled * lam ** (1.0 / (alpha - 1.0))
                                   - base) / base)
    full = shoot_K(2.0, 0.5, 1.0)
    half = shoot_K(2.0, 0.5, 1.0, blowup_at=0.5)
    drift = max(drift, abs(half.slope_at_0 - 8.0 * full.slope_at_0)
                / (8.0 * full.slope_at_0))
    drift = max(drift, abs(half.value_at(0.25) - 4.0 * full.value_at(0.5))
                / (4.0 * full.value_at(0.5)))
    checks["rescaling-identity"] = (drift, 1e-9)

    res_bm = abs(lm.harmonicity_residual(BM, 1.0, 1.0, 200_000,
                                         seed=seed + 111))
    res_jd = abs(lm.harmonicity_residual(JD, 5.0, 2.0, 20_000,
                                         seed=seed + 112))
    checks["harmonicity-brownian"] = (res_bm, 0.012)
    checks["harmonicity-jump"] = (res_jd, 0.08)

    cons = 0.0
    for alpha, C in ((2.0, 0.5), (1.5, mechanism_constant(STABLE))):
        sol = shoot_K(alpha, C, 1.0)
        ts, kv, kp = sol.meta["trajectory"]
        theta = sol.slope_at_0
        first = (0.25 * kp ** 2
                 - C / (alpha + 1.0) * kv ** (alpha + 1.0)
                 - 0.25 * theta ** 2)
        cons = max(cons, float(np.max(np.abs(first)
                                      / (1.0 + kv ** (alpha + 1.0)))))
    checks["first-integral"] = (cons, 1e-8)

    gp = GridParams(n_y=121, y_max=12.0, refine_check=False)
    grid = np.linspace(0.0, 12.0, 121)
    lo = 0.5 * np.exp(-((grid - 3.0) ** 2))
    hi = lo + 0.3
    a = solve_semilinear(lo, 2.0, 0.5, 1.0, 0.2, gp, store_times=(0.2,))
    b = solve_semilinear(hi, 2.0, 0.5, 1.0, 0.2, gp, store_times=(0.2,))
    checks["comparison-principle"] = (
        float(np.max(a.row(0.2) - b.row(0.2))), 1e-12)

    kwargs = dict(n_replicas=50_000, seed=seed + 113,
                  caps=Caps(horizon=50.0), snapshot_times=(25.0,),
                  levels=(5.0,), exact_stamps=False)
    e1 = run_ensemble(BINARY, BM, 2.0, **kwargs)
    e2 = run_ensemble(BINARY, BM, 2.0, **kwargs)
    same = (np.array_equal(e1.extinction_time, e2.extinction_time)
            and np.array_equal(e1.censored, e2.censored)
            and np.array_equal(e1.max_floor, e2.max_floor)
            and np.array_equal(e1.level_flags[5.0], e2.level_flags[5.0]))
    checks["determinism"] = (0.0 if same else 1.0, 0.5)

    rng = np.random.default_rng(seed + 114)
    states = []
    for _ in range(5):
        xs = rng.exponential(size=1000)
        s = est.MergeState()
        for chunk in np.array_split(xs, 4):
            s = s.add(chunk)
        states.append(s)
    # regrouping reorders float sums; anything past a few ulps is a bug
    checks["merge-associativity"] = (_merge_drift(states), 1e-12)

    violations = sum(1 for val, tol in checks.values() if val > tol)
    return _result(11, "invariant-suites", violations == 0, violations, 0.0,
                   "zero violations", t0,
                   **{k: {"value": v, "threshold": tol}
                      for k, (v, tol) in checks.items()})


CRITERIA = {i: fn for i, fn in enumerate(
    (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5,
     criterion_6, criterion_7, criterion_8, criterion_9, criterion_10,
     criterion_11), start=1)}


def run_all(numbers=None, seed: int = 0, echo=print) -> list:
    picked = sorted(CRITERIA) if numbers is None else sorted(numbers)
    results = []
    for k in picked:
        if k not in CRITERIA:
            raise ValueError(f"no criterion {k}")
        res = CRITERIA[k](seed=seed)
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
