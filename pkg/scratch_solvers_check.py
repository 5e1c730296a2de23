"""Dev driver: independent oracles vs the solver modules."""
import math
import time

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from bkl_lab.limit_solvers import (GridParams, constant_C0inf, csbp_extinction,
                                   eta1_laplace, gw_survival,
                                   n_measure_survival, semilinear_residual,
                                   shoot_K, solve_semilinear, solve_v_infinity,
                                   yaglom_max_cdf)
from bkl_lab.offspring import BranchingSpec, make_binary, make_stable_tail, \
    mechanism_constant

t0 = time.time()


def clock(tag):
    print(f"  [{time.time() - t0:7.2f}s] {tag}")


# ---- oracle 1: theta via 1-D quadrature (independent of the shooter) ----
def theta_oracle(alpha, C, sigma2, loc=1.0):
    c = 4.0 * C / (sigma2 * (alpha + 1.0))
    J, Jerr = quad(lambda u: 1.0 / math.sqrt(1.0 + u ** (alpha + 1.0)),
                   0.0, np.inf, epsabs=1e-14, epsrel=1e-13, limit=400)
    theta = (J ** (alpha + 1.0) / c) ** (1.0 / (alpha - 1.0))
    return theta * loc ** (-(alpha + 1.0) / (alpha - 1.0)), J, Jerr


th2, J2, _ = theta_oracle(2.0, 0.5, 1.0)
I = quad(lambda u: 1.0 / math.sqrt(1.0 + (2.0 / 3.0) * u ** 3), 0.0, np.inf,
         epsabs=1e-14, epsrel=1e-13, limit=400)[0]
print(f"oracle theta(2): J-form {th2!r}  I^3 {I**3!r}  I {I!r}")

# ---- oracle 2: K(0.5) via the conserved quantity, no ODE stepping ----
def K_oracle(alpha, C, sigma2, ypt, theta):
    c = 4.0 * C / (sigma2 * (alpha + 1.0))
    sk = (theta ** 2 / c) ** (1.0 / (alpha + 1.0))

    def F(U):  # int_0^U du / sqrt(1 + u^(alpha+1)), split for large U
        hi = min(U, 50.0)
        val = quad(lambda u: 1.0 / math.sqrt(1.0 + u ** (alpha + 1.0)),
                   0.0, hi, epsabs=1e-14, epsrel=1e-12, limit=400,
                   points=[1.0, 10.0])[0]
        if U > hi:
            val += quad(lambda u: 1.0 / math.sqrt(1.0 + u ** (alpha + 1.0)),
                        hi, U, epsabs=1e-14, epsrel=1e-12, limit=400)[0]
        return val

    def y_of_K(K):
        return sk / theta * F(K / sk)

    return brentq(lambda K: y_of_K(K) - ypt, 1e-12, 1e9, xtol=1e-13, rtol=1e-14)


K_half_oracle = K_oracle(2.0, 0.5, 1.0, 0.5, th2)
print(f"oracle K(0.5) alpha=2: {K_half_oracle!r}")
clock("oracles done")

# ---- shooter vs oracles ----
sh = shoot_K(2.0, 0.5, 1.0)
print(f"shoot theta {sh.slope_at_0!r} rel err {abs(sh.slope_at_0-th2)/th2:.2e} "
      f"loc {sh.blowup_location!r} iters {sh.meta['iterations']}")
print(f"shoot K(0.5) {sh.value_at(0.5)!r} rel err "
      f"{abs(sh.value_at(0.5)-K_half_oracle)/K_half_oracle:.2e}")
print(f"K(1e-4)/1e-4 vs theta: {abs(sh.value_at(1e-4)/1e-4 - sh.slope_at_0):.2e}")
fi = 0.25 * 1.0 * sh.K_prime ** 2 - (0.5 / 3.0) * sh.K_values ** 3 \
    - 0.25 * sh.slope_at_0 ** 2
upto = sh.switch_index + 1
bound = 1e-8 * (1.0 + sh.K_values[:upto] ** 3)
print(f"first-integral max viol (pre-switch): "
      f"{np.max(np.abs(fi[:upto]) / bound):.3e} (must be < 1)")
clock("shooter alpha=2")

C15 = mechanism_constant(BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=1.0))
print(f"C(1.5) = {C15!r} vs 2sqrt(pi)/3 = {2*math.sqrt(math.pi)/3!r}")
th15, _, _ = theta_oracle(1.5, C15, 1.0)
sh15 = shoot_K(1.5, C15, 1.0)
print(f"shoot theta(1.5) {sh15.slope_at_0!r} oracle {th15!r} "
      f"rel {abs(sh15.slope_at_0-th15)/th15:.2e}")
K15_half = sh15.value_at(0.5)
print(f"K_1.5(0.5) = {K15_half!r}")
clock("shooter alpha=1.5")

# ---- scaling identity: blow-up at z vs rescaled profile ----
z = 0.5
shz = shoot_K(2.0, 0.5, 1.0, blowup_at=z)
pts = np.array([0.1, 0.2, 0.3, 0.4])
lhs = shz.value_at(pts)
rhs = z ** -2.0 * sh.value_at(pts / z)
print(f"scaling identity max rel err: {np.max(np.abs(lhs/rhs - 1)):.2e}")
clock("scaling")

# ---- gw survival ----
spec_bin = BranchingSpec(law=make_binary(), beta=1.0)
for t in (1.0, 10.0, 100.0):
    err = abs(gw_survival(spec_bin, t) - 2.0 / (2.0 + t))
    print(f"gw binary t={t}: err {err:.2e}")
spec15 = BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=1.0)
u = gw_survival(spec15, np.array([1e3, 1e4]))
scaled = np.array([1e3, 1e4]) ** 2.0 * u
limit = ((1.5 - 1.0) * C15) ** (-1.0 / 0.5)
print(f"gw stable scaled: {scaled} vs limit {limit:.6f} "
      f"ratio drift {abs(scaled[1]/scaled[0]-1):.4f}")
clock("gw")

# ---- csbp ----
print(f"csbp(2, .5, 1) = {csbp_extinction(2.0, 0.5, 1.0)} (want 2)")

# ---- singular steady profile residual ----
h = 1.5e-3
ygrid = np.arange(0.0, 0.9 + h / 2, h)
res = semilinear_residual(lambda yy: 6.0 / (1.0 - yy) ** 2, ygrid,
                          2.0, 0.5, 1.0)
print(f"singular residual sup {np.max(np.abs(res)):.3e} vs 10h^2 "
      f"{10*h*h:.3e}")
clock("residual")

# ---- v_infinity alpha=2 ----
store = (0.92, 0.96, 0.98, 0.99, 1.0)
v2 = solve_v_infinity(2.0, 0.5, 1.0, 1.0, store_times=store)
far = v2.value_at(1.0, 0.9 * v2.meta["y_max"])
print(f"v_inf(1, 0.9 ymax) = {far!r} err {abs(far-2.0):.2e}")
print(f"v_inf(1,1) = {n_measure_survival(v2, 1.0)!r}")
print(f"meta: delta0 {v2.meta['delta0']:.2e} halvings {v2.meta['delta_halvings']} "
      f"refine_diff {v2.meta.get('refine_sup_diff'):.2e} steps {v2.meta['steps']}")
row1 = v2.row(1.0)
print(f"monotone in y: {np.all(np.diff(row1) >= -1e-10)}; v(1,0)={row1[0]}")
clock("v_inf alpha=2")

# ---- v_infinity alpha=1.5 ----
v15 = solve_v_infinity(1.5, C15, 1.0, 1.0)
far15 = v15.value_at(1.0, 0.9 * v15.meta["y_max"])
want15 = ((1.5 - 1.0) * C15) ** (-2.0)
print(f"v_inf15 far {far15!r} want {want15!r} err {abs(far15-want15):.2e}")
print(f"v_inf15 meta: delta0 {v15.meta['delta0']:.2e} "
      f"refine {v15.meta.get('refine_sup_diff'):.2e}")
clock("v_inf alpha=1.5")

# ---- self-similarity ----
for r in (0.25, 4.0):
    gp_r = GridParams(y_max=12.0 * math.sqrt(r))
    vr = solve_v_infinity(2.0, 0.5, 1.0, r, gp_r)
    ys = np.linspace(0.2, 5.0, 25) * math.sqrt(r)
    lhs = vr.value_at(r, ys)
    rhs = (1.0 / r) * np.array([v2.value_at(1.0, float(yy)) for yy in ys / math.sqrt(r)])
    print(f"self-similarity r={r}: sup abs diff {np.max(np.abs(lhs-rhs)):.3e}")
clock("self-similarity")

# ---- constant_C0inf ----
c0, diag = constant_C0inf(v2, 1.0, (0.04, 0.02, 0.01), full=True)
print(f"C0inf(2) = {c0!r} order {diag['order']:.3f} extrapolants "
      f"{diag['extrapolants']}")
c0b, diagb = constant_C0inf(v2, 1.0, (0.08, 0.04, 0.02), full=True)
print(f"C0inf(2) other triple = {c0b!r} rel gap {abs(c0b-c0)/c0:.3%}")
clock("C0inf")

# ---- eta1_laplace ----
pde0 = solve_semilinear(lambda yy: np.zeros_like(yy), 2.0, 0.5, 1.0, 1.0,
                        store_times=(0.96, 0.98, 0.99))
print(f"eta1(f=0) = {eta1_laplace(pde0, c0, 1.0)!r} (want 1)")
for eps in (0.5, 0.05):
    pde_eps = solve_semilinear(lambda yy: eps * np.minimum(yy, 1.0), 2.0, 0.5,
                               1.0, 1.0, store_times=(0.96, 0.98, 0.99))
    print(f"eta1(f=eps*min(y,1)), eps={eps}: {eta1_laplace(pde_eps, c0, 1.0)!r}")
clock("eta1")

# ---- yaglom ----
zs = np.array([0.05, 0.5, 1.0, 2.0, 4.0])
cdf = yaglom_max_cdf(2.0, 0.5, 1.0, 1.0, zs)
print(f"yaglom cdf at {zs}: {cdf}")
print(f"monotone: {np.all(np.diff(cdf) >= -1e-9)}")
clock("yaglom")

# ---- far-field constant-data ODE tracking ----
gp_small = GridParams(y_max=12.0)
pc = solve_semilinear(lambda yy: np.full_like(yy, 3.0), 2.0, 0.5, 1.0, 0.1,
                      gp_small)
ode_val = 3.0 / (1.0 + 0.5 * 0.1 * 3.0)   # exact for u' = -C u^2
mid = pc.value_at(0.1, 6.0)
print(f"constant-data mid value {mid!r} vs ode {ode_val!r} "
      f"err {abs(mid-ode_val):.2e}")
clock("done")
