"""Second pilot: C10 KS mid-scale, C7 fit, C4/C5 timings."""
import math
import time

import numpy as np
from scipy.interpolate import PchipInterpolator

from bkl_lab import estimators as est
from bkl_lab import levy_motion as lm
from bkl_lab.limit_solvers import yaglom_max_cdf
from bkl_lab.offspring import BranchingSpec, make_binary
from bkl_lab.particle_system import Caps, run_ensemble

BIN = BranchingSpec(make_binary(), beta=1.0)
BM = lm.BrownianMotion(sigma2=1.0)
t0 = time.time()

ens = run_ensemble(BIN, BM, 20.0, n_replicas=1_200_000, seed=1001,
                   caps=Caps(max_events=1_200_000_000, horizon=400.0),
                   snapshot_times=(400.0,), exact_stamps=False)
print(f"C10 events={ens.events:.3g} ({time.time() - t0:.1f}s)", flush=True)
emp = est.yaglom_empirical(ens, 400.0, "max")
tc = time.time()
zs = np.linspace(0.1, 8.0, 80)
cdf = yaglom_max_cdf(2.0, 0.5, 1.0, 1.0, zs)
interp = PchipInterpolator(zs, cdf)
ks = emp.ks_distance(
    lambda z: np.clip(interp(np.clip(z, zs[0], zs[-1])), 0.0, 1.0))
print(f"C10 n=1.2e6: survivors={emp.n} KS={ks:.4f} "
      f"(curve {time.time() - tc:.1f}s, total {time.time() - t0:.1f}s)",
      flush=True)

for y0 in (1.0, 2.0):
    tt = time.time()
    n = 4_000_000
    ens = run_ensemble(BIN, BM, y0, n_replicas=n, seed=int(700 + y0),
                       caps=Caps(max_events=1_000_000_000, horizon=200.0),
                       snapshot_times=(25.0, 50.0, 100.0), exact_stamps=False)
    print(f"C7 y={y0} events={ens.events:.3g}", flush=True)
    ts = [25.0, 50.0, 100.0, 200.0]
    rows = est.survival_tail(ens, "fixed", y0, ts)
    fit = est.fit_exponent([(t, r.value, r.std_err) for t, r in zip(ts, rows)])
    scaled = [round(t ** 1.5 * r.value, 4) for t, r in zip(ts, rows)]
    se200 = ts[-1] ** 1.5 * rows[-1].std_err
    print(f"C7 y={y0} n={n}: slope={fit.slope:.4f} scaled={scaled} "
          f"se200={se200:.4f} ({time.time() - tt:.1f}s)", flush=True)

tt = time.time()
out = lm.killed_clt_functional(BM, 1.0, 400.0, lambda z: np.ones_like(z),
                               1_000_000, seed=41)
print(f"C4: {out.value:.5f}+-{out.std_err:.5f} vs {2/math.sqrt(2*math.pi):.5f}"
      f" ({time.time() - tt:.1f}s)", flush=True)

tt = time.time()
rows = lm.exit_up_asymptotic(BM, 0.3, 1.0, [3.0, 10.0, 30.0], 300_000, seed=51)
print("C5 BM:", [(x, round(v, 4), round(s, 4)) for x, v, s in rows],
      f"({time.time() - tt:.1f}s)", flush=True)
tt = time.time()
JD = lm.JumpDiffusion(sigma2=0.5, jump_rate=1.0, jump=lm.JumpLaw("laplace", 0.5))
r1 = lm.renewal_R(JD, 1.0, 150_000, seed=52)
out = lm.exit_up_asymptotic(JD, 1.0, 1.0, [100.0], 60_000, seed=53)
print(f"C5 JD: renewal={r1.value:.4f}+-{r1.std_err:.4f} "
      f"exit100={out[0][1]:.4f}+-{out[0][2]:.4f} ({time.time() - tt:.1f}s)",
      flush=True)
print(f"total {time.time() - t0:.1f}s", flush=True)
