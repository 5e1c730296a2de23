"""Pilot runs sizing the acceptance-criterion ensembles."""
import time

import numpy as np

from bkl_lab import estimators as est
from bkl_lab import levy_motion as lm
from bkl_lab.offspring import BranchingSpec, make_binary
from bkl_lab.particle_system import Caps, run_ensemble

BIN = BranchingSpec(make_binary(), beta=1.0)
BM = lm.BrownianMotion(sigma2=1.0)


def stamp(tag, t0, ens=None):
    extra = f" events={ens.events:.3g}" if ens is not None else ""
    print(f"[{time.time() - t0:7.1f}s] {tag}{extra}", flush=True)


t0 = time.time()

# C6 pilot: sqrt(t)-started survival at t=200
n = 200_000
ens = run_ensemble(BIN, BM, float(np.sqrt(200.0)), n_replicas=n, seed=601,
                   caps=Caps(horizon=200.0), exact_stamps=False)
row = est.survival_tail(ens, "sqrt_t_scaled", 1.0, [200.0])[0]
stamp(f"C6 n={n}: 200*P={200 * row.value:.4f} +- {200 * row.std_err:.4f}", t0, ens)

# C8b pilot: fixed start 1, level 30
n = 1_000_000
ens = run_ensemble(BIN, BM, 1.0, n_replicas=n, seed=801,
                   caps=Caps(horizon=3000.0), levels=(30.0,),
                   exact_stamps=False)
row = est.max_tail(ens, "fixed", 1.0, [30.0])[0]
stamp(f"C8b n={n}: 27000*P={27000 * row.value:.3f} +- {27000 * row.std_err:.3f} "
      f"cens={row.censored_fraction:.2e} (exact 26.144)", t0, ens)

# C9 pilots: x-scaled start y=0.5 at three thresholds
for x, H, n in ((70.0, 2000.0, 20_000), (85.0, 2200.0, 20_000),
                (110.0, 2200.0, 50_000)):
    ens = run_ensemble(BIN, BM, 0.5 * x, n_replicas=n, seed=int(900 + x),
                       caps=Caps(horizon=H), levels=(x,), exact_stamps=False)
    row = est.max_tail(ens, "x_scaled", 0.5, [x])[0]
    stamp(f"C9 x={x} H={H} n={n}: x^2*P={x * x * row.value:.3f} "
          f"+- {x * x * row.std_err:.3f} cens={row.censored_fraction:.2e}",
          t0, ens)

# C10 pilot: snapshot max at the horizon
n = 100_000
ens = run_ensemble(BIN, BM, 20.0, n_replicas=n, seed=1001,
                   caps=Caps(horizon=400.0), snapshot_times=(400.0,),
                   exact_stamps=False)
emp = est.yaglom_empirical(ens, 400.0, "max")
q = np.quantile(emp.values, [0.1, 0.5, 0.9])
stamp(f"C10 n={n}: survivors={emp.n} quantiles={np.round(q, 3)}", t0, ens)

# C7 pilot: fixed starts 1 and 2
for y0 in (1.0, 2.0):
    n = 400_000
    ens = run_ensemble(BIN, BM, y0, n_replicas=n, seed=int(700 + y0),
                       caps=Caps(horizon=200.0),
                       snapshot_times=(25.0, 50.0, 100.0), exact_stamps=False)
    rows = est.survival_tail(ens, "fixed", y0, [25.0, 50.0, 100.0, 200.0])
    scaled = [t ** 1.5 * r.value for t, r in zip((25, 50, 100, 200), rows)]
    stamp(f"C7 y={y0} n={n}: t^1.5*P={np.round(scaled, 3)}", t0, ens)

# C4 timing
t4 = time.time()
ks = lm.killed_clt_functional(BM, 1.0, 400.0, lambda z: np.ones_like(z),
                              1_000_000, seed=401)
print(f"C4 n=1e6: {ks.value:.5f} +- {ks.std_err:.5f} "
      f"({time.time() - t4:.1f}s)", flush=True)

# C5 timing
t5 = time.time()
out = lm.exit_up_asymptotic(BM, 0.3, 1.0, [3.0, 10.0, 30.0], 200_000, seed=501)
print(f"C5 BM: {[(x, round(v, 4), round(s, 4)) for x, v, s in out]} "
      f"({time.time() - t5:.1f}s)", flush=True)
t5 = time.time()
JD = lm.JumpDiffusion(sigma2=0.5, jump_rate=1.0, jump=lm.JumpLaw("laplace", 0.5))
r1 = lm.renewal_R(JD, 1.0, 100_000, seed=502)
out = lm.exit_up_asymptotic(JD, 1.0, 1.0, [100.0], 40_000, seed=503)
print(f"C5 JD: renewal={r1.value:.4f}+-{r1.std_err:.4f} "
      f"exit={out[0][1]:.4f}+-{out[0][2]:.4f} ({time.time() - t5:.1f}s)",
      flush=True)
print(f"total {time.time() - t0:.1f}s", flush=True)
