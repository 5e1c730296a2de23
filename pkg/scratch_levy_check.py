import time as _time
import numpy as np
from scipy.stats import kstest, norm
from bkl_lab import levy_motion as lm
from bkl_lab.rng import stream

bm = lm.BrownianMotion(sigma2=1.0)
jd = lm.JumpDiffusion(sigma2=0.5, jump_rate=1.0, jump=lm.JumpLaw("laplace", 0.5))
print("jd total var:", jd.total_variance)  # 0.5 + 1*2*0.25 = 1.0

rng = stream(1, 0, "motion")

# 1. Brownian segment: P(min > 0 from x0=1 over t) = 2*Phi(1/sqrt(t)) - 1
n = 200_000
t = 0.7
end, mn, mx = lm.sample_segment(bm, np.full(n, 1.0), t, rng)
want = 2 * norm.cdf(1 / np.sqrt(t)) - 1
print("P(min>0):", (mn > 0).mean(), "want", want)
assert np.all(mn <= np.minimum(1.0, end) + 1e-12) and np.all(mx >= np.maximum(1.0, end) - 1e-12)
print("end mean/var:", end.mean() - 1, end.var(), "want 0,", t)

# 2. JD segment moments + min/max ordering
end2, mn2, mx2 = lm.sample_segment(jd, np.full(n, 1.0), t, rng)
print("jd end mean/var:", end2.mean() - 1, end2.var(), "want 0,", jd.total_variance * t)
assert np.all(mn2 <= np.minimum(1.0, end2) + 1e-12) and np.all(mx2 >= np.maximum(1.0, end2) - 1e-12)

# 3. JD with rate 0 == Brownian (same law)
jd0 = lm.JumpDiffusion(sigma2=1.0, jump_rate=0.0, jump=lm.JumpLaw("laplace", 0.5))
e3, m3, _ = lm.sample_segment(jd0, np.full(50_000, 1.0), t, rng)
print("rate0 vs brownian end KS:", kstest(e3, lambda q: norm.cdf(q, 1.0, np.sqrt(t))).pvalue)

# 4. first_passage Brownian: tau law = y^2/(sigma^2 Z^2); check CDF P(tau<=u)=2(1-Phi(y/sqrt(u)))
rec = lm.first_passage(bm, np.full(n, 2.0), 0.0, "down", 1e8, rng)
u0 = 3.0
print("P(tau<=3):", (rec.time <= u0).mean(), "want", 2 * (1 - norm.cdf(2 / np.sqrt(u0))))
assert np.all(rec.overshoot[~rec.censored] == 0)

# 5. race Brownian: P(up) = y/b
r = lm.race(bm, np.full(n, 0.3), 0.0, 1.0, 1e6, rng)
print("race up prob:", (r.side == 1).mean(), "want 0.3")
print("stopped mean:", r.position.mean(), "want 0.3")

# 6. JD renewal at small x; timing at x=10
t0 = _time.time()
for x in [0.0, 1.0, 10.0]:
    est = lm.renewal_R(jd, x, 20_000, seed=3)
    print(f"renewal R({x}) = {est.value:.4f} +- {est.std_err:.4f} censored {est.censored_fraction:.4f}")
print("renewal timing:", _time.time() - t0)

# 7. killed CLT Brownian
est = lm.killed_clt_functional(bm, 1.0, 400.0, lambda z: np.ones_like(z), 200_000, seed=5)
print("killed clt:", est.value, "+-", est.std_err, "want", 2 / np.sqrt(2 * np.pi),
      " (finite-t bias ~ y/sqrt(t))")

# 8. martingale optional stopping for JD race
rj = lm.race(jd, np.full(30_000, 0.3), 0.0, 1.0, 1e5, stream(2, 0, "motion"))
print("jd race mean stopped pos:", rj.position.mean(), "se",
      rj.position.std() / np.sqrt(30_000), "(want 0.3)")
print("jd race censored:", (rj.side == -1).mean())

# 9. harmonicity residual Brownian
res = lm.harmonicity_residual(bm, 1.0, 1.0, 300_000, seed=7)
print("harmonicity residual brownian:", res, "(want ~0, se~0.002)")

# 10. JD first passage overshoot sign + moment
t0 = _time.time()
recj = lm.first_passage(jd, np.full(20_000, 1.0), 0.0, "down", 1e6, rng)
ok = ~recj.censored
print("jd overshoot mean:", recj.overshoot[ok].mean(), "max:", recj.overshoot[ok].max(),
      "censored:", (~ok).mean(), "time:", _time.time() - t0)
assert np.all(recj.overshoot[ok] <= 1e-12)
