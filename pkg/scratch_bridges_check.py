import numpy as np
from bkl_lab import bridges

rng = np.random.default_rng(7)
sigma2, T = 1.3, 0.9
a, b, h = 0.7, 0.5, 1.4
s = sigma2 * T

cp = float(bridges.cross_prob(a, b, s))
q_img = float(bridges.stay_in_strip_prob(a, b, h, s))
eb = float(bridges.exit_bottom_prob(a, b, h, s))
et = float(bridges.exit_top_prob(a, b, h, s))

nsteps, npaths, chunk = 6000, 200_000, 4_000
dt = T / nsteps
t_grid = np.linspace(0, T, nsteps + 1)

n_hit0 = n_stay = n_eb = n_et = 0
taus = []
mx_before_all = []
mins_all = []
maxs_all = []
maxs_alive = []
for _ in range(npaths // chunk):
    W = np.cumsum(np.sqrt(sigma2 * dt) * rng.standard_normal((chunk, nsteps)), axis=1)
    W = np.concatenate([np.zeros((chunk, 1)), W], axis=1)
    B = a + (b - a) * (t_grid / T)[None, :] + W - (t_grid / T)[None, :] * W[:, -1][:, None]
    mins = B.min(axis=1)
    maxs = B.max(axis=1)
    hit0 = mins <= 0
    hith = maxs >= h
    idx0 = np.where(hit0, np.argmax(B <= 0, axis=1), nsteps + 1)
    idxh = np.where(hith, np.argmax(B >= h, axis=1), nsteps + 1)
    n_hit0 += hit0.sum()
    n_stay += (~hit0 & ~hith).sum()
    n_eb += (hit0 & (idx0 < idxh)).sum()
    n_et += (hith & (idxh < idx0)).sum()
    taus.append(t_grid[np.minimum(idx0[hit0], nsteps)])
    kill_rows = np.where(hit0)[0][:2000]
    mx_before_all.append(np.array([B[i, :idx0[i] + 1].max() for i in kill_rows]))
    mins_all.append(mins)
    maxs_all.append(maxs)
    maxs_alive.append(maxs[~hit0])

taus = np.concatenate(taus)
mx_before = np.concatenate(mx_before_all)
mins = np.concatenate(mins_all)
maxs = np.concatenate(maxs_all)
mx_alive = np.concatenate(maxs_alive)

print("MC cross:", n_hit0 / npaths, "exact:", cp)
print("MC stay:", n_stay / npaths, "exact:", q_img)
print("MC exit_bottom:", n_eb / npaths, "exact:", eb)
print("MC exit_top:", n_et / npaths, "exact:", et)

for t_star in [0.2, 0.45, 0.7]:
    print(f"MC passage cdf {t_star}:", (taus <= t_star).mean(),
          "exact:", float(bridges.passage_time_cdf(t_star, a, b, T, sigma2)))

tau_m = taus[: len(mx_before)]
for hq in [0.9, 1.2, 1.6]:
    exact = bridges.first_passage_max_cdf(hq, a, sigma2 * tau_m).mean()
    print(f"MC max-before-passage P(<= {hq}):", (mx_before <= hq).mean(), "exact-avg:", float(exact))

u = rng.random(200_000)
smin = bridges.sample_min(a, b, s, u)
smax = bridges.sample_max(a, b, s, u)
for lev in [0.2, 0.0, -0.3]:
    print(f"P(min <= {lev}): sampled={(smin <= lev).mean():.4f} MC={(mins <= lev).mean():.4f}")
for lev in [0.9, 1.2, 1.8]:
    print(f"P(max >= {lev}): sampled={(smax >= lev).mean():.4f} MC={(maxs >= lev).mean():.4f}")

n_alive = len(mx_alive)
smax_alive = bridges.sample_max_given_alive(
    np.full(n_alive, a), np.full(n_alive, b), np.full(n_alive, s), rng.random(n_alive))
print("alive-max pct sampled:", np.percentile(smax_alive, [25, 50, 75, 95]))
print("alive-max pct MC     :", np.percentile(mx_alive, [25, 50, 75, 95]))

smax_killed = bridges.sample_max_before_passage(
    np.full(len(tau_m), a), sigma2 * tau_m, rng.random(len(tau_m)))
print("killed-max pct sampled:", np.percentile(smax_killed, [25, 50, 75, 95]))
print("killed-max pct MC     :", np.percentile(mx_before, [25, 50, 75, 95]))

up = rng.random(100_000)
tsamp = bridges.sample_passage_time(np.full(100_000, a), np.full(100_000, b), T, sigma2, up)
back = bridges.passage_time_cdf(tsamp, np.full(100_000, a), np.full(100_000, b), T, sigma2)
print("inversion max |F(t)-u|:", np.abs(back - up).max())

# regime sweep for exit_bottom with endpoint outside strip (b >= h and b <= 0 cases)
for (aa, bb, hh) in [(0.4, 1.9, 1.4), (1.1, -0.4, 1.4), (0.05, 0.6, 0.8)]:
    nn = 400_000
    stp = 3000
    dtt = T / stp
    tg = np.linspace(0, T, stp + 1)
    got = 0
    tot = 0
    for _ in range(40):
        m = nn // 40
        Wc = np.cumsum(np.sqrt(sigma2 * dtt) * rng.standard_normal((m, stp)), axis=1)
        Wc = np.concatenate([np.zeros((m, 1)), Wc], axis=1)
        Bc = aa + (bb - aa) * (tg / T)[None, :] + Wc - (tg / T)[None, :] * Wc[:, -1][:, None]
        h0 = (Bc <= 0).any(axis=1)
        hh_ = (Bc >= hh).any(axis=1)
        i0 = np.where(h0, np.argmax(Bc <= 0, axis=1), stp + 2)
        ih = np.where(hh_, np.argmax(Bc >= hh, axis=1), stp + 2)
        got += (h0 & (i0 < ih)).sum()
        tot += m
    print(f"exit_bottom a={aa} b={bb} h={hh}: MC={got/tot:.5f} exact={float(bridges.exit_bottom_prob(aa,bb,hh,s)):.5f}")
