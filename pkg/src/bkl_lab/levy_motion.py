"""Centered spatial motions: Brownian and compound-Poisson jump diffusion.

Killing and barrier crossings between jump epochs are resolved with the exact
bridge formulas from `bridges`, so Brownian configurations carry no
discretization bias at all. Far from every barrier the jump-diffusion walker
takes macro steps sized so the unseen crossing probability is below 1e-22 per
step; near a barrier it resolves every jump epoch.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import bridges
from .estimators import MergeState, TailEstimate, indicator_estimate
from .rng import stream

_MACRO_SD_RATIO = 10.0     # macro step keeps barrier 10 displacement-SDs away
_MACRO_GATE = 30.0         # enter macro mode beyond 30 per-gap SDs
_JUMP_GATE_SCALES = 150.0  # and beyond 150 jump scales


@dataclass(frozen=True)
class JumpLaw:
    kind: str
    scale: float
    declared_moment_order: float = 100.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "laplace"):
            raise ValueError(f"unknown jump law {self.kind!r}")
        if self.scale <= 0:
            raise ValueError("jump scale must be positive")

    def variance(self) -> float:
        return self.scale ** 2 if self.kind == "gaussian" else 2.0 * self.scale ** 2

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.normal(0.0, self.scale, n)
        return rng.laplace(0.0, self.scale, n)

    def compound_sum(self, rng: np.random.Generator, counts: np.ndarray) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(counts.size) * self.scale * np.sqrt(counts)
        # Laplace = difference of two exponentials, so the k-fold sum is a
        # difference of two Gamma(k) draws
        return (rng.standard_gamma(counts) - rng.standard_gamma(counts)) * self.scale


@dataclass(frozen=True)
class BrownianMotion:
    sigma2: float = 1.0

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("sigma2 must be positive")

    @property
    def total_variance(self) -> float:
        return self.sigma2


@dataclass(frozen=True)
class JumpDiffusion:
    sigma2: float
    jump_rate: float
    jump: JumpLaw

    def __post_init__(self):
        if self.sigma2 <= 0 or self.jump_rate < 0:
            raise ValueError("need sigma2 > 0 and jump_rate >= 0")

    @property
    def total_variance(self) -> float:
        return self.sigma2 + self.jump_rate * self.jump.variance()


LevyModel = Union[BrownianMotion, JumpDiffusion]


def model_to_json(model: LevyModel) -> dict:
    if isinstance(model, BrownianMotion):
        return {"variant": "brownian", "sigma2": model.sigma2}
    return {"variant": "jump_diffusion", "sigma2": model.sigma2,
            "jump_rate": model.jump_rate,
            "jump": {"kind": model.jump.kind, "scale": model.jump.scale,
                     "declared_moment_order": model.jump.declared_moment_order}}


def model_from_json(data: dict) -> LevyModel:
    variant = data["variant"]
    if variant == "brownian":
        return BrownianMotion(sigma2=float(data["sigma2"]))
    if variant == "jump_diffusion":
        j = data["jump"]
        return JumpDiffusion(sigma2=float(data["sigma2"]),
                             jump_rate=float(data["jump_rate"]),
                             jump=JumpLaw(kind=j["kind"], scale=float(j["scale"]),
                                          declared_moment_order=float(
                                              j.get("declared_moment_order", 100.0))))
    raise ValueError(f"unknown model variant {variant!r}")


def moment_certificate_ok(model: LevyModel, alpha: float) -> bool:
    """Declared moment order must exceed 2*alpha/(alpha-1)."""
    needed = 2.0 * alpha / (alpha - 1.0)
    if isinstance(model, BrownianMotion):
        return True
    return model.jump.declared_moment_order > needed


@dataclass(frozen=True)
class PassageRecord:
    time: np.ndarray
    overshoot: np.ndarray
    censored: np.ndarray


@dataclass(frozen=True)
class RaceRecord:
    """Outcome of running until the lower barrier, the upper barrier, or the
    horizon: side is 0 (lower), 1 (upper) or -1 (still running)."""
    side: np.ndarray
    time: np.ndarray
    position: np.ndarray


def _segmented_pieces(model: JumpDiffusion, x0: np.ndarray, dt: np.ndarray,
                      rng: np.random.Generator):
    """Split [0, dt] at jump epochs; return flat piece arrays plus row offsets."""
    m = x0.size
    counts = rng.poisson(model.jump_rate * dt)
    total = int(counts.sum())
    row = np.repeat(np.arange(m), counts)
    epochs = rng.random(total) * dt[row]
    order = np.lexsort((epochs, row))
    epochs = epochs[order]
    jumps = model.jump.sample(rng, total)

    pieces = counts + 1
    off = np.concatenate([[0], np.cumsum(pieces)])[:-1]
    total_pieces = int(pieces.sum())
    first_of_row = np.concatenate([[0], np.cumsum(counts)])[:-1]
    rank = np.arange(total) - first_of_row[row]

    t_end = np.empty(total_pieces)
    t_end[off + counts] = dt
    t_end[off[row] + rank] = epochs
    t_start = np.zeros(total_pieces)
    t_start[off[row] + rank + 1] = epochs
    dur = t_end - t_start

    inc = rng.standard_normal(total_pieces) * np.sqrt(model.sigma2 * dur)
    contrib = inc.copy()
    contrib[off[row] + rank] += jumps
    run = np.concatenate([[0.0], np.cumsum(contrib)])
    piece_row = np.repeat(np.arange(m), pieces)
    # run[p] holds contributions of all pieces before p globally; subtracting
    # the row prefix makes the first piece of each row start at x0
    start_pos = x0[piece_row] + run[:-1] - run[off][piece_row]
    end_pos = start_pos + inc
    return piece_row, off, pieces, dur, start_pos, end_pos


def sample_segment(model: LevyModel, x0, dt, rng: np.random.Generator):
    """Endpoint plus pathwise min and max over a duration-dt segment.

    Min and max are each exact in law given the endpoint; their joint law is
    not reproduced (independent uniforms drive the two reflections).
    """
    scalar = np.ndim(x0) == 0
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dt_arr = np.broadcast_to(np.asarray(dt, dtype=float), x0.shape).astype(float)
    if np.any(dt_arr <= 0):
        raise ValueError("dt must be positive")
    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        s = model.sigma2 * dt_arr
        end = x0 + rng.standard_normal(x0.size) * np.sqrt(s)
        mn = bridges.sample_min(x0, end, s, rng.random(x0.size))
        mx = bridges.sample_max(x0, end, s, rng.random(x0.size))
    else:
        piece_row, off, pieces, dur, start_pos, end_pos = _segmented_pieces(
            model, x0, dt_arr, rng)
        s = model.sigma2 * dur
        mn_piece = bridges.sample_min(start_pos, end_pos, s, rng.random(dur.size))
        mx_piece = bridges.sample_max(start_pos, end_pos, s, rng.random(dur.size))
        end = end_pos[off + pieces - 1]
        mn = np.minimum.reduceat(mn_piece, off)
        mx = np.maximum.reduceat(mx_piece, off)
    if scalar:
        return float(end[0]), float(mn[0]), float(mx[0])
    return end, mn, mx


def _walk(model: JumpDiffusion, y0: np.ndarray, upper: Optional[float],
          horizon: float, rng: np.random.Generator) -> RaceRecord:
    """Run each replica until it crosses 0, crosses `upper`, or reaches the
    horizon. Exact at jump epochs and bridge-exact between them; macro steps
    are used only while every barrier is many step-SDs away."""
    n = y0.size
    rate = model.jump_rate
    if rate <= 0:
        raise ValueError("walker needs a positive jump rate")
    gap = 1.0 / rate
    sig2 = model.sigma2
    tot_sd = np.sqrt(model.total_variance)
    gate = max(_MACRO_GATE * tot_sd * np.sqrt(gap), _JUMP_GATE_SCALES * model.jump.scale)

    pos = y0.astype(float).copy()
    t = np.zeros(n)
    side = np.full(n, -1, dtype=np.int8)
    out_t = np.full(n, float(horizon))
    out_pos = np.zeros(n)
    active = pos > 0.0
    if upper is not None:
        top_now = pos >= upper
        side[top_now] = 1
        out_t[top_now] = 0.0
        out_pos[top_now] = pos[top_now]
        active &= ~top_now
    dead_now = ~active & (side == -1)
    side[dead_now & (y0 <= 0)] = 0
    out_t[dead_now & (y0 <= 0)] = 0.0
    out_pos[dead_now & (y0 <= 0)] = y0[dead_now & (y0 <= 0)]

    while True:
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        p = pos[idx]
        remaining = horizon - t[idx]
        d = p if upper is None else np.minimum(p, upper - p)
        macro = d > gate

        if np.any(macro):
            mi = idx[macro]
            dm = d[macro]
            step = np.minimum((dm / _MACRO_SD_RATIO) ** 2 / model.total_variance,
                              remaining[macro])
            counts = rng.poisson(rate * step)
            inc = rng.standard_normal(mi.size) * np.sqrt(sig2 * step) + \
                model.jump.compound_sum(rng, counts)
            pos[mi] += inc
            t[mi] += step
            # crossing during a macro step has probability < 1e-22 by
            # construction; only the endpoint is checked
            low = pos[mi] <= 0.0
            if np.any(low):
                li = mi[low]
                side[li] = 0
                out_t[li] = t[li]
                out_pos[li] = pos[li]
                active[li] = False
            if upper is not None:
                hi = (pos[mi] >= upper) & ~low
                if np.any(hi):
                    ui = mi[hi]
                    side[ui] = 1
                    out_t[ui] = t[ui]
                    out_pos[ui] = pos[ui]
                    active[ui] = False
            done = t[mi] >= horizon
            still = done & active[mi]
            if np.any(still):
                ci = mi[still]
                out_pos[ci] = pos[ci]
                active[ci] = False

        fine = ~macro
        if not np.any(fine):
            continue
        fi = idx[fine]
        a = pos[fi]
        rem = remaining[fine]
        wait = rng.exponential(gap, fi.size)
        piece = np.minimum(wait, rem)
        s = sig2 * piece
        b = a + rng.standard_normal(fi.size) * np.sqrt(s)
        u = rng.random(fi.size)

        if upper is None:
            p_low = bridges.cross_prob(a, b, s)
            hit_low = u < p_low
            hit_top = np.zeros_like(hit_low)
        else:
            p_low = bridges.exit_bottom_prob(a, b, upper, s)
            p_top = bridges.exit_top_prob(a, b, upper, s)
            hit_low = u < p_low
            hit_top = (u >= p_low) & (u < p_low + p_top)

        if np.any(hit_low):
            li = fi[hit_low]
            # sub-piece hit time from the single-barrier bridge law
            tau = bridges.sample_passage_time(
                a[hit_low], np.abs(b[hit_low]), piece[hit_low], sig2,
                rng.random(li.size))
            side[li] = 0
            out_t[li] = t[li] + tau
            out_pos[li] = 0.0
            active[li] = False
        if np.any(hit_top):
            ui = fi[hit_top]
            tau = bridges.sample_passage_time(
                upper - a[hit_top], np.abs(upper - b[hit_top]), piece[hit_top],
                sig2, rng.random(ui.size))
            side[ui] = 1
            out_t[ui] = t[ui] + tau
            out_pos[ui] = float(upper)
            active[ui] = False

        survived = ~hit_low & ~hit_top
        jumped = survived & (wait < rem)
        if np.any(jumped):
            ji = fi[jumped]
            land = b[jumped] + model.jump.sample(rng, ji.size)
            t[ji] += piece[jumped]
            pos[ji] = land
            low = land <= 0.0
            if np.any(low):
                li = ji[low]
                side[li] = 0
                out_t[li] = t[li]
                out_pos[li] = land[low]
                active[li] = False
            if upper is not None:
                hi = (land >= upper) & ~low
                if np.any(hi):
                    ui = ji[hi]
                    side[ui] = 1
                    out_t[ui] = t[ui]
                    out_pos[ui] = land[hi]
                    active[ui] = False
        ended = survived & (wait >= rem)
        if np.any(ended):
            ci = fi[ended]
            out_pos[ci] = b[ended]
            t[ci] = horizon
            active[ci] = False

    return RaceRecord(side=side, time=out_t, position=out_pos)


def first_passage(model: LevyModel, x0, barrier: float, direction: str,
                  horizon: float, rng: np.random.Generator) -> PassageRecord:
    """First crossing of `barrier` from x0, exact in law; censored at horizon."""
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    y = (x0 - barrier) if direction == "down" else (barrier - x0)
    sign = 1.0 if direction == "up" else -1.0

    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        z = rng.standard_normal(y.size)
        with np.errstate(divide="ignore"):
            tau = np.where(y <= 0, 0.0, y * y / (model.sigma2 * z * z))
        censored = tau > horizon
        time = np.where(censored, horizon, tau)
        overshoot = np.zeros_like(tau)
        overshoot[y <= 0] = sign * (-y[y <= 0])
        overshoot = np.where(censored, np.nan, overshoot)
        return PassageRecord(time=time, overshoot=overshoot, censored=censored)

    rec = _walk(model, y, None, horizon, rng)
    censored = rec.side == -1
    # walker position at the crossing is <= 0 in shifted coordinates
    overshoot = np.where(censored, np.nan, sign * (-rec.position))
    return PassageRecord(time=rec.time, overshoot=overshoot, censored=censored)


def race(model: LevyModel, y0, lower: float, upper: float, horizon: float,
         rng: np.random.Generator) -> RaceRecord:
    """First barrier reached, lower vs upper, from y0 in between."""
    y0 = np.atleast_1d(np.asarray(y0, dtype=float)) - lower
    width = upper - lower
    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        # gambler's ruin: outcome Bernoulli(y/width); exact and horizon-free
        up = rng.random(y0.size) < y0 / width
        pos = np.where(up, upper, lower)
        return RaceRecord(side=up.astype(np.int8), time=np.zeros(y0.size), position=pos)
    rec = _walk(model, y0, width, horizon, rng)
    return RaceRecord(side=rec.side, time=rec.time, position=rec.position + lower)


def default_passage_horizon(model: LevyModel, x: float) -> float:
    """Horizon that keeps the censored fraction of a down passage near 1e-2."""
    return 4000.0 * max(x * x, 1.0) / model.total_variance


def renewal_R(model: LevyModel, x: float, n_samples: int, *, seed: int = 0,
              horizon: Optional[float] = None) -> TailEstimate:
    """Start-point minus mean position at first passage below 0."""
    if x < 0:
        raise ValueError("x must be >= 0")
    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        return TailEstimate(value=float(x), std_err=0.0, n=n_samples,
                            censored_fraction=0.0)
    rng = stream(seed, 0, "motion")
    horizon = default_passage_horizon(model, x) if horizon is None else horizon
    rec = _walk(model, np.full(n_samples, float(x)), None, horizon, rng)
    ok = rec.side == 0
    vals = x - rec.position[ok]
    state = MergeState().add(vals, censored=int(np.count_nonzero(~ok)))
    est = state.estimate()
    return TailEstimate(value=est.value, std_err=est.std_err, n=n_samples,
                        censored_fraction=float(np.count_nonzero(~ok)) / n_samples)


def _renewal_interpolant(model: JumpDiffusion, grid: np.ndarray, n_inner: int,
                         seed: int) -> Callable[[np.ndarray], np.ndarray]:
    values = np.array([renewal_R(model, g, n_inner, seed=seed + 17 * i).value
                       for i, g in enumerate(grid)])

    def interp(q: np.ndarray) -> np.ndarray:
        out = np.interp(q, grid, values)
        high = q > grid[-1]
        out[high] = values[-1] + (q[high] - grid[-1])  # unit slope far out
        return out

    return interp


def harmonicity_residual(model: LevyModel, x: float, s: float, n_samples: int,
                         *, seed: int = 0) -> float:
    """Renewal value at x minus its mean over survivors at time s; ~0."""
    rng = stream(seed, 1, "motion")
    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        sig = model.sigma2 * s
        end = x + rng.standard_normal(n_samples) * np.sqrt(sig)
        w = np.where(end > 0, 1.0 - bridges.cross_prob(x, np.maximum(end, 0.0), sig), 0.0)
        return float(x - np.mean(end * w))
    rec = _walk(model, np.full(n_samples, float(x)), None, s, rng)
    alive = rec.side == -1
    q = rec.position[alive]
    hi = max(float(q.max(initial=x)) * 1.2, x * 1.2)
    grid = np.concatenate([[0.0], np.geomspace(max(0.05 * x, 0.05), hi, 8)])
    interp = _renewal_interpolant(model, grid, max(n_samples // 4, 2000), seed + 1000)
    r_here = renewal_R(model, x, n_samples, seed=seed + 2000).value
    contrib = np.zeros(n_samples)
    contrib[alive] = interp(q)
    return float(r_here - contrib.mean())


def exit_up_asymptotic(model: LevyModel, y: float, z: float, x_values,
                       n_samples: int, *, seed: int = 0) -> list:
    """Scaled odds x * P(reach x*z before 0) per x; flattens to R(y)/z."""
    out = []
    for i, x in enumerate(x_values):
        x = float(x)
        b = x * z
        rng = stream(seed, 2 + i, "motion")
        horizon = default_passage_horizon(model, b)
        rec = race(model, np.full(n_samples, float(y)), 0.0, b, horizon, rng)
        p = float(np.count_nonzero(rec.side == 1)) / n_samples
        se = np.sqrt(p * (1.0 - p) / n_samples)
        out.append((x, x * p, x * se))
    return out


def killed_clt_functional(model: LevyModel, y: float, t: float,
                          f: Callable[[np.ndarray], np.ndarray], n_samples: int,
                          *, seed: int = 0) -> TailEstimate:
    """sqrt(t) * mean of f(position/(sigma sqrt(t))) over paths alive at t."""
    rng = stream(seed, 3, "motion")
    sig = np.sqrt(model.total_variance)
    if isinstance(model, BrownianMotion) or model.jump_rate == 0.0:
        svar = model.sigma2 * t
        end = y + rng.standard_normal(n_samples) * np.sqrt(svar)
        w = np.where(end > 0, 1.0 - bridges.cross_prob(y, np.maximum(end, 0.0), svar), 0.0)
        vals = np.sqrt(t) * np.asarray(f(end / (sig * np.sqrt(t)))) * w
    else:
        rec = _walk(model, np.full(n_samples, float(y)), None, t, rng)
        alive = rec.side == -1
        vals = np.zeros(n_samples)
        vals[alive] = np.sqrt(t) * np.asarray(f(rec.position[alive] / (sig * np.sqrt(t))))
    est = MergeState().add(vals).estimate()
    return TailEstimate(value=est.value, std_err=est.std_err, n=n_samples,
                        censored_fraction=0.0)
