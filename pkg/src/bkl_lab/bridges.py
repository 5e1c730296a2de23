"""Exact Brownian-bridge functionals used by every sampler.

All probabilities are conditional on the two endpoints of a Brownian segment
with total variance s = sigma2 * dt. Image/reflection series are truncated
when the next term is below 1e-18 of the running value; with the strip widths
used here that is 3-5 images.

Conventions: the lower barrier is 0 (shift before calling), `a` is the start
point, `b` the end point, `h` an upper level.
"""
from __future__ import annotations

import numpy as np
from scipy.special import erfc, erfcx


def _as_arrays(*xs):
    return [np.asarray(x, dtype=float) for x in xs]


def cross_prob(a, b, s):
    """P(min over the segment <= 0 | endpoints a, b > 0); 1 if an endpoint <= 0.

    Zero-length segments (s = 0) are allowed: the probability is then the
    indicator of a nonpositive endpoint.
    """
    a, b, s = _as_arrays(a, b, s)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        p = np.exp(-2.0 * a * b / s)
    p = np.where((s == 0) & (np.minimum(a, b) <= 0), 1.0, p)
    return np.minimum(p, 1.0)


def sample_min(a, b, s, u):
    """Exact bridge minimum via the reflection inverse-CDF; u ~ U(0,1)."""
    a, b, s, u = _as_arrays(a, b, s, u)
    d = a - b
    return 0.5 * (a + b - np.sqrt(d * d - 2.0 * s * np.log(u)))


def sample_max(a, b, s, u):
    """Exact bridge maximum (reflection of sample_min)."""
    a, b, s, u = _as_arrays(a, b, s, u)
    d = a - b
    return 0.5 * (a + b + np.sqrt(d * d - 2.0 * s * np.log(u)))


def _kmax(h, s) -> int:
    # keep images until exp(-2 (kh)^2 / s) with polynomial prefactor < 1e-18;
    # the count is per-element (largest needed across the batch)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.sqrt(36.0 * np.asarray(s)) / np.asarray(h)
    r = np.max(np.where(np.isfinite(r), r, 0.0))
    return int(np.ceil(r)) + 2


def stay_in_strip_prob(a, b, h, s):
    """P(path stays inside (0, h) | endpoints); 0 if an endpoint is outside."""
    a, b, h, s = np.broadcast_arrays(*_as_arrays(a, b, h, s))
    q = np.zeros(a.shape)
    inside = (a > 0) & (a < h) & (b > 0) & (b < h)
    if np.any(inside):
        ai, bi, hi, si = a[inside], b[inside], h[inside], s[inside]
        acc = np.zeros_like(ai)
        for k in range(-_kmax(hi, si), _kmax(hi, si) + 1):
            kh = k * hi
            acc += np.exp(-2.0 * kh * (kh + bi - ai) / si)
            acc -= np.exp(-2.0 * (kh - ai) * (kh - bi) / si)
        q[inside] = acc
    return np.clip(q, 0.0, 1.0)


def exit_bottom_prob(a, b, h, s):
    """P(path hits 0 while still below h, within the segment | endpoints).

    Alternating hitting-word series sum_{k>=0} [N(-2kh-|b|) - N(2(k+1)h+|b|)]
    over the free endpoint density at the actual b. Images use |b|: the joint
    exit density is even in the end point because motion restarts at 0.
    """
    a, b, h, s = np.broadcast_arrays(*_as_arrays(a, b, h, s))
    d2 = (b - a) ** 2
    bb = np.abs(b)
    acc = np.zeros(a.shape)
    for k in range(0, _kmax(h, s) + 1):
        z1 = -2.0 * k * h - bb
        z2 = 2.0 * (k + 1) * h + bb
        acc += np.exp((d2 - (z1 - a) ** 2) / (2.0 * s))
        acc -= np.exp((d2 - (z2 - a) ** 2) / (2.0 * s))
    # paths already at or below 0 at the start count as immediate exits
    acc = np.where(a <= 0, 1.0, acc)
    return np.clip(acc, 0.0, 1.0)


def exit_top_prob(a, b, h, s):
    """P(path hits h while still above 0, within the segment | endpoints)."""
    a, b, h, s = np.broadcast_arrays(*_as_arrays(a, b, h, s))
    return exit_bottom_prob(h - a, h - b, h, s)


def passage_time_cdf(t, a, b, big_t, sigma2):
    """CDF at t of the first hit of 0 by a bridge a -> b over [0, big_t],
    conditioned to hit (a, b > 0). Closed form:

        F(t) = (erfc(y1) + exp(-y1^2) erfcx(y2)) / 2,
        y1 = sqrt(A) x - sqrt(B)/x,  y2 = sqrt(A) x + sqrt(B)/x,
        x = sqrt((T-t)/t),  A = a^2/(2 sigma2 T),  B = b^2/(2 sigma2 T).
    """
    t, a, b = _as_arrays(t, a, b)
    x = np.sqrt(np.maximum(big_t - t, 0.0) / np.maximum(t, 1e-300))
    sa = a / np.sqrt(2.0 * sigma2 * big_t)
    sb = b / np.sqrt(2.0 * sigma2 * big_t)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        y1 = sa * x - sb / x
        y2 = sa * x + sb / x
        f = 0.5 * (erfc(y1) + np.exp(-y1 * y1) * erfcx(y2))
    f = np.where(t <= 0.0, 0.0, f)
    f = np.where(t >= big_t, 1.0, f)
    return f


def sample_passage_time(a, b, big_t, sigma2, u, iters: int = 60):
    """Invert passage_time_cdf by bisection; exact to ~1e-18 * big_t."""
    a, b, u = _as_arrays(a, b, u)
    lo = np.zeros_like(a)
    hi = np.full_like(a, float(big_t)) if np.isscalar(big_t) else np.asarray(big_t, dtype=float).copy()
    big_t_arr = np.broadcast_to(np.asarray(big_t, dtype=float), a.shape)
    hi = big_t_arr.astype(float).copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = passage_time_cdf(mid, a, b, big_t_arr, sigma2) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def first_passage_max_cdf(h, a, s):
    """P(max before the first hit of 0 <= h) for a segment that starts at a > 0
    and is conditioned to hit 0 at the segment end (variance s up to the hit):

        sum_{k in Z} (1 - 2 k h / a) exp(-2 k h (k h - a) / s),  h >= a.
    """
    h, a, s = np.broadcast_arrays(*_as_arrays(h, a, s))
    acc = np.zeros(h.shape)
    for k in range(-_kmax(h, s), _kmax(h, s) + 1):
        kh = k * h
        acc += (1.0 - 2.0 * kh / a) * np.exp(-2.0 * kh * (kh - a) / s)
    acc = np.where(h <= a, 0.0, acc)
    return np.clip(acc, 0.0, 1.0)


def _bisect_monotone(cdf, lo, hi, u, iters: int = 60):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        below = cdf(mid) < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def sample_max_given_alive(a, b, s, u):
    """Max of a segment conditioned on min > 0, by inverting the strip ratio
    P(max <= h | min > 0) = stay(a,b,h,s) / (1 - cross_prob)."""
    a, b, s, u = np.broadcast_arrays(*_as_arrays(a, b, s, u))
    base = np.maximum(a, b)
    denom = 1.0 - cross_prob(a, b, s)
    lo = base * (1.0 + 1e-12) + 1e-300
    hi = base + 9.0 * np.sqrt(s)
    return _bisect_monotone(lambda h: stay_in_strip_prob(a, b, h, s) / denom, lo, hi, u)


def sample_max_before_passage(a, s, u):
    """Max before the killing time for a segment killed at its end (variance s)."""
    a, s, u = np.broadcast_arrays(*_as_arrays(a, s, u))
    lo = a * (1.0 + 1e-12)
    hi = a + 9.0 * np.sqrt(s)
    return _bisect_monotone(lambda h: first_passage_max_cdf(h, a, s), lo, hi, u)
