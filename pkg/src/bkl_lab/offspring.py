"""Critical offspring laws and their branching mechanism.

A law is a finite prefix (p_0 .. p_K) plus an optional analytic Pareto tail
p_k = s * k^-(1+alpha) on k >= 2. The mechanism

    mechanism(v) = beta * ( sum_k p_k (1-v)^k - (1-v) ),   v in [0, 1]

is evaluated to ~1e-14 relative accuracy everywhere. The naive difference of
generating functions loses all precision as v -> 0 (both terms -> 1), so we
use exact cancellation-free forms:

  * finite support: mechanism(v)/beta = sum_{j>=2} (-v)^j E[binom(L, j)],
    a finite polynomial (mean-one kills the j<2 terms exactly);
  * Pareto tail: a polylog expansion in mu = -log(1-v) whose constant and
    linear coefficients vanish identically by normalization and criticality,
    leaving s*Gamma(-alpha)*mu^alpha plus an analytic series (valid mu < 2pi,
    used for v <= 1/2; direct summation of p_k (1-v)^k converges fast above).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import zeta as _hurwitz

from .errors import InfeasibleScale

_EXPANSION_TERMS = 30
_DIRECT_TERMS = 80          # enough for x <= 0.55 at < 1e-17 remainder
_TABLE_KMAX = 1_000_000     # sampling prefix table size for tailed laws


@dataclass(frozen=True)
class OffspringLaw:
    """Offspring distribution; prefix covers k < len(prefix), tail covers the rest.

    For tailed laws the prefix is (p_0, p_1) and p_k = tail_scale * k^-(1+tail_alpha)
    for every k >= 2 (exactly, not truncated).
    """
    prefix: tuple[float, ...]
    tail_alpha: float | None = None
    tail_scale: float | None = None

    @property
    def alpha(self) -> float:
        """Stability index: tail exponent for tailed laws, 2 for finite variance."""
        return self.tail_alpha if self.tail_alpha is not None else 2.0

    @property
    def kappa(self) -> float | None:
        """Limit of n^alpha * P(L >= n); None for finite-support laws."""
        if self.tail_alpha is None:
            return None
        return self.tail_scale / self.tail_alpha

    def mean(self) -> float:
        m = sum(k * p for k, p in enumerate(self.prefix))
        if self.tail_alpha is not None:
            # sum_{k>=2} k * s k^-(1+a) = s (zeta(a) - 1)
            m += self.tail_scale * (float(_hurwitz(self.tail_alpha, 2)))
        return m

    def total_mass(self) -> float:
        m = sum(self.prefix)
        if self.tail_alpha is not None:
            m += self.tail_scale * float(_hurwitz(1.0 + self.tail_alpha, 2))
        return m

    def pmf(self, k: int) -> float:
        if k < len(self.prefix):
            return self.prefix[k]
        if self.tail_alpha is not None and k >= 2:
            return self.tail_scale * k ** -(1.0 + self.tail_alpha)
        return 0.0

    def to_json(self) -> str:
        if self.tail_alpha is not None:
            return json.dumps({"kind": "stable", "alpha": self.tail_alpha,
                               "scale": self.tail_scale})
        if self.prefix == (0.5, 0.0, 0.5):
            return json.dumps({"kind": "binary"})
        return json.dumps({"kind": "table", "p": list(self.prefix)})

    @staticmethod
    def from_json(text: str) -> "OffspringLaw":
        obj = json.loads(text)
        kind = obj.get("kind")
        if kind == "binary":
            return make_binary()
        if kind == "stable":
            return make_stable_tail(obj["alpha"], obj["scale"])
        if kind == "table":
            return OffspringLaw(prefix=tuple(float(p) for p in obj["p"]))
        raise ValueError(f"unknown offspring law kind: {kind!r}")


@dataclass(frozen=True)
class BranchingSpec:
    """Offspring law plus exponential branching rate beta."""
    law: OffspringLaw
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def make_binary() -> OffspringLaw:
    """Critical binary splitting: dies or doubles with probability 1/2 each."""
    return OffspringLaw(prefix=(0.5, 0.0, 0.5))


def make_stable_tail(alpha: float, scale: float) -> OffspringLaw:
    """Pareto-tail law p_k = scale * k^-(1+alpha) for k >= 2, critical by design.

    p_1 absorbs the mean constraint and p_0 the normalization; both must land
    in [0, 1], otherwise InfeasibleScale.
    """
    if not 1.0 < alpha < 2.0:
        raise ValueError("alpha must lie in (1, 2) for a tailed law")
    if not scale > 0:
        raise InfeasibleScale("scale must be positive", alpha=alpha, scale=scale)
    s_mean = float(_hurwitz(alpha, 2))          # sum k^-alpha, k>=2
    s_mass = float(_hurwitz(1.0 + alpha, 2))    # sum k^-(1+alpha), k>=2
    p1 = 1.0 - scale * s_mean
    p0 = 1.0 - p1 - scale * s_mass              # = scale*(s_mean - s_mass)
    if p1 < 0.0 or p0 < 0.0 or p0 > 1.0:
        raise InfeasibleScale(
            f"scale {scale} infeasible for alpha {alpha}: p0={p0:.6g} p1={p1:.6g}",
            alpha=alpha, scale=scale)
    return OffspringLaw(prefix=(p0, p1), tail_alpha=alpha, tail_scale=scale)


# ---------------------------------------------------------------------------
# mechanism evaluation
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _finite_poly_coeffs(law: OffspringLaw) -> np.ndarray:
    """Coefficients c_j = E[binom(L, j)], j = 2..K, for finite-support laws."""
    kmax = len(law.prefix) - 1
    coeffs = np.zeros(max(kmax + 1, 3))
    for k, p in enumerate(law.prefix):
        if p == 0.0 or k < 2:
            continue
        c = 1.0
        for j in range(1, k + 1):
            c *= (k - j + 1) / j
            if j >= 2:
                coeffs[j] += p * c
    return coeffs[2:]


@lru_cache(maxsize=64)
def _tail_expansion_coeffs(law: OffspringLaw) -> tuple[float, np.ndarray]:
    """(gamma_term, c[2..J]) for the mu-expansion of a tailed law.

    mechanism(v)/beta = gamma_term * mu^alpha + sum_{j>=2} c_j mu^j,
    c_j = (-1)^j [p1 - 1 - s + s zeta(1+alpha-j)] / j!.
    zeta arguments go nonpositive, so coefficients come from mpmath once.
    """
    a, s = law.tail_alpha, law.tail_scale
    p1 = law.prefix[1]
    gamma_term = float(s * mp.gamma(-a))
    c = np.zeros(_EXPANSION_TERMS + 1)
    fact = 2.0  # j!
    for j in range(2, _EXPANSION_TERMS + 1):
        zj = float(mp.zeta(1.0 + a - j))
        c[j] = ((-1) ** j) * (p1 - 1.0 - s + s * zj) / fact
        fact *= (j + 1)
    return gamma_term, c[2:]


def _mechanism_tailed(law: OffspringLaw, v: np.ndarray) -> np.ndarray:
    a, s = law.tail_alpha, law.tail_scale
    p0, p1 = law.prefix[0], law.prefix[1]
    out = np.empty_like(v)

    hi = v > 0.5   # x = 1 - v < 1/2: direct summation converges geometrically
    if np.any(hi):
        x = 1.0 - v[hi]
        k = np.arange(2, _DIRECT_TERMS + 1, dtype=float)
        tail_sum = (k ** -(1.0 + a) * x[:, None] ** k).sum(axis=1)
        # geometric remainder bound: s x^(N+1) (N+1)^-(1+a) / (1-x) < 1e-17
        out[hi] = p0 + p1 * x + s * tail_sum - x

    lo = ~hi
    if np.any(lo):
        gamma_term, c = _tail_expansion_coeffs(law)
        mu = -np.log1p(-v[lo])
        acc = np.zeros_like(mu)
        mupow = mu * mu
        for cj in c:
            acc += cj * mupow
            mupow = mupow * mu
        out[lo] = gamma_term * mu ** a + acc
    return out


def _mechanism_finite(law: OffspringLaw, v: np.ndarray) -> np.ndarray:
    out = np.empty_like(v)
    hi = v > 0.5
    if np.any(hi):
        x = 1.0 - v[hi]
        acc = -x
        for k, p in enumerate(law.prefix):
            if p:
                acc = acc + p * x ** k
        out[hi] = acc
    lo = ~hi
    if np.any(lo):
        c = _finite_poly_coeffs(law)
        vv = v[lo]
        acc = np.zeros_like(vv)
        sign_vpow = vv * vv  # (-v)^j built with explicit sign below
        for j, cj in enumerate(c, start=2):
            acc += cj * sign_vpow if j % 2 == 0 else -cj * sign_vpow
            sign_vpow = sign_vpow * vv
        out[lo] = acc
    return out


def mechanism(spec: BranchingSpec, v) -> np.ndarray | float:
    """Branching mechanism beta*(E[(1-v)^L] - (1-v)); >= 0 and convex on [0, 1]."""
    varr = np.asarray(v, dtype=float)
    if np.any((varr < 0) | (varr > 1)):
        raise ValueError("mechanism argument must lie in [0, 1]")
    flat = np.atleast_1d(varr)
    if spec.law.tail_alpha is not None:
        raw = _mechanism_tailed(spec.law, flat)
    else:
        raw = _mechanism_finite(spec.law, flat)
    raw = spec.beta * raw
    raw = raw.reshape(varr.shape)
    return float(raw) if varr.ndim == 0 else raw


def mechanism_ratio(spec: BranchingSpec, v) -> np.ndarray | float:
    """mechanism(v)/v, extended by continuity to 0 at v = 0."""
    varr = np.asarray(v, dtype=float)
    flat = np.atleast_1d(varr)
    out = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        out[pos] = np.atleast_1d(mechanism(spec, flat[pos])) / flat[pos]
    out = out.reshape(varr.shape)
    return float(out) if varr.ndim == 0 else out


def scaled_mechanism(spec: BranchingSpec, v, t: float) -> np.ndarray | float:
    """Space-time rescaled mechanism t^(a/(a-1)) * mechanism(v * t^(-1/(a-1)))."""
    a = spec.law.alpha
    if not t > 0:
        raise ValueError("t must be positive")
    u = np.asarray(v, dtype=float) * t ** (-1.0 / (a - 1.0))
    return t ** (a / (a - 1.0)) * mechanism(spec, u)


def scaled_mechanism_ratio(spec: BranchingSpec, v, t: float) -> np.ndarray | float:
    """scaled_mechanism(v, t)/v with value 0 at v = 0."""
    varr = np.asarray(v, dtype=float)
    flat = np.atleast_1d(varr)
    out = np.zeros_like(flat)
    pos = flat > 0
    if np.any(pos):
        out[pos] = np.atleast_1d(scaled_mechanism(spec, flat[pos], t)) / flat[pos]
    out = out.reshape(varr.shape)
    return float(out) if varr.ndim == 0 else out


def mechanism_constant(spec: BranchingSpec) -> float:
    """Leading coefficient C with mechanism(v) ~ C v^alpha as v -> 0.

    Finite variance: beta/2 * E[L(L-1)]. Pareto tail: beta * kappa *
    Gamma(2-alpha) / (alpha-1) with kappa = scale/alpha.
    """
    law = spec.law
    if law.tail_alpha is None:
        f2 = sum(k * (k - 1) * p for k, p in enumerate(law.prefix))
        return 0.5 * spec.beta * f2
    a = law.tail_alpha
    return spec.beta * law.kappa * math.gamma(2.0 - a) / (a - 1.0)


# ---------------------------------------------------------------------------
# exact inverse-CDF sampling
# ---------------------------------------------------------------------------

@lru_cache(maxsize=32)
def _ccdf_table(law: OffspringLaw) -> np.ndarray:
    """T[k] = P(L >= k) for k = 0 .. Kmax+1, built back-to-front so the deep
    tail keeps full relative precision (a forward cumsum would drown it in
    rounding at the 1e-10 level)."""
    if law.tail_alpha is None:
        p = np.asarray(law.prefix)
        t = np.concatenate([np.cumsum(p[::-1])[::-1], [0.0]])
        return t
    a, s = law.tail_alpha, law.tail_scale
    k = np.arange(2, _TABLE_KMAX + 1, dtype=float)
    pk = s * k ** -(1.0 + a)
    seed = s * float(_hurwitz(1.0 + a, _TABLE_KMAX + 1))   # exact Hurwitz tail
    t = np.empty(_TABLE_KMAX + 2)
    t[-1] = seed
    t[2:-1] = seed + np.cumsum(pk[::-1])[::-1]
    t[1] = t[2] + law.prefix[1]
    t[0] = 1.0
    return t


def _invert_tail(law: OffspringLaw, w: np.ndarray) -> np.ndarray:
    """Solve s * hurwitz_zeta(1+alpha, k) <= w < ... for integer k > Kmax."""
    a, s = law.tail_alpha, law.tail_scale
    out = np.empty(len(w), dtype=np.int64)
    for i, wi in enumerate(w):
        k = max(_TABLE_KMAX + 1, int((wi * a / s) ** (-1.0 / a)))
        # walk to the exact integer boundary; starts within O(1) of it
        while s * float(_hurwitz(1.0 + a, k)) <= wi:
            k -= 1
        while s * float(_hurwitz(1.0 + a, k + 1)) > wi:
            k += 1
        out[i] = k
    return out


def sample_offspring(law: OffspringLaw, u) -> np.ndarray:
    """Exact inverse-CDF draw of offspring counts from uniforms u (vectorized).

    Nondecreasing in u. The complementary mass 1-u drives the descending
    tail table, floored at 2^-53 (the finest uniform the generator emits).
    """
    t = _ccdf_table(law)
    w = np.maximum(1.0 - np.asarray(u, dtype=float), 2.0 ** -53)
    # largest k with T[k] > w, via searchsorted on the descending table
    idx = len(t) - np.searchsorted(t[::-1], w, side="left") - 1
    if law.tail_alpha is not None:
        deep = idx >= _TABLE_KMAX + 1
        if np.any(deep):
            idx = idx.astype(np.int64)
            idx[deep] = _invert_tail(law, w[deep])
    return idx.astype(np.int64)
