import json

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import chisquare

from bkl_lab import rng as rngmod
from bkl_lab.errors import InfeasibleScale
from bkl_lab.offspring import (
    BranchingSpec,
    OffspringLaw,
    make_binary,
    make_stable_tail,
    mechanism,
    mechanism_constant,
    mechanism_ratio,
    sample_offspring,
    scaled_mechanism,
    scaled_mechanism_ratio,
)

FLAGSHIP = BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=1.0)
BINARY = BranchingSpec(law=make_binary(), beta=1.0)


def mechanism_oracle(spec: BranchingSpec, v: float) -> float:
    """40-digit evaluation of beta * (sum p_k (1-v)^k - (1-v)) via polylog."""
    mp.mp.dps = 40
    law = spec.law
    x = mp.mpf(1) - mp.mpf(v)
    if law.tail_alpha is None:
        acc = sum(mp.mpf(p) * x ** k for k, p in enumerate(law.prefix))
    else:
        s = mp.mpf(law.tail_scale)
        p0, p1 = mp.mpf(law.prefix[0]), mp.mpf(law.prefix[1])
        acc = p0 + p1 * x + s * (mp.polylog(1 + mp.mpf(law.tail_alpha), x) - x)
    return float(spec.beta * (acc - x))


class TestMechanismValues:
    def test_binary_closed_form(self):
        v = np.array([1e-12, 1e-6, 0.01, 0.3, 0.5, 0.9, 1.0])
        got = mechanism(BINARY, v)
        assert np.allclose(got, v * v / 2.0, rtol=1e-14, atol=0.0)

    def test_binary_respects_rate(self):
        spec = BranchingSpec(law=make_binary(), beta=2.5)
        assert mechanism(spec, 0.3) == pytest.approx(2.5 * 0.045, rel=1e-14)

    def test_stable_matches_polylog_oracle(self):
        for v in [1e-10, 1e-6, 1e-3, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0]:
            got = float(mechanism(FLAGSHIP, v))
            want = mechanism_oracle(FLAGSHIP, v)
            assert got == pytest.approx(want, rel=2e-13), v

    def test_stable_other_params_match_oracle(self):
        for alpha, s in [(1.2, 0.15), (1.8, 0.8), (1.05, 0.04)]:
            spec = BranchingSpec(law=make_stable_tail(alpha, s), beta=1.0)
            for v in [1e-8, 0.02, 0.4, 0.6, 1.0]:
                got = float(mechanism(spec, v))
                want = mechanism_oracle(spec, v)
                assert got == pytest.approx(want, rel=5e-13), (alpha, s, v)

    def test_flagship_weights_frozen(self):
        law = FLAGSHIP.law
        assert law.prefix[0] == pytest.approx(0.6354440457172857, rel=1e-15)
        assert law.prefix[1] == pytest.approx(0.1938123256572557, rel=1e-15)

    def test_normalization_and_criticality(self):
        for spec in [FLAGSHIP, BINARY, BranchingSpec(law=make_stable_tail(1.9, 0.9), beta=1.0)]:
            assert spec.law.total_mass() == pytest.approx(1.0, abs=1e-14)
            assert spec.law.mean() == pytest.approx(1.0, abs=1e-13)

    def test_mechanism_constant(self):
        assert mechanism_constant(FLAGSHIP) == pytest.approx(2.0 * np.sqrt(np.pi) / 3.0, rel=1e-13)
        assert mechanism_constant(BINARY) == pytest.approx(0.5, rel=1e-15)
        heavy = BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=3.0)
        assert mechanism_constant(heavy) == pytest.approx(2.0 * np.sqrt(np.pi), rel=1e-13)


class TestScaling:
    def test_binary_is_scale_invariant(self):
        for t in [1.0, 10.0, 1e4]:
            v = np.linspace(0.01, 0.9, 15)
            got = scaled_mechanism(BINARY, v, t)
            assert np.allclose(got, v * v / 2.0, rtol=1e-12)

    def test_scaled_ratio_converges_to_constant_times_power(self):
        c = mechanism_constant(FLAGSHIP)
        alpha = FLAGSHIP.law.alpha
        v = 0.7
        prev_gap = None
        for t in [1e2, 1e4, 1e6]:
            ratio = scaled_mechanism_ratio(FLAGSHIP, v, t) / v ** (alpha - 1.0)
            gap = abs(ratio / c - 1.0)
            if prev_gap is not None:
                # correction decays like 1/t for this tail index
                assert gap < prev_gap / 50.0
            prev_gap = gap
        assert prev_gap < 1e-5

    def test_ratio_vanishes_at_zero(self):
        assert mechanism_ratio(FLAGSHIP, 0.0) == 0.0
        assert mechanism_ratio(BINARY, 0.0) == 0.0


class TestShapeProperties:
    @given(st.floats(1.05, 1.99), st.floats(0.1, 0.95))
    @settings(max_examples=40, deadline=None)
    def test_nonnegative_convex(self, alpha, scale_frac):
        from scipy.special import zeta
        scale = scale_frac * 0.999 / (zeta(alpha, 1) - 1.0)
        spec = BranchingSpec(law=make_stable_tail(alpha, scale), beta=1.0)
        v = np.linspace(0.0, 1.0, 201)
        f = mechanism(spec, v)
        assert np.all(f >= -1e-16)
        second = f[2:] - 2 * f[1:-1] + f[:-2]
        assert np.all(second >= -1e-12 * max(1.0, f.max()))

    @given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone(self, v1, v2):
        lo, hi = min(v1, v2), max(v1, v2)
        assert mechanism(FLAGSHIP, hi) >= mechanism(FLAGSHIP, lo) - 1e-15

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            mechanism(FLAGSHIP, -0.1)
        with pytest.raises(ValueError):
            mechanism(FLAGSHIP, 1.1)


class TestConstruction:
    def test_infeasible_scale_raises(self):
        with pytest.raises(InfeasibleScale):
            make_stable_tail(1.5, 2.0)

    def test_alpha_range_enforced(self):
        with pytest.raises(ValueError):
            make_stable_tail(2.3, 0.1)
        with pytest.raises(ValueError):
            make_stable_tail(1.0, 0.1)

    def test_json_round_trip(self):
        for law in [FLAGSHIP.law, BINARY.law, OffspringLaw(prefix=(0.2, 0.3, 0.1, 0.4))]:
            twin = OffspringLaw.from_json(json.loads(json.dumps(law.to_json())))
            assert twin == law

    def test_kappa(self):
        assert FLAGSHIP.law.kappa == pytest.approx(0.5 / 1.5, rel=1e-15)
        assert BINARY.law.kappa is None


class TestSampling:
    def test_chi_square_against_pmf(self):
        gen = rngmod.stream(123, 0, "offspring")
        n = 300_000
        draws = sample_offspring(FLAGSHIP.law, gen.random(n))
        kmax = 60
        counts = np.bincount(np.minimum(draws, kmax + 1), minlength=kmax + 2)
        probs = np.array([FLAGSHIP.law.pmf(k) for k in range(kmax + 1)])
        probs = np.append(probs, 1.0 - probs.sum())
        res = chisquare(counts, n * probs)
        assert res.pvalue > 1e-3

    def test_binary_sampling(self):
        gen = rngmod.stream(9, 0, "offspring")
        draws = sample_offspring(BINARY.law, gen.random(200_000))
        assert set(np.unique(draws)) == {0, 2}
        assert abs(draws.mean() - 1.0) < 0.01

    def test_deep_tail_reachable(self):
        # quantile walk must return correct k for tiny tail probabilities
        law = FLAGSHIP.law
        u = np.array([1.0 - 1e-9, 1.0 - 1e-12])
        ks = sample_offspring(law, u)
        assert ks[1] > ks[0] > 1000
        for k, uu in zip(ks, u):
            # ccdf(k) >= 1-u > ccdf(k+1) pins the inverse
            s, alpha = law.tail_scale, law.tail_alpha
            from scipy.special import zeta
            ccdf_k = s * zeta(1 + alpha, k)
            ccdf_k1 = s * zeta(1 + alpha, k + 1)
            assert ccdf_k >= (1.0 - uu) > ccdf_k1
