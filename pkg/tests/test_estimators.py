from types import SimpleNamespace

import numpy as np
import pytest

from bkl_lab import estimators as est
from bkl_lab.errors import DegenerateDesign, NotConverged, TooCensored, TooFewSurvivors


def fake_ensemble(ext, censored, horizon, mx=None, snapshots=None):
    ext = np.asarray(ext, dtype=float)
    mx = np.zeros_like(ext) if mx is None else np.asarray(mx, dtype=float)
    return SimpleNamespace(extinction_time=ext,
                           censored=np.asarray(censored, dtype=bool),
                           horizon=horizon, max_all_time=mx, max_floor=mx,
                           snapshots=snapshots or {})


class TestMerging:
    def test_partition_invariance(self):
        rng = np.random.default_rng(0)
        vals = rng.random(10_000)
        whole = est.MergeState().add(vals)
        parts = [est.MergeState().add(vals[i::7]) for i in range(7)]
        merged = est.merge(parts)
        a, b = whole.estimate(), merged.estimate()
        assert a.value == pytest.approx(b.value, rel=1e-12)
        assert a.std_err == pytest.approx(b.std_err, rel=1e-9)
        assert a.n == b.n

    def test_combine_associative(self):
        rng = np.random.default_rng(1)
        s1 = est.MergeState().add(rng.random(100))
        s2 = est.MergeState().add(rng.random(50), censored=3)
        s3 = est.MergeState().add(rng.random(70))
        left = s1.combine(s2).combine(s3)
        right = s1.combine(s2.combine(s3))
        assert left.count == right.count and left.censored == right.censored
        assert left.total == pytest.approx(right.total, rel=1e-15)
        assert left.total_sq == pytest.approx(right.total_sq, rel=1e-15)

    def test_se_shrinks_like_root_n(self):
        rng = np.random.default_rng(2)
        draws = (rng.random(400_000) < 0.3).astype(float)
        se_n = est.MergeState().add(draws[:200_000]).estimate().std_err
        se_2n = est.MergeState().add(draws).estimate().std_err
        assert se_2n == pytest.approx(se_n / np.sqrt(2.0), rel=0.05)

    def test_indicator_se_formula(self):
        e = est.indicator_estimate(30, 100)
        assert e.value == 0.3
        assert e.std_err == pytest.approx(np.sqrt(0.3 * 0.7 / 100), rel=1e-12)


class TestExponentFit:
    def test_exact_power_law(self):
        pts = [(x, x ** -3.0, 1e-6) for x in (2.0, 4.0, 8.0, 16.0, 32.0)]
        fit = est.fit_exponent(pts)
        assert fit.slope == pytest.approx(-3.0, abs=1e-12)

    def test_too_few_points(self):
        with pytest.raises(DegenerateDesign):
            est.fit_exponent([(1, 1, 0.1), (2, 0.5, 0.1), (3, 0.3, 0.1)])

    def test_collinear_abscissae(self):
        with pytest.raises(DegenerateDesign):
            est.fit_exponent([(2, 1, 0.1)] * 5)

    def test_ci_contains_slope(self):
        rng = np.random.default_rng(3)
        pts = [(x, x ** -1.5 * np.exp(0.01 * rng.standard_normal()), 0.01 * x ** -1.5)
               for x in (2.0, 4.0, 8.0, 16.0)]
        fit = est.fit_exponent(pts)
        assert fit.slope_ci[0] <= fit.slope <= fit.slope_ci[1]
        assert len(fit.grid) == 4


class TestTails:
    def test_survival_values(self):
        ens = fake_ensemble([1.0, 2.0, 3.0, 4.0], [False] * 4, horizon=10.0)
        out = est.survival_tail(ens, "fixed", 1.0, [0.0, 2.5])
        assert out[0].value == 1.0
        assert out[1].value == 0.5
        assert out[1].std_err == pytest.approx(np.sqrt(0.25 / 4))

    def test_survival_censored_counts_as_alive_below_horizon(self):
        ens = fake_ensemble([np.inf, 1.0], [True, False], horizon=10.0)
        out = est.survival_tail(ens, "fixed", 1.0, [5.0])
        assert out[0].value == 0.5

    def test_survival_too_censored(self):
        ens = fake_ensemble([np.inf, 1.0], [True, False], horizon=10.0)
        with pytest.raises(TooCensored):
            est.survival_tail(ens, "fixed", 1.0, [20.0])

    def test_survival_monotone(self):
        rng = np.random.default_rng(4)
        ens = fake_ensemble(rng.exponential(5.0, 5000), [False] * 5000, horizon=100.0)
        out = est.survival_tail(ens, "fixed", 1.0, [1.0, 2.0, 4.0, 8.0])
        vals = [o.value for o in out]
        assert vals == sorted(vals, reverse=True)

    def test_max_tail(self):
        ens = fake_ensemble([1.0] * 4, [False] * 4, horizon=10.0, mx=[0.5, 1.5, 2.5, 3.5])
        out = est.max_tail(ens, "fixed", 1.0, [1.0, 3.0])
        assert out[0].value == 0.75
        assert out[1].value == 0.25

    def test_bad_mode_rejected(self):
        ens = fake_ensemble([1.0], [False], horizon=10.0)
        with pytest.raises(ValueError):
            est.survival_tail(ens, "scaled", 1.0, [1.0])
        with pytest.raises(ValueError):
            est.max_tail(ens, "sqrt_t_scaled", 1.0, [1.0])


class TestYaglom:
    def make(self, n_surv, n_dead):
        rng = np.random.default_rng(5)
        counts = np.concatenate([rng.integers(1, 5, n_surv), np.zeros(n_dead, dtype=int)])
        mx = np.concatenate([rng.random(n_surv) * 3, np.zeros(n_dead)])
        snaps = {4.0: {"count": counts, "max": mx}}
        return fake_ensemble(np.full(n_surv + n_dead, 9.0), [False] * (n_surv + n_dead),
                             horizon=10.0, snapshots=snaps)

    def test_conditioning_strips_dead(self):
        ens = self.make(600, 400)
        dist = est.yaglom_empirical(ens, 4.0, "mass", alpha=2.0)
        assert dist.n == 600
        assert np.all(dist.values > 0)

    def test_scaled_max(self):
        ens = self.make(600, 0)
        dist = est.yaglom_empirical(ens, 4.0, "max")
        raw = np.sort(ens.snapshots[4.0]["max"] / 2.0)
        assert np.allclose(dist.values, raw)

    def test_too_few_survivors(self):
        ens = self.make(100, 900)
        with pytest.raises(TooFewSurvivors):
            est.yaglom_empirical(ens, 4.0, "max")

    def test_ks_distance_uniform(self):
        rng = np.random.default_rng(6)
        d = est.EmpiricalDistribution(values=np.sort(rng.random(10_000)), n=10_000)
        assert d.ks_distance(lambda x: np.clip(x, 0, 1)) < 0.02


class TestPlateau:
    def test_agreeing_points(self):
        pts = [(10, 0.50, 0.01), (20, 0.51, 0.01), (40, 0.505, 0.01), (80, 0.507, 0.01)]
        out = est.plateau(pts)
        assert out.value == pytest.approx(0.507, abs=0.01)
        assert out.std_err < 0.01

    def test_disagreeing_points(self):
        pts = [(10, 0.50, 0.001), (20, 0.60, 0.001), (40, 0.70, 0.001)]
        with pytest.raises(NotConverged):
            est.plateau(pts)

    def test_needs_three(self):
        with pytest.raises(NotConverged):
            est.plateau([(1, 0.5, 0.1), (2, 0.5, 0.1)])
