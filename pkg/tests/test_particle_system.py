"""Engine tests: exact laws, structural invariants, determinism, plumbing."""
import json
import math

import numpy as np
import pytest
from numpy.polynomial.hermite_e import hermegauss
from scipy.stats import kstest, norm

from bkl_lab import bridges
from bkl_lab.errors import CapExceeded
from bkl_lab.estimators import max_tail, survival_tail, yaglom_empirical
from bkl_lab.levy_motion import BrownianMotion, JumpDiffusion, JumpLaw
from bkl_lab.offspring import (BranchingSpec, OffspringLaw, make_binary,
                               make_stable_tail, sample_offspring)
from bkl_lab.particle_system import (Caps, SimOutcome, iter_replicas,
                                     replica_record, run_ensemble,
                                     scaled_snapshot, simulate,
                                     stopped_motion_equivalence_test,
                                     write_jsonl)
from bkl_lab.rng import stream

BM = BrownianMotion(1.0)
JD = JumpDiffusion(sigma2=0.5, jump_rate=1.0, jump=JumpLaw("laplace", 0.5))
BINARY = BranchingSpec(law=make_binary(), beta=1.0)
# identity branching: k = 1 always, so the system is one killed Brownian path
# with periodic clock renewals; every functional has a closed form
IDENTITY = BranchingSpec(law=OffspringLaw(prefix=(0.0, 1.0)), beta=0.5)
# no offspring: a single lifetime, extinction = Exp(beta) ∧ first passage
SOLO = BranchingSpec(law=OffspringLaw(prefix=(1.0,)), beta=0.7)


def survival(ens, t):
    return np.mean(ens.censored | (ens.extinction_time > t))


class TestOutcome:
    def test_deterministic_replay(self):
        kw = dict(snapshot_times=[0.0, 1.0, 3.0], caps=Caps(horizon=10.0))
        a = simulate(BINARY, BM, 2.0, rng=7, **kw)
        b = simulate(BINARY, BM, 2.0, rng=7, **kw)
        assert a.extinction_time == b.extinction_time
        assert a.max_all_time == b.max_all_time
        assert a.events == b.events
        for t in a.snapshots:
            assert np.array_equal(a.snapshots[t], b.snapshots[t])

    def test_ensemble_deterministic_across_calls(self):
        kw = dict(n_replicas=2500, seed=3, snapshot_times=[2.0],
                  caps=Caps(horizon=4.0), chunk=1000)
        a = run_ensemble(BINARY, BM, 1.0, **kw)
        b = run_ensemble(BINARY, BM, 1.0, **kw)
        assert np.array_equal(a.extinction_time, b.extinction_time)
        assert np.array_equal(a.censored, b.censored)
        assert np.array_equal(a.max_floor, b.max_floor)
        assert np.array_equal(a.snapshots[2.0]["count"], b.snapshots[2.0]["count"])

    def test_snapshot_structure(self):
        out = simulate(BINARY, BM, 2.0, snapshot_times=[0.0, 1.0, 3.0, 9.0],
                       caps=Caps(horizon=10.0), rng=7)
        assert np.array_equal(out.snapshots[0.0], [2.0])
        best = out.max_all_time
        for t, pos in out.snapshots.items():
            assert np.all(pos > 0.0)
            assert np.all(np.diff(pos) >= 0.0)
            if pos.size:
                assert pos.max() <= best
            if not out.censored and t > out.extinction_time:
                assert pos.size == 0

    def test_censored_run_has_alive_horizon_snapshot(self):
        out = simulate(BINARY, BM, 50.0, snapshot_times=[2.0],
                       caps=Caps(horizon=2.0), rng=1)
        assert out.censored
        assert math.isinf(out.extinction_time)
        assert out.snapshots[2.0].size > 0

    def test_cap_exceeded_carries_partial(self):
        with pytest.raises(CapExceeded) as err:
            simulate(BINARY, BM, 1e6, caps=Caps(max_events=5, horizon=1e4),
                     rng=2)
        partial = err.value.partial
        assert isinstance(partial, SimOutcome)
        assert partial.censored
        assert math.isinf(partial.extinction_time)

    def test_scaled_snapshot_arithmetic(self):
        out = SimOutcome(extinction_time=10.0, censored=False,
                         max_all_time=3.0,
                         snapshots={9.0: np.array([3.0]), 4.0: np.empty(0)},
                         events=1)
        pm = scaled_snapshot(out, 9.0, alpha=2.0)
        assert np.allclose(pm.atoms, [1.0])
        assert pm.atom_mass == pytest.approx(1.0 / 9.0)
        assert pm.total_mass() == pytest.approx(1.0 / 9.0)
        assert scaled_snapshot(out, 4.0, alpha=2.0).total_mass() == 0.0
        # heavier tail index changes only the mass normalization
        assert scaled_snapshot(out, 9.0, alpha=1.5).atom_mass == pytest.approx(9.0 ** -2.0)

    def test_jsonl_round_trip(self, tmp_path):
        caps = Caps(horizon=6.0)
        recs = [replica_record(5, i, out) for i, out in
                iter_replicas(BINARY, BM, 1.5, [2.0, 6.0], caps, seed=5, n=4)]
        path = tmp_path / "replicas.jsonl"
        write_jsonl(path, recs)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 4
        for line, rec in zip(lines, recs):
            back = json.loads(line)
            assert back["seed"] == 5
            assert set(back["snapshots"]) == {"2.0", "6.0"}
            if back["censored"]:
                assert back["extinction_time"] is None
            else:
                assert back["extinction_time"] == rec["extinction_time"]


class TestExactLaws:
    def test_far_start_extinction_matches_critical_gw(self):
        # killing is irrelevant from y0 = 1e6; extinction follows the
        # critical binary survival law 2/(2+t), truncated at the horizon
        ens = run_ensemble(BINARY, BM, 1e6, n_replicas=100_000, seed=9,
                           caps=Caps(horizon=10.0))
        obs = ens.extinction_time[~ens.censored]
        cdf = lambda t: (1.0 - 2.0 / (2.0 + t)) / (1.0 - 2.0 / 12.0)
        res = kstest(obs, cdf)
        assert res.pvalue > 1e-3

    def test_single_lifetime_law(self):
        # no offspring: extinction = Exp(beta) ∧ tau_0, both independent
        ens = run_ensemble(SOLO, BM, 1.3, n_replicas=40_000, seed=2,
                           caps=Caps(horizon=600.0))
        assert ens.censored.mean() < 1e-3
        z = ens.extinction_time[~ens.censored]

        def surv(t):
            return np.exp(-0.7 * t) * (2.0 * norm.cdf(1.3 / np.sqrt(t)) - 1.0)

        res = kstest(z, lambda t: (1.0 - surv(t)) / (1.0 - surv(600.0)))
        assert res.pvalue > 1e-3

    def test_start_near_origin_dies_immediately(self):
        # with exact_stamps=False the indicator {extinction > t} is only
        # trustworthy at registered cut times, so 0.1 goes in as a snapshot
        y0 = 1e-6
        ens = run_ensemble(BINARY, BM, y0, n_replicas=1_000_000, seed=4,
                           snapshot_times=[0.1], caps=Caps(horizon=0.2),
                           exact_stamps=False)
        assert survival(ens, 0.1) < 10.0 * y0

    def test_level_flags_match_gamblers_ruin(self):
        # identity branching = one killed Brownian path; P(touch h) = y0/h
        slow_clock = BranchingSpec(law=IDENTITY.law, beta=0.05)
        n = 50_000
        ens = run_ensemble(slow_clock, BM, 1.0, n_replicas=n, seed=11,
                           caps=Caps(horizon=40_000.0),
                           levels=[2.0, 5.0, 10.0, 30.0], exact_stamps=False)
        # every censored replica sits near sqrt(horizon) >> 30 and has long
        # since touched each level, so the raw flag mean is unbiased here
        for h in (2.0, 5.0, 10.0, 30.0):
            p = ens.level_flags[h].mean()
            se = math.sqrt(p * (1.0 - p) / n)
            assert abs(p - 1.0 / h) < 4.0 * se

    def test_exact_max_matches_quadrature_oracle(self):
        # M | died by T for the single killed path, via Gauss-Hermite over
        # the segment endpoint of the double-barrier exit probability
        y0, big_t = 1.0, 400.0
        ens = run_ensemble(IDENTITY, BM, y0, n_replicas=10_000, seed=13,
                           caps=Caps(horizon=big_t), exact_max=True)
        nodes, wts = hermegauss(201)
        b = y0 + np.sqrt(big_t) * nodes
        dead = float(np.sum(wts * bridges.cross_prob(y0, b, big_t)))

        def cond_cdf(ms):
            out = np.empty(len(ms))
            for i, m in enumerate(ms):
                eb = bridges.exit_bottom_prob(y0, b, m, big_t)
                out[i] = float(np.sum(wts * eb)) / dead
            return out

        m = ens.max_all_time[~ens.censored]
        res = kstest(m, cond_cdf)
        assert res.pvalue > 1e-3

    def test_heavy_tail_law_runs_and_stays_critical(self):
        spec = BranchingSpec(law=make_stable_tail(1.5, 0.5), beta=1.0)
        ens = run_ensemble(spec, BM, 1e6, n_replicas=20_000, seed=6,
                           snapshot_times=[3.0], caps=Caps(horizon=3.0))
        counts = ens.snapshots[3.0]["count"]
        se = counts.std() / math.sqrt(counts.size)
        assert abs(counts.mean() - 1.0) < 4.0 * se


class TestInvariants:
    def test_population_mean_is_martingale_far_from_barrier(self):
        ens = run_ensemble(BINARY, BM, 1e6, n_replicas=20_000, seed=3,
                           snapshot_times=[5.0], caps=Caps(horizon=5.0))
        counts = ens.snapshots[5.0]["count"]
        se = counts.std() / math.sqrt(counts.size)
        assert abs(counts.mean() - 1.0) < 4.0 * se

    def test_snapshot_max_never_exceeds_running_max(self):
        ens = run_ensemble(BINARY, BM, 1.0, n_replicas=30_000, seed=8,
                           snapshot_times=[1.0, 4.0], caps=Caps(horizon=2000.0),
                           exact_max=True)
        for t in (1.0, 4.0):
            snap = ens.snapshots[t]
            seen = snap["count"] > 0
            assert np.all(snap["max"][seen] <= ens.max_all_time[seen] + 1e-12)

    def test_survival_monotone_in_start_point(self):
        curves = {}
        for i, y in enumerate((0.5, 1.0, 2.0)):
            ens = run_ensemble(BINARY, BM, y, n_replicas=100_000, seed=40 + i,
                               snapshot_times=[4.0], caps=Caps(horizon=16.0),
                               exact_stamps=False)
            curves[y] = [survival(ens, t) for t in (4.0, 16.0)]
        n = 100_000
        for j in range(2):
            lo, mid, hi = curves[0.5][j], curves[1.0][j], curves[2.0][j]
            se = math.sqrt(hi * (1 - hi) / n)
            assert mid > lo - 3.0 * se
            assert hi > mid - 3.0 * se
            assert hi > lo + 3.0 * se  # the 4x start gap must be visible

    def test_killed_system_dies_no_later_than_unkilled(self):
        # one event tree, killing only prunes lineages
        rng = stream(17, 0, "scratch")
        seen_strict = 0
        done = 0
        while done < 150:
            pair = _coupled_extinctions(BINARY, BM, 0.7, rng)
            if pair is None:
                continue
            zk, zu = pair
            assert zk <= zu + 1e-12
            seen_strict += zk < zu - 1e-12
            done += 1
        assert seen_strict > 0


def _coupled_extinctions(spec, model, y0, rng, horizon=400.0, cap=200_000):
    """(killed, unkilled) extinction times built on one event tree; a lineage
    that crosses the origin leaves the killed system with an exact stamp but
    keeps branching in the unkilled one. None if the tree outruns the caps."""
    sig2 = model.sigma2
    work = [(0.0, float(y0), True)]
    z_killed, z_unkilled = 0.0, 0.0
    events = 0
    while work:
        events += 1
        if events > cap:
            return None
        t0, x, alive = work.pop()
        w = rng.exponential(1.0 / spec.beta)
        if t0 + w > horizon:
            return None
        end = x + math.sqrt(sig2 * w) * rng.standard_normal()
        if alive and rng.random() < float(bridges.cross_prob(x, end, sig2 * w)):
            tau = float(bridges.sample_passage_time(
                np.array([x]), np.array([abs(end)]), w, sig2, rng.random(1))[0])
            z_killed = max(z_killed, t0 + tau)
            alive = False
        k = int(sample_offspring(spec.law, rng.random()))
        if k == 0:
            z_unkilled = max(z_unkilled, t0 + w)
            if alive:
                z_killed = max(z_killed, t0 + w)
            continue
        work.extend((t0 + w, end, alive) for _ in range(k))
    return z_killed, z_unkilled


class TestStoppedMotionEquivalence:
    def test_binary_brownian(self):
        res = stopped_motion_equivalence_test(BINARY, BM, 1.0, 1.0, 10_000,
                                              seed=4)
        assert res["count_pvalue"] > 1e-3
        assert res["max_pvalue"] > 1e-3

    def test_zero_time_is_deterministic(self):
        res = stopped_motion_equivalence_test(BINARY, BM, 1.0, 0.0, 100)
        assert res["count_stat"] == 0.0 and res["max_stat"] == 0.0

    def test_single_path_case(self):
        res = stopped_motion_equivalence_test(SOLO, BM, 0.8, 1.0, 4_000,
                                              seed=5)
        assert res["count_pvalue"] > 1e-3
        assert res["max_pvalue"] > 1e-3

    def test_jump_diffusion(self):
        res = stopped_motion_equivalence_test(BINARY, JD, 1.0, 1.0, 4_000,
                                              seed=6)
        assert res["count_pvalue"] > 1e-3
        assert res["max_pvalue"] > 1e-3


class TestEnsemblePlumbing:
    def test_zero_snapshot_and_validation(self):
        ens = run_ensemble(BINARY, BM, 1.5, n_replicas=100, seed=1,
                           snapshot_times=[0.0, 1.0], caps=Caps(horizon=1.0))
        assert np.all(ens.snapshots[0.0]["count"] == 1)
        assert np.all(ens.snapshots[0.0]["max"] == 1.5)
        with pytest.raises(ValueError):
            run_ensemble(BINARY, BM, 1.0, n_replicas=10, seed=1,
                         snapshot_times=[5.0], caps=Caps(horizon=1.0))
        with pytest.raises(ValueError):
            run_ensemble(BINARY, BM, -1.0, n_replicas=10, seed=1)
        with pytest.raises(ValueError):
            run_ensemble(BINARY, BM, 1.0, n_replicas=0, seed=1)
        with pytest.raises(ValueError):
            Caps(max_events=0)
        with pytest.raises(ValueError):
            run_ensemble(BINARY, BM, 1.0, n_replicas=10, seed=1,
                         exact_max=True, exact_stamps=False)

    def test_event_budget_censors_in_place(self):
        ens = run_ensemble(BINARY, BM, 1e6, n_replicas=500, seed=2,
                           caps=Caps(max_events=300, horizon=50.0))
        assert ens.censored.any()
        assert np.all(np.isinf(ens.extinction_time[ens.censored]))

    def test_estimator_integration(self):
        ens = run_ensemble(BINARY, BM, 1.0, n_replicas=50_000, seed=21,
                           snapshot_times=[4.0, 8.0], caps=Caps(horizon=2000.0),
                           levels=[2.0, 4.0], exact_stamps=False)
        assert ens.censored.mean() < 1e-3
        for row in survival_tail(ens, "fixed", 1.0, [4.0, 8.0]):
            assert 0.0 < row.value < 1.0 and row.std_err > 0.0
        r2, r4 = max_tail(ens, "fixed", 1.0, [2.0, 4.0])
        assert r2.value > r4.value > 0.0
        emp = yaglom_empirical(ens, 8.0, "mass", alpha=2.0, min_survivors=100)
        assert emp.n > 1000
        with pytest.raises(ValueError):
            # 3.0 is neither a tracked level nor backed by stored maxima
            max_tail(ens, "fixed", 1.0, [3.0])

    def test_flag_and_exact_max_estimates_agree(self):
        kw = dict(n_replicas=30_000, caps=Caps(horizon=2000.0))
        via_flags = run_ensemble(BINARY, BM, 1.0, seed=31, levels=[3.0],
                                 exact_stamps=False, **kw)
        via_max = run_ensemble(BINARY, BM, 1.0, seed=32, exact_max=True, **kw)
        a = max_tail(via_flags, "fixed", 1.0, [3.0])[0]
        b = max_tail(via_max, "fixed", 1.0, [3.0])[0]
        tol = 5.0 * math.hypot(a.std_err, b.std_err)
        assert abs(a.value - b.value) < tol
