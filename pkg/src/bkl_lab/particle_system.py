"""Branching diffusion killed at the origin: exact event-driven simulation.

A replica starts with one particle at y0 > 0. Particles carry independent
exponential branching clocks (rate beta) and, for jump-diffusion motion,
independent exponential jump clocks; at a branch the particle is replaced by
k offspring at its death position. Between consecutive events the diffusive
motion is bridged exactly: endpoints are Gaussian, the killing decision is the
endpoint-conditioned crossing probability, death stamps invert the bridge
passage-time CDF, and level-touch indicators and path maxima come from the
same reflection series. Nothing is time-stepped, so there is no
discretization bias anywhere.

One vectorized engine (all live particles of a cohort advance together,
event times are per particle) serves two accumulation modes:

  * outcome mode (`simulate`): a single replica with full snapshot positions
    and the all-time maximum sampled exactly segment by segment;
  * ensemble mode (`run_ensemble`): replicas in chunks, keeping per-replica
    extinction stamps, snapshot counts/maxima, and per-level touch indicators
    instead of stored maxima. One shared uniform per segment drives every
    level, so the indicators are consistent across nested levels.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import bridges
from .errors import CapExceeded
from .levy_motion import BrownianMotion, JumpDiffusion, LevyModel
from .offspring import BranchingSpec, sample_offspring
from .rng import stream


@dataclass(frozen=True)
class Caps:
    """Hard limits for one run: total particle-segment budget and time horizon.

    The horizon censors replicas still alive at that time; the event budget
    censors whatever is still running when it is spent.
    """
    max_events: int = 100_000_000
    horizon: float = math.inf

    def __post_init__(self):
        if self.max_events <= 0 or self.horizon <= 0:
            raise ValueError("caps must be positive")


@dataclass
class SimOutcome:
    """One replica's record.

    extinction_time is inf when censored (still alive at the horizon or when
    the event budget ran out). max_all_time is the exact running maximum of
    the killed system; snapshots map each requested time to the positions of
    particles whose ancestral path infimum is still positive.
    """
    extinction_time: float
    censored: bool
    max_all_time: float
    snapshots: dict[float, np.ndarray]
    events: int


@dataclass(frozen=True)
class PointMeasure:
    """Finitely many atoms carrying one common mass."""
    atoms: np.ndarray
    atom_mass: float

    def total_mass(self) -> float:
        return self.atom_mass * self.atoms.size


@dataclass
class Ensemble:
    """Columnar replica records, shaped for the estimators module.

    max_all_time is None unless the run sampled exact maxima; max-tail
    estimation then relies on level_flags (exact per-level touch indicators)
    plus max_floor, the running maximum over visited endpoints, which bounds
    what a censored replica might still do.
    """
    n: int
    horizon: float
    seed: int
    extinction_time: np.ndarray
    censored: np.ndarray
    max_floor: np.ndarray
    max_all_time: np.ndarray | None
    level_flags: dict[float, np.ndarray]
    snapshots: dict[float, dict[str, np.ndarray]]
    events: int


def _check_cuts(snapshot_times, horizon: float) -> np.ndarray:
    cuts = np.asarray(sorted(set(float(t) for t in snapshot_times)), dtype=float)
    if cuts.size and cuts[0] < 0.0:
        raise ValueError("snapshot times must be nonnegative")
    if cuts.size and cuts[-1] > horizon:
        raise ValueError("snapshot times beyond the horizon are unreachable")
    return cuts


def _run_cohort(spec: BranchingSpec, model: LevyModel, y0: float,
                cut_times: np.ndarray, caps: Caps, rng: np.random.Generator,
                n: int, *, levels=(), exact_max: bool = False,
                exact_stamps: bool = True, collect: bool = False) -> dict:
    """Simulate n independent replicas on one RNG stream.

    All live particles of all replicas advance together; each carries its own
    next-event time, so the vectorization never touches the law. Returns the
    per-replica accumulator arrays.

    exact_stamps=False records a crossing death at its segment end instead of
    inverting the passage-time CDF. Segments never straddle a snapshot time
    (cuts are events), so survival indicators at the requested times are
    unchanged; only the continuous law of the extinction time coarsens.
    """
    if exact_max and not exact_stamps:
        raise ValueError("exact_max requires exact_stamps")
    law, beta = spec.law, spec.beta
    sig2 = model.sigma2
    jumpy = isinstance(model, JumpDiffusion) and model.jump_rate > 0.0
    rate = model.jump_rate if jumpy else 0.0
    horizon = float(caps.horizon)
    n_cuts = cut_times.size
    y0 = float(y0)

    # live-particle state
    rep = np.arange(n, dtype=np.int64)
    pos = np.full(n, y0)
    now = np.zeros(n)
    tb = rng.exponential(1.0 / beta, n)
    ci = np.zeros(n, dtype=np.int64)
    tj = rng.exponential(1.0 / rate, n) if jumpy else None

    # per-replica accumulators
    n_alive = np.ones(n, dtype=np.int64)
    last_death = np.zeros(n)
    ext = np.full(n, np.inf)
    cens = np.zeros(n, dtype=bool)
    top = np.full(n, y0)
    levels = tuple(float(h) for h in levels)
    flags = {h: np.full(n, y0 >= h) for h in levels}
    snap_count = np.zeros((n_cuts, n), dtype=np.int64)
    snap_max = np.full((n_cuts, n), -np.inf)
    snap_pos: list[list] = [[] for _ in range(n_cuts)]

    def _stamp_deaths(dead_rep, times):
        np.maximum.at(last_death, dead_rep, times)
        np.subtract.at(n_alive, dead_rep, 1)
        fin = dead_rep[n_alive[dead_rep] == 0]
        ext[fin] = last_death[fin]

    events = 0
    cap_hit = False
    while rep.size:
        events += rep.size
        if events > caps.max_events:
            cens[np.unique(rep)] = True
            cap_hit = True
            break

        # next event per particle: 0 = branch, 1 = cut/horizon, 2 = jump
        te = tb.copy()
        typ = np.zeros(rep.size, dtype=np.int8)
        if n_cuts:
            next_cut = np.where(ci < n_cuts,
                                cut_times[np.minimum(ci, n_cuts - 1)], horizon)
        else:
            next_cut = np.full(rep.size, horizon)
        m = next_cut < te
        te[m] = next_cut[m]
        typ[m] = 1
        if jumpy:
            m = tj < te
            te[m] = tj[m]
            typ[m] = 2

        # diffusive segment to the event time; exact endpoint-conditioned kill
        dt = te - now
        s = sig2 * dt
        end = pos + rng.standard_normal(rep.size) * np.sqrt(s)
        p_cross = bridges.cross_prob(pos, end, s)
        killed = rng.random(rep.size) < p_cross

        kidx = np.flatnonzero(killed)
        if kidx.size:
            if exact_stamps:
                tau = bridges.sample_passage_time(pos[kidx], np.abs(end[kidx]),
                                                  dt[kidx], sig2,
                                                  rng.random(kidx.size))
                _stamp_deaths(rep[kidx], now[kidx] + tau)
            else:
                _stamp_deaths(rep[kidx], te[kidx])
            if exact_max:
                # invert the max law only when the segment can beat the
                # running top: F(top) < u decides it and the same uniform
                # then drives the inversion, so the skip is exact
                svar = sig2 * tau
                u = rng.random(kidx.size)
                beat = np.flatnonzero(
                    u > bridges.first_passage_max_cdf(top[rep[kidx]],
                                                      pos[kidx], svar))
                if beat.size:
                    mx = bridges.sample_max_before_passage(
                        pos[kidx][beat], svar[beat], u[beat])
                    np.maximum.at(top, rep[kidx][beat], mx)

        if levels:
            # one uniform per segment for all levels keeps nested indicators
            # consistent; alive and killed segments get their own conditional
            # touch probabilities
            ul = rng.random(rep.size)
            p_alive = 1.0 - p_cross
            for h in levels:
                flag = flags[h]
                undecided = ~flag[rep] & (dt > 0.0)
                trivial = (pos >= h) | (~killed & (end >= h))
                need = undecided & ~trivial
                p_touch = np.zeros(rep.size)
                ia = np.flatnonzero(need & ~killed)
                if ia.size:
                    q = bridges.stay_in_strip_prob(pos[ia], end[ia], h, s[ia])
                    p_touch[ia] = 1.0 - q / np.maximum(p_alive[ia], 1e-300)
                ik = np.flatnonzero(need & killed)
                if ik.size:
                    eb = bridges.exit_bottom_prob(pos[ik], end[ik], h, s[ik])
                    p_touch[ik] = 1.0 - eb / p_cross[ik]
                hit = (undecided & trivial) | (need & (ul < np.clip(p_touch, 0.0, 1.0)))
                if np.any(hit):
                    flag[rep[hit]] = True

        sidx = np.flatnonzero(~killed)
        if exact_max:
            pick = sidx[s[sidx] > 0.0]
            if pick.size:
                u = rng.random(pick.size)
                tcur = top[rep[pick]]
                stay = bridges.stay_in_strip_prob(pos[pick], end[pick],
                                                  tcur, s[pick])
                denom = np.maximum(1.0 - p_cross[pick], 1e-300)
                beat = np.flatnonzero(u > stay / denom)
                if beat.size:
                    mx = bridges.sample_max_given_alive(
                        pos[pick][beat], end[pick][beat], s[pick][beat],
                        u[beat])
                    np.maximum.at(top, rep[pick][beat], mx)
        elif sidx.size:
            np.maximum.at(top, rep[sidx], np.maximum(pos[sidx], end[sidx]))

        # branch events: replace the particle by k offspring at its position
        drop = killed.copy()
        spawn_src = None
        b = sidx[typ[sidx] == 0]
        if b.size:
            k = sample_offspring(law, rng.random(b.size))
            dead0 = b[k == 0]
            if dead0.size:
                _stamp_deaths(rep[dead0], te[dead0])
                drop[dead0] = True
            cont = b[k >= 1]
            if cont.size:
                # the continuing slot is one offspring; its jump clock is kept
                # (memoryless), only the branch clock is redrawn
                tb[cont] = te[cont] + rng.exponential(1.0 / beta, cont.size)
            multi = b[k >= 2]
            if multi.size:
                extra = (k[k >= 2] - 1).astype(np.int64)
                spawn_src = np.repeat(multi, extra)
                np.add.at(n_alive, rep[multi], extra)

        # cut events: record a snapshot or censor at the horizon
        c = sidx[typ[sidx] == 1]
        if c.size:
            at_horizon = c[ci[c] >= n_cuts]
            recording = c[ci[c] < n_cuts]
            if recording.size:
                slot = ci[recording] * n + rep[recording]
                np.add.at(snap_count.ravel(), slot, 1)
                np.maximum.at(snap_max.ravel(), slot, end[recording])
                if collect:
                    for cut in np.unique(ci[recording]):
                        sel = recording[ci[recording] == cut]
                        snap_pos[int(cut)].append(
                            (rep[sel].copy(), end[sel].copy()))
                ci[recording] += 1
            if at_horizon.size:
                cens[rep[at_horizon]] = True
                drop[at_horizon] = True

        # jump events: displace; landing at or below 0 kills exactly there
        if jumpy:
            j = sidx[typ[sidx] == 2]
            if j.size:
                land = end[j] + model.jump.sample(rng, j.size)
                deadj = land <= 0.0
                if np.any(deadj):
                    _stamp_deaths(rep[j[deadj]], te[j[deadj]])
                    drop[j[deadj]] = True
                jl = j[~deadj]
                if jl.size:
                    live_land = land[~deadj]
                    end[jl] = live_land
                    tj[jl] = te[jl] + rng.exponential(1.0 / rate, jl.size)
                    np.maximum.at(top, rep[jl], live_land)
                    for h in levels:
                        up = jl[live_land >= h]
                        if up.size:
                            flags[h][rep[up]] = True

        # spawned offspring start at the parent's branch position and time,
        # with fresh branch and jump clocks; capture before compaction
        if spawn_src is not None:
            sp = spawn_src
            sp_state = (rep[sp], end[sp], te[sp],
                        te[sp] + rng.exponential(1.0 / beta, sp.size), ci[sp],
                        te[sp] + rng.exponential(1.0 / rate, sp.size)
                        if jumpy else None)

        keep = ~drop
        rep, pos, now, tb, ci = (rep[keep], end[keep], te[keep],
                                 tb[keep], ci[keep])
        if jumpy:
            tj = tj[keep]
        if spawn_src is not None:
            rep = np.concatenate([rep, sp_state[0]])
            pos = np.concatenate([pos, sp_state[1]])
            now = np.concatenate([now, sp_state[2]])
            tb = np.concatenate([tb, sp_state[3]])
            ci = np.concatenate([ci, sp_state[4]])
            if jumpy:
                tj = np.concatenate([tj, sp_state[5]])

    ext = np.where(cens, np.inf, ext)
    return {"ext": ext, "cens": cens, "top": top, "flags": flags,
            "snap_count": snap_count, "snap_max": snap_max,
            "snap_pos": snap_pos, "events": events, "cap_hit": cap_hit}


def simulate(spec: BranchingSpec, model: LevyModel, y0: float,
             snapshot_times=(), caps: Caps = Caps(),
             rng: int | np.random.Generator = 0) -> SimOutcome:
    """One replica with full snapshot positions and exact all-time maximum.

    rng is either a ready Generator or an integer experiment seed (the
    replica then runs on particle stream 0 of that seed). Raises CapExceeded
    carrying the censored partial outcome when the event budget runs out.
    """
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    gen = rng if isinstance(rng, np.random.Generator) \
        else stream(int(rng), 0, "particles")
    cuts = _check_cuts(snapshot_times, caps.horizon)
    eng_cuts = cuts[cuts > 0.0]
    r = _run_cohort(spec, model, y0, eng_cuts, caps, gen, 1,
                    exact_max=True, collect=True)
    snapshots: dict[float, np.ndarray] = {}
    if cuts.size and cuts[0] == 0.0:
        snapshots[0.0] = np.asarray([float(y0)])
    for j, tc in enumerate(eng_cuts):
        parts = r["snap_pos"][j]
        snapshots[float(tc)] = (np.sort(np.concatenate([p for _, p in parts]))
                                if parts else np.empty(0))
    out = SimOutcome(extinction_time=float(r["ext"][0]),
                     censored=bool(r["cens"][0]),
                     max_all_time=float(r["top"][0]),
                     snapshots=snapshots, events=int(r["events"]))
    if r["cap_hit"]:
        raise CapExceeded(f"event budget {caps.max_events} exhausted",
                          partial=out, max_events=caps.max_events)
    return out


def run_ensemble(spec: BranchingSpec, model: LevyModel, y0: float, *,
                 n_replicas: int, seed: int, snapshot_times=(),
                 caps: Caps = Caps(), levels=(), exact_max: bool = False,
                 exact_stamps: bool = True, chunk: int = 200_000) -> Ensemble:
    """Simulate independent replicas in chunks, one Philox stream per chunk.

    Identical arguments (including chunk) give bit-identical output. The
    event budget is split across chunks in proportion to their size; replicas
    still running when a chunk's budget is spent are censored in place, not
    raised, so the censoring statistics stay visible to the estimators.

    With exact_stamps=False a lineage killed inside a segment is stamped at
    the segment's end. Segments never straddle cut times, so the indicators
    {extinction_time > t} stay exact for every t in snapshot_times and for
    the horizon, but are biased upward at any other t.
    """
    if not y0 > 0:
        raise ValueError("y0 must be positive")
    n = int(n_replicas)
    if n <= 0:
        raise ValueError("n_replicas must be positive")
    cuts = _check_cuts(snapshot_times, caps.horizon)
    eng_cuts = cuts[cuts > 0.0]
    levels = tuple(float(h) for h in levels)
    ext = np.empty(n)
    cens = np.empty(n, dtype=bool)
    floor = np.empty(n)
    flags = {h: np.empty(n, dtype=bool) for h in levels}
    snapshots = {float(tc): {"count": np.empty(n, dtype=np.int32),
                             "max": np.empty(n)} for tc in cuts}
    if cuts.size and cuts[0] == 0.0:
        snapshots[0.0]["count"][:] = 1
        snapshots[0.0]["max"][:] = y0
    events = 0
    start, chunk_index = 0, 0
    while start < n:
        m = min(int(chunk), n - start)
        part = Caps(max_events=max(1, int(caps.max_events * (m / n))),
                    horizon=caps.horizon)
        r = _run_cohort(spec, model, y0, eng_cuts, part,
                        stream(int(seed), chunk_index, "particles"), m,
                        levels=levels, exact_max=exact_max,
                        exact_stamps=exact_stamps)
        sl = slice(start, start + m)
        ext[sl] = r["ext"]
        cens[sl] = r["cens"]
        floor[sl] = r["top"]
        for h in levels:
            flags[h][sl] = r["flags"][h]
        for j, tc in enumerate(eng_cuts):
            snapshots[float(tc)]["count"][sl] = r["snap_count"][j]
            snapshots[float(tc)]["max"][sl] = r["snap_max"][j]
        events += r["events"]
        start += m
        chunk_index += 1
    return Ensemble(n=n, horizon=float(caps.horizon), seed=int(seed),
                    extinction_time=ext, censored=cens, max_floor=floor,
                    max_all_time=floor.copy() if exact_max else None,
                    level_flags=flags, snapshots=snapshots, events=events)


def scaled_snapshot(outcome: SimOutcome, t: float, alpha: float) -> PointMeasure:
    """Diffusively rescaled snapshot: atoms at position/sqrt(t), each carrying
    mass t**(-1/(alpha-1))."""
    if not t > 0:
        raise ValueError("t must be positive")
    pos = np.asarray(outcome.snapshots[float(t)], dtype=float)
    return PointMeasure(atoms=pos / math.sqrt(t),
                        atom_mass=t ** (-1.0 / (alpha - 1.0)))


def _stopped_restricted_snapshot(spec: BranchingSpec, model: LevyModel,
                                 y0: float, t: float,
                                 rng: np.random.Generator) -> np.ndarray:
    """Positions at time t of particles whose motion never reached 0, in the
    construction where motion is stopped at the origin (branching continues)
    and the measure is restricted to (0, inf) afterwards.

    A stopped lineage can never re-enter the positive half-line, so its
    subtree is pruned. Deliberately a different decomposition of the segment
    law than the engine's: passage times are drawn directly from the
    first-passage law and surviving endpoints by rejection against the
    reflection tilt, instead of Gaussian endpoint plus crossing Bernoulli.
    """
    sig2 = model.sigma2
    jumpy = isinstance(model, JumpDiffusion) and model.jump_rate > 0.0
    out = []
    work = [(0.0, float(y0))]
    while work:
        t0, x = work.pop()
        t_branch = t0 + rng.exponential(1.0 / spec.beta)
        t_end = min(t_branch, t)
        cur, alive = t0, True
        while alive and cur < t_end:
            nxt = min(t_end, cur + rng.exponential(1.0 / model.jump_rate)) \
                if jumpy else t_end
            dt = nxt - cur
            z = rng.standard_normal()
            if x * x / (sig2 * z * z) <= dt:
                alive = False
                break
            s = sig2 * dt
            while True:
                b = x + math.sqrt(s) * rng.standard_normal()
                if b > 0.0 and rng.random() < -math.expm1(-2.0 * x * b / s):
                    break
            x = b
            if jumpy and nxt < t_end:
                x += float(model.jump.sample(rng, 1)[0])
                if x <= 0.0:
                    alive = False
                    break
            cur = nxt
        if not alive:
            continue
        if t_branch >= t:
            out.append(x)
            continue
        k = int(sample_offspring(spec.law, rng.random()))
        work.extend((t_branch, x) for _ in range(k))
    return np.asarray(out, dtype=float)


def stopped_motion_equivalence_test(spec: BranchingSpec, model: LevyModel,
                                    y0: float, t: float, n: int, *,
                                    seed: int = 0) -> dict:
    """Two-sample comparison of the killing construction (main engine) with
    the stopped-then-restricted construction (reference walker) at time t.

    Returns KS statistics and p-values for the alive-particle count and for
    the maximum position among survivors.
    """
    from scipy.stats import ks_2samp

    if t == 0.0:
        return {"n": int(n), "count_stat": 0.0, "count_pvalue": 1.0,
                "max_stat": 0.0, "max_pvalue": 1.0}
    ens = run_ensemble(spec, model, y0, n_replicas=n, seed=seed,
                       snapshot_times=[t], caps=Caps(horizon=t))
    kill_counts = ens.snapshots[float(t)]["count"]
    kill_max = ens.snapshots[float(t)]["max"][kill_counts > 0]

    gen = stream(int(seed), 0, "scratch")
    stop_counts = np.empty(int(n), dtype=np.int64)
    stop_max = []
    for i in range(int(n)):
        alive = _stopped_restricted_snapshot(spec, model, y0, t, gen)
        stop_counts[i] = alive.size
        if alive.size:
            stop_max.append(alive.max())
    ks_count = ks_2samp(kill_counts, stop_counts, method="asymp")
    ks_max = ks_2samp(kill_max, np.asarray(stop_max), method="asymp")
    return {"n": int(n),
            "count_stat": float(ks_count.statistic),
            "count_pvalue": float(ks_count.pvalue),
            "max_stat": float(ks_max.statistic),
            "max_pvalue": float(ks_max.pvalue)}


def replica_record(seed: int, replica: int, outcome: SimOutcome) -> dict:
    """JSON-safe record of one replica; extinction_time is null when censored."""
    return {"seed": int(seed), "replica": int(replica),
            "extinction_time": (None if outcome.censored
                                else float(outcome.extinction_time)),
            "censored": bool(outcome.censored),
            "max_all_time": float(outcome.max_all_time),
            "snapshots": {str(float(t)): [float(x) for x in v]
                          for t, v in outcome.snapshots.items()}}


def iter_replicas(spec: BranchingSpec, model: LevyModel, y0: float,
                  snapshot_times, caps: Caps, seed: int, n: int):
    """Yield (replica_index, SimOutcome) on per-replica streams; a replica
    that exhausts its event budget yields its censored partial outcome."""
    for i in range(int(n)):
        try:
            out = simulate(spec, model, y0, snapshot_times, caps,
                           stream(int(seed), i, "particles"))
        except CapExceeded as err:
            out = err.partial
        yield i, out


def write_jsonl(path, records) -> None:
    """Stream an iterable of dict records as JSON lines."""
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")
