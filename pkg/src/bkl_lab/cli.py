"""Command line front end: seeded runs writing deterministic artifacts.

Every payload file (result.json, *.csv, *.jsonl) embeds the tool
version, the config hash, and the seed, and is byte-identical across
reruns of the same config + seed. Wall-clock timing goes to run.log
only, so it never breaks that guarantee.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, acceptance
from .config import MODES, ExperimentConfig
from .errors import BklError, ConfigError
from .limit_solvers import (GridParams, gw_survival, n_measure_survival,
                            shoot_K, solve_semilinear, solve_v_infinity)
from .offspring import mechanism_constant
from .particle_system import Caps, iter_replicas, replica_record, run_ensemble
from . import estimators as est


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv(cfg: ExperimentConfig, header, rows) -> str:
    lines = [f"# bkl-lab {__version__} config={cfg.hash()} seed={cfg.seed}",
             ",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _need(cfg: ExperimentConfig, *names):
    missing = [n for n in names if n not in cfg.parameters]
    if missing:
        raise ConfigError(f"mode {cfg.mode} needs parameters {missing}")


def _alpha_C(cfg: ExperimentConfig):
    p = cfg.parameters
    if "alpha" in p and "C" in p:
        return float(p["alpha"]), float(p["C"])
    if cfg.spec is not None:
        law = cfg.spec.law
        alpha = 2.0 if law.tail_alpha is None else float(law.tail_alpha)
        return alpha, mechanism_constant(cfg.spec)
    raise ConfigError("need parameters alpha and C, or a branching spec")


def _grid_params(p: dict) -> GridParams:
    picked = {k: p[k] for k in ("n_y", "y_max", "dt_max") if k in p}
    if "n_y" in picked:
        picked["n_y"] = int(picked["n_y"])
    return GridParams(**picked)


def _scalar_meta(meta: dict) -> dict:
    return {k: (float(v) if isinstance(v, (float, np.floating)) else v)
            for k, v in meta.items()
            if isinstance(v, (int, float, str, bool, np.floating))}


def _caps(p: dict) -> Caps:
    return Caps(max_events=int(p.get("max_events", 100_000_000)),
                horizon=float(p.get("horizon", math.inf)))


def _ensemble(cfg: ExperimentConfig, y0: float, horizon: float,
              snapshot_times=(), levels=()):
    p = cfg.parameters
    return run_ensemble(
        cfg.spec, cfg.model, y0, n_replicas=cfg.replicas, seed=cfg.seed,
        snapshot_times=snapshot_times,
        caps=Caps(max_events=int(p.get("max_events", 100_000_000)),
                  horizon=horizon),
        levels=levels, exact_max=bool(p.get("exact_max", False)),
        exact_stamps=bool(p.get("exact_stamps", True)),
        chunk=int(p.get("chunk", 200_000)))


def _run_ode(cfg: ExperimentConfig):
    _need(cfg, "t_values")
    ts = [float(t) for t in cfg.parameters["t_values"]]
    vals = [float(v) for v in np.atleast_1d(gw_survival(cfg.spec,
                                                        np.asarray(ts)))]
    files = {"ode.csv": _csv(cfg, ("t", "survival"), zip(ts, vals))}
    return {"t_values": ts, "survival": vals}, files


def _run_pde(cfg: ExperimentConfig):
    p = cfg.parameters
    alpha, C = _alpha_C(cfg)
    sigma2 = float(p.get("sigma2", 1.0))
    T = float(p.get("T", 1.0))
    store = tuple(float(t) for t in p.get("store_times", ()))
    gp = _grid_params(p)
    problem = p.get("problem", "v_infinity")
    if problem == "v_infinity":
        sol = solve_v_infinity(alpha, C, sigma2, T, gp, store_times=store)
    elif problem == "decay":
        level = float(p.get("level", 1.0))
        sol = solve_semilinear(lambda y: np.full_like(y, level), alpha, C,
                               sigma2, T, gp, store_times=store)
    else:
        raise ConfigError(f"unknown pde problem {problem!r}")
    rows = []
    for t in sol.times:
        row = sol.row(t)
        rows.extend((float(t), float(y), float(v))
                    for y, v in zip(sol.grid, row))
    payload = {"alpha": alpha, "C": C, "sigma2": sigma2, "T": T,
               "problem": problem, "times": [float(t) for t in sol.times],
               "meta": _scalar_meta(sol.meta)}
    if problem == "v_infinity" and np.any(np.abs(sol.times - 1.0) < 1e-9):
        payload["survival_intensity_at_1"] = float(
            n_measure_survival(sol, 1.0))
    files = {"pde.csv": _csv(cfg, ("t", "y", "v"), rows)}
    return payload, files


def _run_shoot(cfg: ExperimentConfig):
    p = cfg.parameters
    alpha, C = _alpha_C(cfg)
    sigma2 = float(p.get("sigma2", 1.0))
    sol = shoot_K(alpha, C, sigma2, float(p.get("tol", 1e-9)),
                  blowup_at=float(p.get("blowup_at", 1.0)))
    _, kv, kp = sol.meta["trajectory"]
    drift = ((sigma2 / 4.0) * kp ** 2
             - C / (alpha + 1.0) * kv ** (alpha + 1.0)
             - (sigma2 / 4.0) * sol.slope_at_0 ** 2)
    conservation = float(np.max(np.abs(drift) / (1.0 + kv ** (alpha + 1.0))))
    payload = {"alpha": alpha, "C": C, "sigma2": sigma2,
               "slope_at_0": float(sol.slope_at_0),
               "blowup_location": float(sol.blowup_location),
               "conservation_drift": conservation}
    rows = zip(sol.grid, sol.K_values, sol.K_prime)
    files = {"shoot_profile.csv": _csv(cfg, ("y", "K", "K_prime"), rows)}
    return payload, files


def _run_simulate(cfg: ExperimentConfig):
    _need(cfg, "y0")
    p = cfg.parameters
    snaps = tuple(float(t) for t in p.get("snapshot_times", ()))
    records = [replica_record(cfg.seed, idx, outcome)
               for idx, outcome in iter_replicas(
                   cfg.spec, cfg.model, float(p["y0"]), snaps, _caps(p),
                   cfg.seed, cfg.replicas)]
    extinct = sum(1 for r in records if not r["censored"])
    payload = {"replicas": len(records), "extinct": extinct,
               "censored": len(records) - extinct}
    header = {"tool": "bkl-lab", "version": __version__,
              "config_hash": cfg.hash(), "seed": cfg.seed}
    lines = [json.dumps(header, sort_keys=True)]
    lines.extend(json.dumps(r, sort_keys=True) for r in records)
    return payload, {"simulate.jsonl": "\n".join(lines) + "\n"}


def _estimate_rows(cfg: ExperimentConfig, kind: str):
    p = cfg.parameters
    _need(cfg, "y0")
    y0 = float(p["y0"])
    if kind == "survival_tail":
        _need(cfg, "t_values")
        ts = sorted(float(t) for t in p["t_values"])
        horizon = float(p.get("horizon", ts[-1]))
        ens = _ensemble(cfg, y0, horizon,
                        snapshot_times=tuple(t for t in ts if t < horizon))
        y_mode = p.get("y_mode", "fixed")
        y = float(p.get("y", y0))
        rows = est.survival_tail(ens, y_mode, y, ts)
        return ([r.as_row("survival_tail", t=t, y=y, y_mode=y_mode)
                 for t, r in zip(ts, rows)],
                {"events": float(ens.events)})
    if kind == "max_tail":
        _need(cfg, "x_values", "horizon")
        xs = sorted(float(x) for x in p["x_values"])
        ens = _ensemble(cfg, y0, float(p["horizon"]), levels=tuple(xs))
        y_mode = p.get("y_mode", "fixed")
        y = float(p.get("y", y0))
        rows = est.max_tail(ens, y_mode, y, xs)
        return ([r.as_row("max_tail", x=x, y=y, y_mode=y_mode)
                 for x, r in zip(xs, rows)],
                {"events": float(ens.events)})
    if kind == "yaglom":
        _need(cfg, "t")
        t = float(p["t"])
        ens = _ensemble(cfg, y0, t, snapshot_times=(t,))
        emp = est.yaglom_empirical(ens, t, p.get("statistic", "max"),
                                   alpha=float(p.get("alpha", 2.0)))
        qs = [0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.99]
        quants = np.quantile(emp.values, qs)
        rows = [{"op": "yaglom", "t": t, "q": q, "value": float(v),
                 "std_err": 0.0, "n": emp.n, "censored_fraction": 0.0}
                for q, v in zip(qs, quants)]
        return rows, {"survivors": emp.n, "events": float(ens.events)}
    raise ConfigError(f"unknown estimator {kind!r}")


def _run_estimate(cfg: ExperimentConfig):
    _need(cfg, "estimator")
    rows, extra = _estimate_rows(cfg, cfg.parameters["estimator"])
    fixed = ["value", "std_err", "n", "censored_fraction"]
    params = sorted(k for k in rows[0] if k != "op" and k not in fixed)
    cols = ["op"] + params + fixed
    table = [[row[c] for c in cols] for row in rows]
    payload = {"rows": rows}
    payload.update(extra)
    return payload, {"estimate.csv": _csv(cfg, cols, table)}


def _run_verify(cfg: ExperimentConfig):
    numbers = cfg.parameters.get("criteria")
    if numbers is not None:
        numbers = [int(k) for k in numbers]
    results = acceptance.run_all(numbers, seed=cfg.seed, echo=print)
    records = []
    for r in results:
        rec = r.as_record()
        rec.pop("runtime_s")  # timing is not part of the deterministic payload
        records.append(rec)
    lines = [f"[{'PASS' if r['passed'] else 'FAIL'}] criterion "
             f"{r['criterion']:2d} {r['name']}: measured={r['measured']:.6g} "
             f"target={r['target']:.6g} tol={r['tolerance']}"
             for r in records]
    payload = {"criteria": records,
               "passed": all(r["passed"] for r in records)}
    return payload, {"verify.txt": "\n".join(lines) + "\n"}


def _run_emit(cfg: ExperimentConfig):
    p = cfg.parameters
    _need(cfg, "source")
    source = p["source"]
    if source == "gw_curve":
        _need(cfg, "t_values")
        if cfg.spec is None:
            raise ConfigError("gw_curve needs a branching spec")
        ts = [float(t) for t in p["t_values"]]
        vals = np.atleast_1d(gw_survival(cfg.spec, np.asarray(ts)))
        triples = [(t, float(v), 0.0) for t, v in zip(ts, vals)]
    elif source == "pde_profile":
        alpha, C = _alpha_C(cfg)
        sol = solve_v_infinity(alpha, C, float(p.get("sigma2", 1.0)),
                               float(p.get("T", 1.0)))
        row = sol.row(sol.times[-1])
        step = max(1, sol.grid.size // 200)
        triples = [(float(y), float(v), 0.0)
                   for y, v in zip(sol.grid[::step], row[::step])]
    elif source == "shoot_profile":
        alpha, C = _alpha_C(cfg)
        sol = shoot_K(alpha, C, float(p.get("sigma2", 1.0)),
                      float(p.get("tol", 1e-9)))
        step = max(1, sol.grid.size // 200)
        triples = [(float(y), float(v), 0.0)
                   for y, v in zip(sol.grid[::step], sol.K_values[::step])]
    elif source in ("survival_tail", "max_tail"):
        if cfg.spec is None or cfg.model is None:
            raise ConfigError(f"{source} needs a branching spec and a model")
        rows, _ = _estimate_rows(cfg, source)
        key = "t" if source == "survival_tail" else "x"
        triples = [(row[key], row["value"], row["std_err"]) for row in rows]
    else:
        raise ConfigError(f"unknown plot source {source!r}")
    files = {"plot_data.csv": _csv(cfg, ("x", "y", "yerr"), triples)}
    return {"source": source, "points": len(triples)}, files


_HANDLERS = {
    "ode": _run_ode,
    "pde": _run_pde,
    "shoot": _run_shoot,
    "simulate": _run_simulate,
    "estimate": _run_estimate,
    "verify": _run_verify,
    "emit-plot-data": _run_emit,
}


def run(cfg: ExperimentConfig):
    """Execute a config. Returns (payload, files, exit_code); files maps
    name -> exact text content, all byte-deterministic for fixed
    config + seed."""
    payload, files = _HANDLERS[cfg.mode](cfg)
    code = 0
    if cfg.mode == "verify" and not payload["passed"]:
        code = 2
    envelope = {"tool": "bkl-lab", "version": __version__,
                "config_hash": cfg.hash(), "seed": cfg.seed,
                "mode": cfg.mode, "config": cfg.canonical(),
                "results": payload}
    files["result.json"] = json.dumps(envelope, sort_keys=True,
                                      indent=2) + "\n"
    return payload, files, code


def _effective_threads(cfg: ExperimentConfig) -> int:
    raw = os.environ.get("BKL_THREADS")
    if raw is None:
        return cfg.threads
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"BKL_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("BKL_THREADS must be positive")
    return n


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bkl-lab",
                     description="branching particle systems, their scaling "
                                 "limits, and the verification harness")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for mode in MODES:
        sp = sub.add_parser(mode)
        sp.add_argument("--config", required=True, help="JSON config path")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
        sp.add_argument("--out", default=None,
                        help="override the output directory")
    return parser


def main(argv=None) -> int:
    t_wall = time.time()
    started = time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime(t_wall))
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise ConfigError(f"missing subcommand, one of {MODES}")
        cfg = ExperimentConfig.load(args.config)
        if cfg.mode != args.command:
            raise ConfigError(f"config mode {cfg.mode!r} does not match "
                              f"subcommand {args.command!r}")
        cfg = cfg.with_overrides(seed=args.seed, output=args.out)
        threads = _effective_threads(cfg)
        payload, files, code = run(cfg)
        outdir = Path(cfg.output or "bkl-lab-out")
        outdir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            (outdir / name).write_text(text)
        log = [f"bkl-lab {__version__}",
               f"mode {cfg.mode}",
               f"config_hash {cfg.hash()}",
               f"seed {cfg.seed}",
               f"threads {threads} (chunked merge; degree never changes "
               f"results)",
               f"started {started}Z",
               f"wall_clock_s {time.time() - t_wall:.3f}",
               f"exit_code {code}",
               f"files {sorted(files)}"]
        (outdir / "run.log").write_text("\n".join(log) + "\n")
        return code
    except BklError as err:
        sys.stderr.write(json.dumps(err.as_record(), sort_keys=True) + "\n")
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())
