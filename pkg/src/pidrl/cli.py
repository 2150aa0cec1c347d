"""Command-line experiment runner: ``pidrl {train,eval,boundary,classify,simc}``.

Exit codes: 0 success, 2 config/usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .actor import ActuatorLimits, half_rule, load_params, save_params, simc_pi
from .analysis import boundary_lobe, is_stable, stability_boundary, step_metrics
from .config import ConfigError, ExperimentConfig, load_config
from .critic import save_mlp
from .env import STEP_LOG_FIELDS, PidEnv
from .plant import build_discrete_plant
from .rl import Trainer, episode_log_csv, evaluate

log = logging.getLogger("pidrl")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def _parse_seeds(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        return list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]
    except ValueError:
        raise ConfigError(f"--seeds expects 'a..b', got {text!r}", "<args>") from None


def run_training(cfg: ExperimentConfig, out: Path, per_step_log: bool = False) -> dict:
    """Train one configuration and write its artifacts into ``out``."""
    out.mkdir(parents=True, exist_ok=True)
    env = PidEnv(build_discrete_plant(cfg.plant, cfg.dt), cfg.schedule, cfg.reward, cfg.episode,
                 record=per_step_log)
    trainer = Trainer(cfg.train, env, cfg.K_init)
    art = trainer.run()
    (out / "train_log.csv").write_text(episode_log_csv(art.log))
    save_params(art.K, out / "params.json")
    save_mlp(art.critic, out / "critic.bin")
    if per_step_log:
        rows = ((i, *row) for i, steps in enumerate(art.step_logs) for row in steps)
        _write_rows(out / "steps.csv", ("episode", *STEP_LOG_FIELDS), rows)
    tail = art.log[-50:]
    return {
        "seed": cfg.seed,
        "params": art.K.to_dict(),
        "mean_reward_last50": float(np.mean([e.total_reward for e in tail])) if tail else None,
        "stable": is_stable(cfg.plant, art.K.kp, art.K.ki, cfg.dt),
        "out": str(out),
    }


def _train_one(args):
    cfg, out, per_step = args
    return run_training(cfg, out, per_step)


def cmd_train(ns) -> int:
    cfg = load_config(ns.config)
    if ns.episodes is not None:
        cfg.train = replace(cfg.train, episodes=ns.episodes)
    out = Path(ns.out) if ns.out else cfg.out
    if ns.seeds:
        jobs = []
        for s in _parse_seeds(ns.seeds):
            jobs.append((replace(cfg, seed=s, train=replace(cfg.train, seed=s)), out / f"seed_{s}", ns.per_step_log))
        workers = min(len(jobs), os.cpu_count() or 1)
        if workers > 1:
            with ProcessPoolExecutor(workers) as pool:
                results = list(pool.map(_train_one, jobs))
        else:
            results = [_train_one(j) for j in jobs]
    else:
        if ns.seed is not None:
            cfg = replace(cfg, seed=ns.seed, train=replace(cfg.train, seed=ns.seed))
        results = [run_training(cfg, out, ns.per_step_log)]
    for res in results:
        print(json.dumps(res))
    return EXIT_OK


def cmd_eval(ns) -> int:
    cfg = load_config(ns.config)
    try:
        K = load_params(ns.params, cfg.K_init.trainable)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load parameters: {exc}", str(ns.params)) from None
    out = Path(ns.out) if ns.out else cfg.out
    out.mkdir(parents=True, exist_ok=True)
    schedule = cfg.eval_schedule or cfg.schedule
    lim = ActuatorLimits(cfg.train.u_min, cfg.train.u_max)
    seed = cfg.seed if ns.seed is None else ns.seed
    rhos = [float(v) for v in ns.rho_sweep.split(",")] if ns.rho_sweep else [None]
    for rho in rhos:
        Ki = K if rho is None else replace(K, rho=rho)
        total, steps, kind, rows = evaluate(Ki, cfg.plant, schedule, lim, cfg.reward, cfg.episode,
                                            cfg.dt, seed=seed)[0]
        name = "eval_steps.csv" if rho is None else f"eval_rho_{rho:g}.csv"
        _write_rows(out / name, STEP_LOG_FIELDS, rows)
        cols = list(zip(*rows))
        m = step_metrics(cols[1], cols[2], cols[3], cols[4], band=cfg.episode.track_band)
        print(json.dumps({"params": Ki.to_dict(), "verdict": kind, "steps": steps, "total_reward": total,
                          "overshoot": m.overshoot, "settling_steps": m.settling_steps,
                          "recovery_steps": m.recovery_steps, "csv": str(out / name)}))
    return EXIT_OK


def _boundary(cfg: ExperimentConfig):
    """Sampled-loop boundary at the config's dt unless ``[analysis] continuous = true``."""
    a = cfg.analysis
    n = int(a.get("n_points", 200))
    dt = None if a.get("continuous", False) else cfg.dt
    try:
        if "omega" in a:
            lo, hi = a["omega"]
            return stability_boundary(cfg.plant, np.linspace(float(lo), float(hi), n), dt)
        return boundary_lobe(cfg.plant, n, dt=dt)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[analysis]: {exc}", "<config>") from None


def cmd_boundary(ns) -> int:
    cfg = load_config(ns.config)
    curve = _boundary(cfg)
    rows = list(curve.rows())
    if ns.out:
        _write_rows(Path(ns.out), ("omega", "kp", "ki"), rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("omega", "kp", "ki"))
        w.writerows([[repr(v) for v in r] for r in rows])
    return EXIT_OK


def cmd_classify(ns) -> int:
    cfg = load_config(ns.config)
    a = cfg.analysis
    try:
        kps = np.linspace(*map(float, a.get("kp_grid", (0.0, 2.0))[:2]), int(a.get("kp_grid", (0, 0, 21))[2]))
        kis = np.linspace(*map(float, a.get("ki_grid", (0.0, 1.0))[:2]), int(a.get("ki_grid", (0, 0, 11))[2]))
    except (TypeError, ValueError, IndexError):
        raise ConfigError("[analysis] kp_grid/ki_grid must be [start, stop, count]", str(ns.config)) from None
    rows = [(float(kp), float(ki), int(is_stable(cfg.plant, kp, ki, cfg.dt))) for kp in kps for ki in kis]
    if ns.out:
        _write_rows(Path(ns.out), ("kp", "ki", "stable"), rows)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(("kp", "ki", "stable"))
        w.writerows([[repr(kp), repr(ki), s] for kp, ki, s in rows])
    return EXIT_OK


def cmd_simc(ns) -> int:
    cfg = load_config(ns.config)
    fopdt = half_rule(cfg.plant.sections, cfg.plant.dead_time)
    tau_c = ns.tau_c if ns.tau_c is not None else cfg.raw.get("actor", {}).get("tau_c", fopdt.theta)
    try:
        K = simc_pi(fopdt, float(tau_c))
    except ValueError as exc:
        raise ConfigError(str(exc), str(ns.config)) from None
    print(json.dumps({"fopdt": {"k": fopdt.k, "tau": fopdt.tau, "theta": fopdt.theta},
                      "tau_c": float(tau_c), "params": K.to_dict()}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pidrl", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run DDPG training and write artifacts")
    t.add_argument("--config", required=True)
    t.add_argument("--out")
    t.add_argument("--seed", type=int)
    t.add_argument("--seeds", help="seed sweep 'a..b', one subdirectory per seed")
    t.add_argument("--episodes", type=int)
    t.add_argument("--per-step-log", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="noise-free roll-out with fixed parameters")
    e.add_argument("--config", required=True)
    e.add_argument("--params", required=True)
    e.add_argument("--out")
    e.add_argument("--seed", type=int)
    e.add_argument("--rho-sweep", help="comma-separated rho values; one CSV per value")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("boundary", help="kp-ki stability boundary as CSV")
    b.add_argument("--config", required=True)
    b.add_argument("--out")
    b.set_defaults(func=cmd_boundary)

    c = sub.add_parser("classify", help="stability verdicts over a kp-ki grid")
    c.add_argument("--config", required=True)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    s = sub.add_parser("simc", help="half-rule + SIMC PI gains as JSON")
    s.add_argument("--config", required=True)
    s.add_argument("--tau-c", type=float)
    s.set_defaults(func=cmd_simc)
    return p


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if ns.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (FloatingPointError, OverflowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
