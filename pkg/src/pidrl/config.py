"""Experiment configuration files.

Configs are TOML documents (bundled ones use a ``.cfg`` suffix). Top-level
keys: ``seed``, ``out``; tables ``plant``, ``reward``, ``episode``,
``schedule`` (array of tables), ``actor``, ``train`` and optionally
``eval`` and ``analysis``.
"""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .actor import ControllerParams, half_rule, simc_pi
from .env import EpisodeConfig, RewardConfig, Segment, SetpointSchedule
from .plant import PlantModel
from .rl import NoiseSchedule, TrainConfig

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "bundled_config", "BUNDLED"]

BUNDLED = ("example1_v1", "example1_v1_5", "example1_v2", "example2_v2")
_PARAM_NAMES = ("kp", "ki", "kd", "rho")


class ConfigError(ValueError):
    """Invalid experiment config; ``line`` is 1-based when known."""

    def __init__(self, message: str, source: str = "<config>", line: int | None = None):
        self.source = source
        self.line = line
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")


@dataclass
class ExperimentConfig:
    seed: int
    plant: PlantModel
    dt: float
    reward: RewardConfig
    episode: EpisodeConfig
    schedule: SetpointSchedule
    K_init: ControllerParams
    train: TrainConfig
    out: Path = Path("runs")
    eval_schedule: SetpointSchedule | None = None
    analysis: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def _locate(text: str, table: str | None, key: str | None) -> int | None:
    """Best-effort line number of ``key`` inside ``[table]``."""
    lines = text.splitlines()
    start = 0
    if table:
        hdr = re.compile(r"^\s*\[{1,2}\s*" + re.escape(table) + r"\s*\]{1,2}")
        hits = [i for i, ln in enumerate(lines) if hdr.match(ln)]
        if not hits:
            return None
        start = hits[0]
        if key is None:
            return start + 1
    if key is not None:
        kre = re.compile(r"^\s*" + re.escape(key) + r"\s*=")
        for i in range(start, len(lines)):
            if i > start and table is None and lines[i].lstrip().startswith("["):
                break
            if kre.match(lines[i]):
                return i + 1
    return start + 1 if table else None


class _Reader:
    def __init__(self, data: dict, text: str, source: str):
        self.data, self.text, self.source = data, text, source

    def fail(self, msg, table=None, key=None):
        raise ConfigError(msg, self.source, _locate(self.text, table, key))

    def table(self, name, required=True) -> dict:
        t = self.data.get(name)
        if t is None:
            if required:
                self.fail(f"missing [{name}] table")
            return {}
        if not isinstance(t, dict):
            self.fail(f"'{name}' must be a table", None, name)
        return t

    def num(self, t, table, key, default=None, kind=float):
        if key not in t:
            if default is None:
                self.fail(f"missing key '{key}' in [{table}]", table)
            return default
        v = t[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self.fail(f"'{key}' must be a number, got {v!r}", table, key)
        if kind is int and not float(v).is_integer():
            self.fail(f"'{key}' must be an integer, got {v!r}", table, key)
        return kind(v)


def _plant(rd: _Reader):
    t = rd.table("plant")
    secs = t.get("sections")
    if not isinstance(secs, list) or not secs:
        rd.fail("[plant] needs a non-empty 'sections' list of {gain, tau}", "plant", "sections")
    pairs = []
    for s in secs:
        if not isinstance(s, dict) or "gain" not in s or "tau" not in s:
            rd.fail("each plant section needs 'gain' and 'tau'", "plant", "sections")
        pairs.append((float(s["gain"]), float(s["tau"])))
    try:
        model = PlantModel(tuple(pairs), rd.num(t, "plant", "dead_time", 0.0), rd.num(t, "plant", "noise_std", 0.0))
    except ValueError as exc:
        rd.fail(str(exc), "plant", "sections")
    dt = rd.num(t, "plant", "dt", 0.1)
    if not dt > 0:
        rd.fail("dt must be > 0", "plant", "dt")
    return model, dt


def _schedule(rd: _Reader, items, table: str) -> SetpointSchedule:
    if not isinstance(items, list) or not items:
        rd.fail(f"'{table}' must be a non-empty array of tables", table)
    segs = []
    for item in items:
        start = item.get("start", 0)
        if isinstance(start, list):
            if len(start) != 2:
                rd.fail("schedule 'start' ranges are [lo, hi]", table, "start")
            start = (int(start[0]), int(start[1]))
        level = item.get("level", 1.0)
        if isinstance(level, list):
            level = tuple(float(v) for v in level)
        try:
            segs.append(Segment(start, level, float(item.get("noise_std", 0.0)),
                                float(item.get("rare_probability", 0.0)),
                                None if item.get("rare_level") is None else float(item["rare_level"])))
        except (ValueError, TypeError) as exc:
            rd.fail(str(exc), table)
    try:
        return SetpointSchedule(tuple(segs))
    except ValueError as exc:
        rd.fail(str(exc), table)


def _actor(rd: _Reader, model: PlantModel) -> ControllerParams:
    t = rd.table("actor")
    names = t.get("trainable", ["kp", "ki", "rho"])
    bad = [n for n in names if n not in _PARAM_NAMES]
    if bad:
        rd.fail(f"unknown trainable parameter(s) {bad}; choose from {list(_PARAM_NAMES)}", "actor", "trainable")
    mask = tuple(n in names for n in _PARAM_NAMES)
    init = t.get("init", "gains")
    try:
        if init == "simc":
            fopdt = half_rule(model.sections, model.dead_time)
            tau_c = rd.num(t, "actor", "tau_c", fopdt.theta)
            K = simc_pi(fopdt, tau_c, mask)
            K.rho = rd.num(t, "actor", "rho", 0.0)
        elif init == "gains":
            K = ControllerParams(*(rd.num(t, "actor", n, 0.0) for n in _PARAM_NAMES), mask)
        else:
            rd.fail(f"actor init must be 'gains' or 'simc', got {init!r}", "actor", "init")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        rd.fail(str(exc), "actor", "tau_c" if init == "simc" else None)
    return K


def _train(rd: _Reader, seed: int) -> TrainConfig:
    t = dict(rd.table("train"))
    noise = t.pop("noise", {})
    known = set(TrainConfig.__dataclass_fields__) - {"noise", "seed"}
    unknown = sorted(set(t) - known)
    if unknown:
        rd.fail(f"unknown [train] key(s) {unknown}", "train", unknown[0])
    if "hidden" in t:
        t["hidden"] = tuple(t["hidden"])
    try:
        ns = NoiseSchedule(noise.get("sigma0"), noise.get("sigma_final"))
        return TrainConfig(noise=ns, seed=seed, **t)
    except (ValueError, TypeError) as exc:
        rd.fail(str(exc), "train")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"syntax error: {exc}", source, int(m.group(1)) if m else None) from None
    rd = _Reader(data, text, source)

    if "seed" not in data:
        rd.fail("missing top-level 'seed' (runs must be reproducible)")
    seed = rd.num(data, None, "seed", kind=int)

    model, dt = _plant(rd)
    r = rd.table("reward", required=False)
    e = rd.table("episode", required=False)
    try:
        reward = RewardConfig(rd.num(r, "reward", "p", 1, int), rd.num(r, "reward", "lambda", 0.0))
    except ValueError as exc:
        rd.fail(str(exc), "reward")
    try:
        episode = EpisodeConfig(rd.num(e, "episode", "max_steps", 200, int),
                                rd.num(e, "episode", "track_band", 0.1),
                                rd.num(e, "episode", "track_count", 10, int))
    except ValueError as exc:
        rd.fail(str(exc), "episode")
    if "schedule" not in data:
        rd.fail("missing [[schedule]] set-point profile")
    schedule = _schedule(rd, data["schedule"], "schedule")
    ev = rd.table("eval", required=False)
    eval_schedule = _schedule(rd, ev["schedule"], "eval.schedule") if "schedule" in ev else None

    return ExperimentConfig(
        seed=seed,
        plant=model,
        dt=dt,
        reward=reward,
        episode=episode,
        schedule=schedule,
        K_init=_actor(rd, model),
        train=_train(rd, seed),
        out=Path(data.get("out", "runs")),
        eval_schedule=eval_schedule,
        analysis=rd.table("analysis", required=False),
        raw=data,
    )


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    return parse_config(text, str(path))


def bundled_config(name: str) -> Path:
    """Path of a shipped experiment config, e.g. ``bundled_config("example1_v2")``."""
    name = name.removesuffix(".cfg")
    if name not in BUNDLED:
        raise KeyError(f"no bundled config {name!r}; available: {', '.join(BUNDLED)}")
    return Path(str(resources.files("pidrl") / "configs" / f"{name}.cfg"))
