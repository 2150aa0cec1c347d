"""Set-point tracking environment around a sampled plant.

The observation is the controller's own feature vector ``(e_y, I_y, D, I_u)``,
so the PID law is a linear policy on the state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .plant import DiscretePlant

__all__ = [
    "FeatureState",
    "RewardConfig",
    "EpisodeConfig",
    "Segment",
    "SetpointSchedule",
    "PidEnv",
    "update_features",
    "compute_reward",
    "RUNNING",
    "TRACKED",
    "TIMEOUT",
    "STEP_LOG_FIELDS",
]

RUNNING, TRACKED, TIMEOUT = "running", "tracked", "timeout"

STEP_LOG_FIELDS = ("n", "setpoint", "y", "u_raw", "u_sat", "e_y", "I_y", "D", "I_u", "r")


class FeatureState(NamedTuple):
    e_y: float = 0.0
    I_y: float = 0.0
    D: float = 0.0
    I_u: float = 0.0


@dataclass(frozen=True)
class RewardConfig:
    p: int = 1
    lam: float = 0.0

    def __post_init__(self):
        if self.p not in (1, 2):
            raise ValueError(f"reward exponent p must be 1 or 2, got {self.p}")
        if not self.lam >= 0:
            raise ValueError(f"reward lambda must be >= 0, got {self.lam}")


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 200
    track_band: float = 0.1
    track_count: int = 10

    def __post_init__(self):
        if not (self.max_steps >= self.track_count >= 1):
            raise ValueError("need max_steps >= track_count >= 1")
        if not self.track_band > 0:
            raise ValueError("track_band must be > 0")


@dataclass(frozen=True)
class Segment:
    """One constant piece of a set-point profile.

    ``start`` is a step index or an inclusive ``(lo, hi)`` range drawn
    uniformly per episode; ``level`` is a value or a tuple of equally likely
    values. With probability ``rare_probability`` the level is replaced by
    ``rare_level`` (no noise added).
    """

    start: int | tuple[int, int] = 0
    level: float | tuple[float, ...] = 1.0
    noise_std: float = 0.0
    rare_probability: float = 0.0
    rare_level: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.rare_probability <= 1.0:
            raise ValueError("rare_probability must lie in [0, 1]")
        if self.rare_probability > 0 and self.rare_level is None:
            raise ValueError("rare_probability given without rare_level")
        if self.noise_std < 0:
            raise ValueError("level noise_std must be >= 0")

    @property
    def start_range(self) -> tuple[int, int]:
        if isinstance(self.start, (tuple, list)):
            return int(self.start[0]), int(self.start[1])
        return int(self.start), int(self.start)


@dataclass(frozen=True)
class SetpointSchedule:
    segments: tuple[Segment, ...] = (Segment(),)

    def __post_init__(self):
        segs = tuple(self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise ValueError("schedule needs at least one segment")
        if segs[0].start_range != (0, 0):
            raise ValueError("first schedule segment must start at step 0")
        prev_hi = 0
        for seg in segs[1:]:
            lo, hi = seg.start_range
            if lo > hi or lo <= prev_hi:
                raise ValueError("segment start steps must be strictly increasing")
            prev_hi = hi

    def sample(self, rng: np.random.Generator, n_steps: int) -> tuple[np.ndarray, int]:
        """Draw one profile of ``n_steps + 1`` values and the last switch index."""
        out = np.empty(n_steps + 1)
        starts = []
        levels = []
        for seg in self.segments:
            lo, hi = seg.start_range
            starts.append(int(rng.integers(lo, hi + 1)) if hi > lo else lo)
            if isinstance(seg.level, (tuple, list)):
                level = float(seg.level[int(rng.integers(len(seg.level)))])
            else:
                level = float(seg.level)
            if seg.noise_std > 0:
                level += seg.noise_std * rng.standard_normal()
            if seg.rare_probability > 0 and rng.random() < seg.rare_probability:
                level = float(seg.rare_level)
            levels.append(level)
        starts.append(n_steps + 1)
        for (a, b), level in zip(zip(starts, starts[1:]), levels):
            out[a:b] = level
        return out, min(starts[-2], n_steps)


def update_features(prev: FeatureState, e_y_new: float, e_u_new: float, dt: float) -> FeatureState:
    """Advance ``(e_y, I_y, D, I_u)`` by one sample.

    ``e_u_new`` is ``sat(u) - u`` of the control applied over the step just
    finished, so ``I_u`` at step n sums deviations up to step n-1.
    """
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not (math.isfinite(e_y_new) and math.isfinite(e_u_new)):
        raise FloatingPointError(f"non-finite feature update (e_y={e_y_new}, e_u={e_u_new})")
    return FeatureState(
        e_y_new,
        prev.I_y + e_y_new * dt,
        (e_y_new - prev.e_y) / dt,
        prev.I_u + e_u_new * dt,
    )


def compute_reward(e_y: float, u: float, cfg: RewardConfig) -> float:
    return -(abs(e_y) ** cfg.p + cfg.lam * abs(u))


@dataclass
class PidEnv:
    """Episodic set-point tracking task.

    An episode ends as ``tracked`` once ``|e_y| < track_band`` holds for
    ``track_count`` consecutive steps after the final set-point switch, or as
    ``timeout`` after ``max_steps`` steps.
    """

    plant: DiscretePlant
    schedule: SetpointSchedule = field(default_factory=SetpointSchedule)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    record: bool = False

    def __post_init__(self):
        self.state = FeatureState()
        self.n = 0
        self.done = TIMEOUT
        self.setpoints = np.zeros(self.episode.max_steps + 1)
        self.last_switch = 0
        self.y = 0.0
        self._in_band = 0
        self.log: list[tuple] = []

    @property
    def dt(self) -> float:
        return self.plant.dt

    def reset(self, rng: np.random.Generator) -> FeatureState:
        self.plant.reset()
        self.plant.rng = rng
        self.setpoints, self.last_switch = self.schedule.sample(rng, self.episode.max_steps)
        self.n = 0
        self.y = self.plant.output
        self._in_band = 0
        self.done = RUNNING
        self.log = []
        self.state = FeatureState(float(self.setpoints[0]) - self.y, 0.0, 0.0, 0.0)
        return self.state

    def step(self, u_sat: float, u_raw: float) -> tuple[FeatureState, float, str]:
        if self.done != RUNNING:
            raise RuntimeError("step() called on a finished episode; call reset() first")
        s = self.state
        y = self.plant.step(u_sat)
        self.n += 1
        e_y = float(self.setpoints[self.n]) - y
        s_next = update_features(s, e_y, u_sat - u_raw, self.dt)
        r = compute_reward(e_y, u_sat, self.reward)
        if self.record:
            self.log.append((self.n - 1, float(self.setpoints[self.n - 1]), self.y, u_raw, u_sat, *s, r))

        if self.n >= self.last_switch and abs(e_y) < self.episode.track_band:
            self._in_band += 1
        else:
            self._in_band = 0
        if self._in_band >= self.episode.track_count:
            self.done = TRACKED
        elif self.n >= self.episode.max_steps:
            self.done = TIMEOUT
        self.state, self.y = s_next, y
        return s_next, r, self.done
