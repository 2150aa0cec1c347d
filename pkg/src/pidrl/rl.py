"""DDPG training loop where the actor is the PID law and the critic an MLP."""

from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .actor import ActuatorLimits, ControllerParams, actor_grad
from .critic import Mlp, grad_wrt_action, make_optimizer, mlp_init, q_backward, q_values, soft_update
from .env import RUNNING, TIMEOUT, TRACKED, EpisodeConfig, FeatureState, PidEnv, RewardConfig, SetpointSchedule
from .plant import PlantModel, build_discrete_plant

__all__ = [
    "Experience",
    "ReplayMemory",
    "NoiseSchedule",
    "TrainConfig",
    "EpisodeLog",
    "TrainingArtifacts",
    "Trainer",
    "td_targets",
    "actor_update",
    "train",
    "evaluate",
    "episode_log_csv",
    "EPISODE_LOG_FIELDS",
    "VARIANT_PERIOD",
]

EPISODE_LOG_FIELDS = ("episode", "total_reward", "steps", "kp", "ki", "kd", "rho", "sigma")
# actor update period in steps; None means once at episode end
VARIANT_PERIOD = {"V1": 1, "V1_5": 10, "V2": None}
_KIND_CODE = {RUNNING: 0, TRACKED: 1, TIMEOUT: 2}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


@dataclass(frozen=True)
class Experience:
    s: FeatureState
    u: float
    s_next: FeatureState
    r: float
    done_kind: str = RUNNING
    # number of environment steps folded into r (n-step returns)
    horizon: int = 1


class ReplayMemory:
    """Fixed-capacity ring buffer of transitions, stored column-wise."""

    def __init__(self, capacity: int = 100_000):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = int(capacity)
        self.s = np.zeros((self.capacity, 4))
        self.u = np.zeros(self.capacity)
        self.s_next = np.zeros((self.capacity, 4))
        self.r = np.zeros(self.capacity)
        self.kind = np.zeros(self.capacity, dtype=np.int8)
        self.horizon = np.ones(self.capacity, dtype=np.int32)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, exp: Experience) -> None:
        i = self._next
        self.s[i] = exp.s
        self.u[i] = exp.u
        self.s_next[i] = exp.s_next
        self.r[i] = exp.r
        self.kind[i] = _KIND_CODE[exp.done_kind]
        self.horizon[i] = exp.horizon
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def __getitem__(self, i: int) -> Experience:
        """Item ``i`` counted from the oldest stored transition."""
        if not -self._size <= i < self._size:
            raise IndexError(i)
        i %= self._size
        j = (self._next - self._size + i) % self.capacity
        return Experience(FeatureState(*self.s[j]), float(self.u[j]), FeatureState(*self.s_next[j]),
                          float(self.r[j]), _KIND_NAME[int(self.kind[j])], int(self.horizon[j]))

    def sample_indices(self, batch: int, rng: np.random.Generator) -> np.ndarray:
        if self._size == 0:
            raise ValueError("cannot sample from an empty replay memory")
        return rng.integers(0, self._size, size=batch)

    def sample(self, batch: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Uniform sample with replacement, returned as column arrays."""
        idx = self.sample_indices(batch, rng)
        return {"s": self.s[idx], "u": self.u[idx], "s_next": self.s_next[idx],
                "r": self.r[idx], "kind": self.kind[idx], "horizon": self.horizon[idx]}


@dataclass(frozen=True)
class NoiseSchedule:
    """Exploration std decaying linearly over the run.

    ``None`` endpoints default to 10% and 1% of the actuator span.
    """

    sigma0: float | None = None
    sigma_final: float | None = None

    def sigma(self, episode: int, episodes: int, lim: ActuatorLimits) -> float:
        s0 = 0.1 * lim.span if self.sigma0 is None else self.sigma0
        s1 = 0.01 * lim.span if self.sigma_final is None else self.sigma_final
        if episodes <= 1:
            return s0
        return s0 + (s1 - s0) * episode / (episodes - 1)


@dataclass(frozen=True)
class TrainConfig:
    variant: str = "V2"
    episodes: int = 1000
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    gamma: float = 0.99
    batch: int = 256
    memory: int = 100_000
    hidden: tuple[int, ...] = (64, 64)
    actor_optimizer: str = "adam"
    critic_optimizer: str = "adam"
    actor_clip: float | None = None
    critic_clip: float | None = None
    momentum: float = 0.75
    n_step: int = 1
    use_target: bool = True
    target_tau: float = 1e-3
    noise: NoiseSchedule = field(default_factory=NoiseSchedule)
    u_min: float = -10.0
    u_max: float = 10.0
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANT_PERIOD:
            raise ValueError(f"variant must be one of {sorted(VARIANT_PERIOD)}, got {self.variant!r}")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if not 0.0 <= self.target_tau <= 1.0:
            raise ValueError("target_tau must lie in [0, 1]")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        ActuatorLimits(self.u_min, self.u_max)

    @property
    def limits(self) -> ActuatorLimits:
        return ActuatorLimits(self.u_min, self.u_max)


@dataclass
class EpisodeLog:
    episode: int
    total_reward: float
    steps: int
    kp: float
    ki: float
    kd: float
    rho: float
    sigma: float
    done_kind: str = TIMEOUT
    actor_updates: int = 0
    max_memory: int = 0
    saturated_steps: int = 0

    def row(self) -> list[str]:
        return [str(self.episode), repr(self.total_reward), str(self.steps),
                repr(self.kp), repr(self.ki), repr(self.kd), repr(self.rho), repr(self.sigma)]


@dataclass
class TrainingArtifacts:
    K: ControllerParams
    critic: Mlp
    log: list[EpisodeLog]
    step_logs: list[list[tuple]] = field(default_factory=list)


def episode_log_csv(log: list[EpisodeLog]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(EPISODE_LOG_FIELDS)
    for e in log:
        w.writerow(e.row())
    return buf.getvalue()


def td_targets(batch: dict, target_critic: Mlp, target_K: ControllerParams, gamma: float,
               lim: ActuatorLimits) -> np.ndarray:
    """``r + gamma^h Q'(s', mu'(s'))``, with no bootstrap on tracked transitions.

    ``h`` is the per-sample horizon (1 unless n-step returns are stored).
    """
    s2 = batch["s_next"]
    u2 = np.clip(s2 @ target_K.as_array(), lim.u_min, lim.u_max)
    q2 = q_values(target_critic, s2, u2)
    cont = (batch["kind"] != _KIND_CODE[TRACKED]).astype(float)
    disc = gamma ** batch["horizon"] if "horizon" in batch else gamma
    return batch["r"] + disc * cont * q2


def policy_gradient(K: ControllerParams, S: np.ndarray, critic: Mlp, lim: ActuatorLimits) -> np.ndarray:
    """Batch estimate of dJ/dK: mean of dQ/du * dmu/dK."""
    u = np.clip(S @ K.as_array(), lim.u_min, lim.u_max)
    dq = grad_wrt_action(critic, S, u)
    g = np.mean(dq[:, None] * actor_grad(K, S, lim), axis=0)
    return g


def actor_update(K: ControllerParams, S: np.ndarray, critic: Mlp, lim: ActuatorLimits, opt) -> ControllerParams:
    """One gradient-ascent step on the PID weights; returns new params."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[0] == 0:
        raise ValueError("actor_update needs a non-empty batch")
    g = policy_gradient(K, S, critic, lim) * K.mask
    if not np.all(np.isfinite(g)):
        raise FloatingPointError(f"non-finite policy gradient {g} at K={K.to_dict()}")
    w = K.as_array()
    opt.step([w], [-g])
    w[3] = max(w[3], 0.0)
    if not np.all(np.isfinite(w)):
        raise FloatingPointError(f"actor update produced non-finite gains {w}")
    return ControllerParams.from_array(w, K.trainable)


def _blend(target: ControllerParams, online: ControllerParams, tau: float) -> ControllerParams:
    w = tau * online.as_array() + (1.0 - tau) * target.as_array()
    return ControllerParams.from_array(w, target.trainable)


class Trainer:
    """Mutable training state: networks, optimizers, replay memory and RNG streams."""

    def __init__(self, cfg: TrainConfig, env: PidEnv, K_init: ControllerParams):
        if K_init.is_zero():
            raise ValueError("K_init is the zero vector: the policy output and its gradient vanish, "
                             "so the gains would never change. Start from nonzero gains.")
        self.cfg = cfg
        self.env = env
        self.lim = cfg.limits
        init_ss, env_ss, noise_ss, sample_ss = np.random.SeedSequence(cfg.seed).spawn(4)
        self.env_rng = np.random.default_rng(env_ss)
        self.noise_rng = np.random.default_rng(noise_ss)
        self.sample_rng = np.random.default_rng(sample_ss)
        self.K = replace(K_init)
        self.critic = mlp_init(cfg.hidden, np.random.default_rng(init_ss))
        self.target_critic = self.critic.copy()
        self.target_K = replace(K_init)
        self.memory = ReplayMemory(cfg.memory)
        self.critic_opt = make_optimizer(cfg.critic_optimizer, cfg.critic_lr, cfg.critic_clip, cfg.momentum)
        self.actor_opt = make_optimizer(cfg.actor_optimizer, cfg.actor_lr, cfg.actor_clip, cfg.momentum)
        self.log: list[EpisodeLog] = []
        self.step_logs: list[list[tuple]] = []
        self._pending: deque = deque()

    def _store(self, s, u, s_next, r, done):
        """Queue a transition; push n-step aggregates once they are complete."""
        pend = self._pending
        pend.append((s, u, s_next, r, done))
        n, gamma = self.cfg.n_step, self.cfg.gamma
        while pend and (len(pend) >= n or done != RUNNING):
            ret = 0.0
            for k, (*_, rk, _) in enumerate(pend):
                if k == n:
                    break
                ret += gamma**k * rk
            m = min(n, len(pend))
            s0, u0 = pend[0][0], pend[0][1]
            _, _, s_m, _, kind = pend[m - 1]
            self.memory.push(Experience(s0, u0, s_m, ret, kind, m))
            pend.popleft()

    def _critic_step(self):
        cfg = self.cfg
        batch = self.memory.sample(cfg.batch, self.sample_rng)
        if cfg.use_target:
            y = td_targets(batch, self.target_critic, self.target_K, cfg.gamma, self.lim)
        else:
            y = td_targets(batch, self.critic, self.K, cfg.gamma, self.lim)
        grad, loss = q_backward(self.critic, batch["s"], batch["u"], y)
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite critic loss with K={self.K.to_dict()}")
        self.critic_opt.step([self.critic.theta], [grad.theta])
        if cfg.use_target:
            soft_update(self.target_critic, self.critic, cfg.target_tau)
            self.target_K = _blend(self.target_K, self.K, cfg.target_tau)

    def _actor_step(self):
        idx = self.memory.sample_indices(self.cfg.batch, self.sample_rng)
        self.K = actor_update(self.K, self.memory.s[idx], self.critic, self.lim, self.actor_opt)

    def run_episode(self, episode: int) -> EpisodeLog:
        cfg, env, lim = self.cfg, self.env, self.lim
        sigma = cfg.noise.sigma(episode, cfg.episodes, lim)
        period = VARIANT_PERIOD[cfg.variant]
        s = env.reset(self.env_rng)
        total, steps, n_actor, n_sat = 0.0, 0, 0, 0
        done = RUNNING
        while done == RUNNING:
            u_raw = float(np.dot(self.K.as_array(), s))
            if sigma > 0:
                u_raw += sigma * self.noise_rng.standard_normal()
            if not math.isfinite(u_raw):
                raise FloatingPointError(f"non-finite control at step {steps} with K={self.K.to_dict()}")
            u_sat = min(max(u_raw, lim.u_min), lim.u_max)
            n_sat += u_sat != u_raw
            s_next, r, done = env.step(u_sat, u_raw)
            self._store(s, u_sat, s_next, r, done)
            total += r
            steps += 1
            warm = len(self.memory) >= cfg.batch
            if warm:
                self._critic_step()
                if period is not None and steps % period == 0:
                    self._actor_step()
                    n_actor += 1
            s = s_next
        if period is None and len(self.memory) >= cfg.batch:
            self._actor_step()
            n_actor += 1
        if env.record:
            self.step_logs.append(list(env.log))
        K = self.K
        entry = EpisodeLog(episode, total, steps, K.kp, K.ki, K.kd, K.rho, sigma,
                           done, n_actor, len(self.memory), n_sat)
        self.log.append(entry)
        return entry

    def run(self, episodes: int | None = None, callback=None) -> TrainingArtifacts:
        n = self.cfg.episodes if episodes is None else episodes
        for e in range(n):
            entry = self.run_episode(e)
            if callback is not None:
                callback(entry)
        return TrainingArtifacts(self.K, self.critic, self.log, self.step_logs)


def train(cfg: TrainConfig, plant: PlantModel, schedule: SetpointSchedule, K_init: ControllerParams,
          reward: RewardConfig | None = None, episode: EpisodeConfig | None = None,
          dt: float = 0.1, record_steps: bool = False, callback=None) -> TrainingArtifacts:
    """Run ``cfg.episodes`` DDPG episodes from ``K_init``; deterministic given ``cfg.seed``."""
    env = PidEnv(build_discrete_plant(plant, dt), schedule, reward or RewardConfig(),
                 episode or EpisodeConfig(), record=record_steps)
    return Trainer(cfg, env, K_init).run(callback=callback)


def evaluate(K: ControllerParams, plant: PlantModel, schedule: SetpointSchedule, lim: ActuatorLimits,
             reward: RewardConfig | None = None, episode: EpisodeConfig | None = None,
             dt: float = 0.1, seed: int = 0, n_episodes: int = 1, record: bool = True):
    """Noise-free roll-outs with fixed gains.

    Returns a list of ``(total_reward, steps, done_kind, step_log)`` tuples.
    Plant measurement noise is disabled.
    """
    quiet = replace(plant, output_noise_std=0.0)
    env = PidEnv(build_discrete_plant(quiet, dt), schedule, reward or RewardConfig(),
                 episode or EpisodeConfig(), record=record)
    rng = np.random.default_rng(seed)
    w = K.as_array()
    out = []
    for _ in range(n_episodes):
        s = env.reset(rng)
        total, steps, done = 0.0, 0, RUNNING
        while done == RUNNING:
            u_raw = float(np.dot(w, s))
            if not math.isfinite(u_raw):
                raise FloatingPointError(f"non-finite control with K={K.to_dict()}")
            s, r, done = env.step(min(max(u_raw, lim.u_min), lim.u_max), u_raw)
            total += r
            steps += 1
        out.append((total, steps, done, list(env.log)))
    return out
