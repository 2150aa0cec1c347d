from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import chisquare

from conftest import EX1, EX2
from pidrl.actor import ActuatorLimits, ControllerParams
from pidrl.critic import Sgd, mlp_init
from pidrl.env import TIMEOUT, TRACKED, FeatureState, PidEnv, RewardConfig, Segment, SetpointSchedule
from pidrl.plant import build_discrete_plant
from pidrl.rl import (
    Experience,
    NoiseSchedule,
    ReplayMemory,
    TrainConfig,
    Trainer,
    actor_update,
    episode_log_csv,
    td_targets,
    train,
)

STEP1 = SetpointSchedule((Segment(0, 1.0),))
K0 = ControllerParams(0.2, 0.05)


def exp(i, kind="running"):
    return Experience(FeatureState(i, 0, 0, 0), float(i), FeatureState(i + 1, 0, 0, 0), -float(i), kind)


def test_memory_push_and_evict():
    m = ReplayMemory(3)
    m.push(exp(0))
    assert len(m) == 1
    for i in range(1, 4):
        m.push(exp(i))
    assert len(m) == 3
    assert [m[i].u for i in range(3)] == [1.0, 2.0, 3.0]


def test_memory_sampling(rng):
    m = ReplayMemory(10)
    with pytest.raises(ValueError):
        m.sample(4, rng)
    m.push(exp(7, TRACKED))
    b = m.sample(5, rng)
    assert np.all(b["u"] == 7.0) and np.all(b["kind"] == b["kind"][0])
    for i in range(9):
        m.push(exp(i))
    counts = np.bincount(m.sample_indices(100_000, np.random.default_rng(0)), minlength=10)
    assert chisquare(counts).pvalue > 1e-3
    i1 = m.sample_indices(20, np.random.default_rng(9))
    i2 = m.sample_indices(20, np.random.default_rng(9))
    np.testing.assert_array_equal(i1, i2)


def _batch(kinds):
    m = ReplayMemory(10)
    for i, k in enumerate(kinds):
        m.push(exp(i + 1, k))
    idx = np.arange(len(kinds))
    return {"s": m.s[idx], "u": m.u[idx], "s_next": m.s_next[idx], "r": m.r[idx],
            "kind": m.kind[idx], "horizon": m.horizon[idx]}


def test_td_target_cases(rng):
    b = _batch(["running", TIMEOUT, TRACKED])
    net = mlp_init([8], rng)
    lim = ActuatorLimits(-10, 10)
    np.testing.assert_array_equal(td_targets(b, net, K0, 0.0, lim), b["r"])
    np.testing.assert_array_equal(td_targets(b, mlp_init([8], zero=True), K0, 0.99, lim), b["r"])
    y = td_targets(b, net, K0, 0.99, lim)
    assert y[2] == b["r"][2]
    assert y[0] != b["r"][0] and y[1] != b["r"][1]


def test_actor_update_saturated_batch_is_noop(rng):
    K = ControllerParams(1.0, 0.5, 0.0, 0.3)
    S = np.tile([100.0, 10.0, 0.0, 0.0], (16, 1))
    K2 = actor_update(K, S, mlp_init([8, 8], rng), ActuatorLimits(-1, 1), Sgd(lr=0.1))
    assert K2.as_array().tolist() == K.as_array().tolist()


def test_actor_update_zero_lr_is_noop(rng):
    S = rng.normal(size=(16, 4)) * 0.1
    K2 = actor_update(K0, S, mlp_init([8, 8], rng), ActuatorLimits(-10, 10), Sgd(lr=0.0))
    assert K2.as_array().tolist() == K0.as_array().tolist()


def test_actor_update_ascends_and_keeps_rho_nonnegative():
    # linear critic with Q = u: ascent raises u, i.e. moves K along the features
    net = mlp_init([], zero=True)
    net.weights[0][4, 0] = 1.0
    S = np.tile([1.0, 0.5, 0.0, -1.0], (4, 1))
    K = ControllerParams(0.0, 0.0, 0.0, 0.05, (True, True, False, True))
    K2 = actor_update(K, S, net, ActuatorLimits(-10, 10), Sgd(lr=0.1))
    assert K2.kp == pytest.approx(0.1) and K2.ki == pytest.approx(0.05)
    assert K2.kd == 0.0
    assert K2.rho == 0.0


def test_zero_init_rejected():
    env = PidEnv(build_discrete_plant(EX1, 0.1), STEP1)
    with pytest.raises(ValueError, match="zero"):
        Trainer(TrainConfig(), env, ControllerParams(0, 0))


def test_zero_episodes_returns_init():
    art = train(TrainConfig(episodes=0), EX1, STEP1, K0)
    assert art.K.as_array().tolist() == K0.as_array().tolist() and art.log == []
    assert episode_log_csv(art.log) == "episode,total_reward,steps,kp,ki,kd,rho,sigma\n"


def small_cfg(**kw):
    base = dict(episodes=4, batch=16, hidden=(8, 8), memory=500)
    base.update(kw)
    return TrainConfig(**base)


def test_zero_actor_lr_keeps_gains():
    art = train(small_cfg(actor_lr=0.0, actor_optimizer="sgd"), EX1, STEP1, K0, RewardConfig(1, 0.5))
    assert all((e.kp, e.ki, e.rho) == (0.2, 0.05, 0.0) for e in art.log)


def test_zero_critic_without_noise_keeps_gains():
    cfg = small_cfg(critic_lr=0.0, noise=NoiseSchedule(0.0, 0.0))
    env = PidEnv(build_discrete_plant(EX1, 0.1), STEP1)
    tr = Trainer(cfg, env, K0)
    tr.critic = mlp_init(cfg.hidden, zero=True)
    tr.target_critic = tr.critic.copy()
    art = tr.run()
    assert art.K.as_array().tolist() == K0.as_array().tolist()


@pytest.mark.parametrize("variant,expect", [("V1", lambda n: n), ("V1_5", lambda n: n // 10), ("V2", lambda n: 1)])
def test_actor_update_cadence(variant, expect):
    # batch 1 so updates start on the first step
    art = train(small_cfg(variant=variant, batch=1, episodes=3), EX1, STEP1, K0)
    for e in art.log:
        assert e.actor_updates == expect(e.steps)
        assert e.steps <= 200


def test_reward_accounting_and_memory_bound():
    art = train(small_cfg(memory=150, episodes=3), EX1, STEP1, K0, RewardConfig(1, 0.5), record_steps=True)
    for e, steps in zip(art.log, art.step_logs):
        assert len(steps) == e.steps
        assert e.total_reward == pytest.approx(sum(row[-1] for row in steps), abs=1e-12)
        assert e.max_memory <= 150


def test_rho_frozen_without_saturation():
    cfg = small_cfg(episodes=5, u_min=-100, u_max=100, noise=NoiseSchedule(0.2, 0.02))
    K = ControllerParams(0.5, 1 / 3, 0.0, 0.25)
    art = train(cfg, EX2, STEP1, K)
    assert {e.rho for e in art.log} == {0.25}
    assert art.log[-1].kp != 0.5


def test_n_step_aggregation():
    env = PidEnv(build_discrete_plant(EX1, 0.1), STEP1)
    tr = Trainer(small_cfg(n_step=3, gamma=0.5), env, K0)
    states = [FeatureState(i, 0, 0, 0) for i in range(6)]
    for i in range(4):
        tr._store(states[i], float(i), states[i + 1], -1.0, "running")
    assert len(tr.memory) == 2
    first = tr.memory[0]
    assert first.r == pytest.approx(-1.75) and first.horizon == 3 and first.s_next == states[3]
    tr._store(states[4], 4.0, states[5], -1.0, TRACKED)
    tail = [tr.memory[i] for i in range(len(tr.memory))][2:]
    assert [(t.horizon, t.done_kind) for t in tail] == [(3, TRACKED), (2, TRACKED), (1, TRACKED)]


def test_training_is_deterministic():
    a = train(small_cfg(seed=11), EX1, STEP1, K0)
    b = train(small_cfg(seed=11), EX1, STEP1, K0)
    c = train(small_cfg(seed=12), EX1, STEP1, K0)
    assert episode_log_csv(a.log) == episode_log_csv(b.log)
    assert episode_log_csv(a.log) != episode_log_csv(c.log)


def test_noise_schedule_defaults():
    lim = ActuatorLimits(0, 2)
    ns = NoiseSchedule()
    assert ns.sigma(0, 100, lim) == pytest.approx(0.2)
    assert ns.sigma(99, 100, lim) == pytest.approx(0.02)


def test_config_validation():
    for bad in (dict(gamma=1.5), dict(batch=0), dict(variant="V3"), dict(n_step=0)):
        with pytest.raises(ValueError):
            TrainConfig(**bad)
    assert replace(TrainConfig(), gamma=1.0).gamma == 1.0
