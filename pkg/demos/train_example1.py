"""
Learning PI gains for a lag-plus-delay plant
============================================

DDPG with the PI law as actor, starting from the deliberately sluggish
gains (0.2, 0.05). Runs the bundled V2 experiment (one actor update per
episode) for 300 episodes, about half a minute, printing progress every 25
episodes. The learned gains are then compared with the initial ones on
noise-free roll-outs.
"""

import numpy as np

from pidrl import bundled_config, evaluate, is_stable, load_config
from pidrl.env import PidEnv
from pidrl.plant import build_discrete_plant
from pidrl.rl import Trainer

cfg = load_config(bundled_config("example1_v2"))
env = PidEnv(build_discrete_plant(cfg.plant, cfg.dt), cfg.schedule, cfg.reward, cfg.episode)
trainer = Trainer(cfg.train, env, cfg.K_init)


def progress(e):
    if e.episode % 25 == 0 or e.episode == cfg.train.episodes - 1:
        print(f"episode {e.episode:3d}: reward {e.total_reward:8.1f}, {e.steps:3d} steps ({e.done_kind}), "
              f"kp={e.kp:.3f} ki={e.ki:.3f}, noise {e.sigma:.2f}")


art = trainer.run(callback=progress)


def noise_free(K):
    res = evaluate(K, cfg.plant, cfg.schedule, cfg.train.limits, cfg.reward, cfg.episode, cfg.dt,
                   seed=1, n_episodes=40, record=False)
    return np.mean([r[0] for r in res]), np.mean([r[1] for r in res])


for label, K in (("initial", cfg.K_init), ("learned", art.K)):
    reward, steps = noise_free(K)
    print(f"{label}: kp={K.kp:.3f} ki={K.ki:.3f} stable={is_stable(cfg.plant, K.kp, K.ki, cfg.dt)} "
          f"mean reward {reward:.1f}, mean steps {steps:.0f}")
