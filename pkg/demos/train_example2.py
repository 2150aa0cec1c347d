"""
Learning anti-windup together with the PI gains
===============================================

Third-order plant, input limited to (0, 2), SIMC starting gains and
rho = 0. One episode in ten asks for the unreachable set-point 3, which
saturates the actuator and gives rho a gradient. After 200 episodes (about
half a minute) the learned parameters are scored against SIMC on the same
20 noise-free set-point profiles.
"""

import numpy as np

from pidrl import bundled_config, evaluate, load_config, train

cfg = load_config(bundled_config("example2_v2"))
art = train(cfg.train, cfg.plant, cfg.schedule, cfg.K_init, cfg.reward, cfg.episode, cfg.dt)

for e in art.log[::40]:
    print(f"episode {e.episode:3d}: kp={e.kp:.3f} ki={e.ki:.3f} rho={e.rho:.3f} saturated steps {e.saturated_steps}")


def score(K):
    res = evaluate(K, cfg.plant, cfg.schedule, cfg.train.limits, cfg.reward, cfg.episode, cfg.dt,
                   seed=12345, n_episodes=20, record=False)
    return np.mean([r[0] for r in res])


print(f"SIMC    {cfg.K_init.to_dict()}: {score(cfg.K_init):.2f}")
print(f"learned {art.K.to_dict()}: {score(art.K):.2f}")
