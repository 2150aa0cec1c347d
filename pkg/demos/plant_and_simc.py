"""
Sampled plants and SIMC starting gains
======================================

Both benchmark plants are discretized with a zero-order hold at 0.1 s.
A half-rule FOPDT reduction followed by SIMC gives PI gains to start
training from, and the sampled-loop eigenvalue check confirms they stabilize.
"""

import numpy as np

from pidrl import PlantModel, build_discrete_plant, half_rule, is_stable, simc_pi

dt = 0.1
plants = {
    "2 e^-s / (6s+1)": PlantModel(((2.0, 6.0),), dead_time=1.0),
    "1 / (s+1)^3": PlantModel(((1.0, 1.0),) * 3),
}

for name, model in plants.items():
    plant = build_discrete_plant(model, dt)
    # unit step, sampled every 0.1 s
    y = np.array([plant.step(1.0) for _ in range(300)])
    t63 = (np.argmax(y >= 0.632 * y[-1]) + 1) * dt
    print(f"{name}: delay line {plant.n_delay} samples, y(30 s) = {y[-1]:.4f}, 63% rise at {t63:.1f} s")

    fopdt = half_rule(model.sections, model.dead_time)
    K = simc_pi(fopdt)  # tau_c defaults to the effective delay
    print(f"  half rule -> k={fopdt.k:g}, tau={fopdt.tau:g}, theta={fopdt.theta:g}")
    print(f"  SIMC PI   -> kp={K.kp:.4f}, ki={K.ki:.4f}, stable={is_stable(model, K.kp, K.ki, dt)}")
