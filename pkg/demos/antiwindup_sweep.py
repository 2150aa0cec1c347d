"""
Anti-windup strength and recovery time
======================================

Fixed SIMC gains on the third-order plant with input limits (0, 2). The
set-point goes 1 -> 3 -> 1; level 3 is unreachable, so the integral winds
up while the actuator sits at its limit. Larger back-calculation gain rho
bleeds that integral off and shortens the saturated stretch after the
set-point returns to 1.
"""

from dataclasses import replace

from pidrl import bundled_config, evaluate, load_config, step_metrics

cfg = load_config(bundled_config("example2_v2"))
print("SIMC gains:", cfg.K_init.to_dict())

for rho in (0.0, 0.1, 0.5, 1.0, 2.0):
    K = replace(cfg.K_init, rho=rho)
    total, steps, verdict, rows = evaluate(K, cfg.plant, cfg.eval_schedule, cfg.train.limits,
                                           cfg.reward, cfg.episode, cfg.dt)[0]
    cols = list(zip(*rows))
    m = step_metrics(cols[1], cols[2], cols[3], cols[4])
    print(f"rho={rho:3.1f}: saturated steps after 3->1 = {m.recovery_steps:3d}, "
          f"{verdict} after {steps} steps, reward {total:.1f}")
