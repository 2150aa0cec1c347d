"""
Where in the kp-ki plane is the loop stable?
============================================

D-decomposition traces the boundary of the stabilizing PI gains. The
continuous-time curve and the curve of the sampled loop (what actually
runs at dt = 0.1 s) are compared, then a coarse grid is classified by the
spectral radius of the closed-loop matrix and printed as a character map.
"""

import numpy as np

from pidrl import PlantModel, boundary_lobe, is_stable

model = PlantModel(((2.0, 6.0),), dead_time=1.0)
dt = 0.1

cont = boundary_lobe(model, 400)
samp = boundary_lobe(model, 400, dt=dt)
print(f"continuous lobe: kp up to {cont.kp.max():.3f}, ki up to {cont.ki.max():.3f}, ends at w={cont.omega[-1]:.4f}")
print(f"sampled lobe:    kp up to {samp.kp.max():.3f}, ki up to {samp.ki.max():.3f}, ends at w={samp.omega[-1]:.4f}")

# '#' stable, '.' unstable; ki grows upwards
kps = np.linspace(-1, 6, 57)
kis = np.linspace(0.05, 2.5, 20)[::-1]
for ki in kis:
    row = "".join("#" if is_stable(model, kp, ki, dt) else "." for kp in kps)
    print(f"ki={ki:4.2f} {row}")
print(" " * 8 + f"kp from {kps[0]:g} to {kps[-1]:g}")

# the gains training starts from sit well inside
print("(0.2, 0.05) stable:", is_stable(model, 0.2, 0.05, dt))
