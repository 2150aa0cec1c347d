"""Independent reference computations used by the tests.

Nothing here imports the code under test except plain data types.
"""

import numpy as np
from scipy.signal import lfilter


def euler_step_response(sections, dead_time, t_end, h, sample_every, u=1.0):
    """Forward-Euler integration of a delayed step through a lag cascade.

    Returns the last-section state at times ``k * sample_every * h``,
    ``k = 0..t_end/(sample_every*h)``.
    """
    n = int(round(t_end / h))
    x = np.zeros(n + 1)
    x[int(round(dead_time / h)):] = u
    for k, tau in sections:
        # x_{j+1} = (1 - h/tau) x_j + (h k / tau) in_j
        x = lfilter([0.0, h * k / tau], [1.0, -(1.0 - h / tau)], x)
    return x[::sample_every]


def central_diff(f, x, h):
    """Central finite-difference gradient of scalar ``f`` at flat array ``x``."""
    x = np.array(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def mlp_reference(weights, biases, x):
    """Per-sample loop MLP: ReLU on hidden layers, identity output."""
    h = list(map(float, x))
    for li, (W, b) in enumerate(zip(weights, biases)):
        out = []
        for j in range(W.shape[1]):
            z = float(b[j]) + sum(h[i] * float(W[i, j]) for i in range(W.shape[0]))
            out.append(z if li == len(weights) - 1 else max(z, 0.0))
        h = out
    return h[0]
