"""Closed-loop analysis for PI control of lag-plus-delay plants.

``stability_boundary`` traces the kp-ki stability boundary by
D-decomposition; ``is_stable`` is an independent check on the sampled loop
via the spectral radius of its state-transition matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .plant import PlantModel, build_discrete_plant, dc_gain

__all__ = [
    "BoundaryCurve",
    "StepMetrics",
    "stability_boundary",
    "boundary_lobe",
    "closed_loop_matrix",
    "spectral_radius",
    "is_stable",
    "step_metrics",
]


@dataclass(frozen=True)
class BoundaryCurve:
    omega: np.ndarray
    kp: np.ndarray
    ki: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.omega) <= 0):
            raise ValueError("omega must be strictly increasing")

    def __len__(self):
        return len(self.omega)

    def rows(self):
        return zip(self.omega.tolist(), self.kp.tolist(), self.ki.tolist())


def _sampled_response(model: PlantModel, omega: np.ndarray, dt: float) -> np.ndarray:
    """ZOH pulse response ``C (zI - Ad)^-1 Bd z^-L`` at ``z = exp(j w dt)``."""
    plant = build_discrete_plant(model, dt)
    z = np.exp(1j * omega * dt)
    n = plant.Ad.shape[0]
    eye = np.eye(n)
    out = np.empty(omega.shape, dtype=complex)
    for i, zi in enumerate(z):
        out[i] = np.linalg.solve(zi * eye - plant.Ad, plant.Bd)[-1] * zi ** (-plant.n_delay)
    return out


def stability_boundary(model: PlantModel, omega, dt: float | None = None) -> BoundaryCurve:
    """Complex-root boundary of the PI loop in the kp-ki plane.

    Continuous time (``dt=None``): solving ``1 + (kp + ki/(j w)) G(j w) = 0``
    for real gains gives ``kp = -Re(1/G)`` and ``ki = w Im(1/G)``.

    Sampled loop (``dt`` given): the controller ``kp + ki dt z/(z-1)`` acting
    on the ZOH plant, evaluated on ``z = exp(j w dt)`` for ``w < pi/dt``.
    This is the loop ``is_stable`` analyzes, so the two agree up to
    numerical precision; the continuous curve differs by O(dt).

    The real-root boundary is the line ``ki = 0`` in both cases.
    """
    if dc_gain(model) == 0:
        raise ValueError("stability boundary undefined for a zero-gain plant")
    omega = np.asarray(omega, dtype=float)
    if np.any(omega <= 0):
        raise ValueError("omega grid must be positive")
    if dt is None:
        inv = 1.0 / model.frequency_response(omega)
        return BoundaryCurve(omega, -inv.real, omega * inv.imag)
    if np.any(omega * dt >= np.pi):
        raise ValueError("sampled boundary needs omega < pi/dt")
    inv = -1.0 / _sampled_response(model, omega, dt)
    # kp + ki dt (1/2 - j cot(w dt / 2) / 2) = -1/Gd
    ki = -2.0 * inv.imag * np.tan(omega * dt / 2) / dt
    return BoundaryCurve(omega, inv.real - ki * dt / 2, ki)


def boundary_lobe(model: PlantModel, n: int = 400, omega_max: float | None = None,
                  dt: float | None = None) -> BoundaryCurve:
    """First lobe of the boundary, from w -> 0 up to the first return to ki = 0.

    Together with the segment of ``ki = 0`` it encloses the stabilizing PI
    gains when the plant has positive gain.
    """
    if omega_max is None:
        # scan for the first sign change of ki on a fine log grid
        top = 1e3 if dt is None else 0.999 * np.pi / dt
        w = np.geomspace(1e-4, top, 4000)
        ki = stability_boundary(model, w, dt).ki
        flips = np.nonzero(np.sign(ki[1:]) != np.sign(ki[:-1]))[0]
        if flips.size == 0:
            raise ValueError("boundary does not return to ki = 0 on the scanned range")
        a, b = w[flips[0]], w[flips[0] + 1]
        f = lambda x: stability_boundary(model, [x], dt).ki[0]  # noqa: E731
        for _ in range(100):
            m = 0.5 * (a + b)
            if np.sign(f(m)) == np.sign(f(a)):
                a = m
            else:
                b = m
        omega_max = 0.5 * (a + b)
    return stability_boundary(model, np.linspace(omega_max / n, omega_max, n), dt)


def closed_loop_matrix(model: PlantModel, kp: float, ki: float, dt: float) -> np.ndarray:
    """State-transition matrix of the sampled PI loop with zero set-point.

    State is (lag states, delay line oldest-first, previous integral). The
    control law is ``u_n = kp e_n + ki I_n`` with ``I_n = I_{n-1} + e_n dt``,
    matching the environment's feature recursion.
    """
    plant = build_discrete_plant(model, dt)
    n, L = plant.Ad.shape[0], plant.n_delay
    N = n + L + 1
    C = np.zeros(n)
    C[-1] = 1.0
    # u_n as a row acting on the current state
    u_row = np.zeros(N)
    u_row[:n] = -(kp + ki * dt) * C
    u_row[-1] = ki

    M = np.zeros((N, N))
    M[:n, :n] = plant.Ad
    if L:
        M[:n, n] = plant.Bd
        for j in range(L - 1):
            M[n + j, n + j + 1] = 1.0
        M[n + L - 1] = u_row
    else:
        M[:n] += np.outer(plant.Bd, u_row)
    M[-1, :n] = -dt * C
    M[-1, -1] = 1.0
    return M


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def is_stable(model: PlantModel, kp: float, ki: float, dt: float) -> bool:
    """True iff the linear sampled PI loop is asymptotically stable."""
    return spectral_radius(closed_loop_matrix(model, kp, ki, dt)) < 1.0 - 1e-9


@dataclass(frozen=True)
class StepMetrics:
    overshoot: float
    settling_steps: int
    recovery_steps: int


def step_metrics(setpoint, y, u_raw, u_sat, band: float = 0.1) -> StepMetrics:
    """Overshoot, settling and windup-recovery figures of a logged response.

    The output is taken to start at rest from 0, so the first set-point level
    counts as a step from 0. ``overshoot`` is the largest excursion past any
    set-point step, relative to that step's size. ``settling_steps`` is the
    first index after which ``|e_y| < band`` for the rest of the log.
    ``recovery_steps`` counts saturated samples (``u_raw != u_sat``) from the
    last set-point change onward.
    """
    r = np.asarray(setpoint, dtype=float)
    y = np.asarray(y, dtype=float)
    u_raw = np.asarray(u_raw, dtype=float)
    u_sat = np.asarray(u_sat, dtype=float)
    if not (len(r) == len(y) == len(u_raw) == len(u_sat)) or len(r) == 0:
        raise ValueError("step_metrics needs equally long, non-empty series")

    prev = np.concatenate([[0.0], r[:-1]])
    changes = np.nonzero(r != prev)[0]
    if changes.size == 0:
        raise ValueError("log contains no set-point step")

    bounds = np.append(changes, len(r))
    overshoot = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        step = r[a] - prev[a]
        past = np.sign(step) * (y[a:b] - r[a:b]) / abs(step)
        overshoot = max(overshoot, float(past.max()))

    outside = np.nonzero(np.abs(r - y) >= band)[0]
    settling = 0 if outside.size == 0 else int(outside[-1]) + 1

    last = changes[-1]
    recovery = int(np.count_nonzero(u_raw[last:] != u_sat[last:]))
    return StepMetrics(overshoot, settling, recovery)
