"""Sampled simulation of cascaded first-order-lag plants with dead time.

A plant is ``prod_i k_i / (tau_i s + 1) * exp(-theta s)``. It is discretized
exactly under a zero-order hold on the input, and dead time is realized as an
integer-sample FIFO in front of the lag cascade.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

__all__ = [
    "PlantModel",
    "DiscretePlant",
    "zoh_first_order",
    "build_discrete_plant",
    "plant_step",
    "dc_gain",
    "delay_samples",
]


@dataclass(frozen=True)
class PlantModel:
    """Continuous plant description.

    ``sections`` holds ``(gain, time_constant)`` pairs in cascade order.
    """

    sections: tuple[tuple[float, float], ...]
    dead_time: float = 0.0
    output_noise_std: float = 0.0

    def __post_init__(self):
        secs = tuple((float(k), float(tau)) for k, tau in self.sections)
        object.__setattr__(self, "sections", secs)
        if not secs:
            raise ValueError("plant needs at least one first-order section")
        for k, tau in secs:
            if not (math.isfinite(k) and math.isfinite(tau)) or tau <= 0:
                raise ValueError(f"invalid section (gain={k}, tau={tau}); tau must be > 0")
        if not math.isfinite(self.dead_time) or self.dead_time < 0:
            raise ValueError(f"dead_time must be >= 0, got {self.dead_time}")
        if self.output_noise_std < 0:
            raise ValueError("output_noise_std must be >= 0")

    def frequency_response(self, omega):
        """G(j*omega) evaluated on an array of angular frequencies."""
        s = 1j * np.asarray(omega, dtype=float)
        g = np.exp(-self.dead_time * s)
        for k, tau in self.sections:
            g = g * k / (tau * s + 1.0)
        return g


def zoh_first_order(gain: float, tau: float, dt: float) -> tuple[float, float]:
    """Coefficients of ``x+ = a x + b u`` for ``gain / (tau s + 1)`` under ZOH."""
    if not tau > 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    a = math.exp(-dt / tau)
    return a, gain * (1.0 - a)


def delay_samples(dead_time: float, dt: float) -> int:
    """Dead time in whole samples, rounded half-to-even.

    The ratio is first rounded to 9 decimals so that e.g. 0.35/0.1 counts as
    an exact tie rather than 3.4999999999999996.
    """
    return int(round(round(dead_time / dt, 9)))


def _cascade_state_space(model: PlantModel):
    # x_i' = (-x_i + k_i * x_{i-1}) / tau_i, with x_0 the (delayed) input
    n = len(model.sections)
    A = np.zeros((n, n))
    B = np.zeros(n)
    for i, (k, tau) in enumerate(model.sections):
        A[i, i] = -1.0 / tau
        if i == 0:
            B[0] = k / tau
        else:
            A[i, i - 1] = k / tau
    return A, B


@dataclass
class DiscretePlant:
    """ZOH-exact sampled plant with its simulation state.

    ``Ad``/``Bd`` advance the lag states one sample; ``delay_line`` holds the
    inputs still in transit through the dead time.
    """

    model: PlantModel
    dt: float
    Ad: np.ndarray
    Bd: np.ndarray
    n_delay: int
    x: np.ndarray = field(init=False)
    delay_line: deque = field(init=False)
    rng: np.random.Generator | None = None

    def __post_init__(self):
        self.reset()

    @property
    def coefficients(self) -> list[tuple[float, float]]:
        """Per-section (a_i, b_i) as if each section were sampled alone."""
        return [zoh_first_order(k, tau, self.dt) for k, tau in self.model.sections]

    @property
    def output(self) -> float:
        return float(self.x[-1])

    def reset(self):
        self.x = np.zeros(len(self.model.sections))
        self.delay_line = deque([0.0] * self.n_delay)

    def step(self, u: float) -> float:
        return plant_step(self, u)


def build_discrete_plant(model: PlantModel, dt: float, rng=None) -> DiscretePlant:
    if not dt > 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if not model.sections:
        raise ValueError("plant needs at least one first-order section")
    n = len(model.sections)
    if n == 1:
        a, b = zoh_first_order(*model.sections[0], dt)
        Ad, Bd = np.array([[a]]), np.array([b])
    else:
        # exact ZOH of the whole cascade via the augmented-matrix exponential;
        # sampling each section separately is only exact for a single lag
        A, B = _cascade_state_space(model)
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = A
        M[:n, n] = B
        E = expm(M * dt)
        Ad, Bd = E[:n, :n], E[:n, n]
    return DiscretePlant(model, float(dt), Ad, Bd, delay_samples(model.dead_time, dt), rng=rng)


def plant_step(plant: DiscretePlant, u: float) -> float:
    """Apply ``u`` over one sample interval and return the new measured output."""
    u = float(u)
    if not math.isfinite(u):
        raise FloatingPointError(f"non-finite plant input {u!r}")
    if plant.n_delay:
        plant.delay_line.append(u)
        u = plant.delay_line.popleft()
    plant.x = plant.Ad @ plant.x + plant.Bd * u
    y = float(plant.x[-1])
    std = plant.model.output_noise_std
    if std > 0:
        rng = plant.rng if plant.rng is not None else np.random.default_rng()
        y += std * rng.standard_normal()
    return y


def dc_gain(model: PlantModel) -> float:
    return math.prod(k for k, _ in model.sections)
