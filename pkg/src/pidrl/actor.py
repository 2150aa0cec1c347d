"""PID controller with back-calculation anti-windup, viewed as a one-layer network.

The controller weights ``(kp, ki, kd, rho)`` act linearly on the feature
vector ``(e_y, I_y, D, I_u)``; the actuator saturation is the activation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ActuatorLimits",
    "ControllerParams",
    "FopdtModel",
    "saturate",
    "saturate_relu",
    "actor_forward",
    "actor_grad",
    "half_rule",
    "simc_pi",
    "save_params",
    "load_params",
]


@dataclass(frozen=True)
class ActuatorLimits:
    u_min: float
    u_max: float

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ValueError(f"need u_min < u_max, got ({self.u_min}, {self.u_max})")

    @property
    def span(self) -> float:
        return self.u_max - self.u_min


@dataclass
class ControllerParams:
    kp: float
    ki: float
    kd: float = 0.0
    rho: float = 0.0
    trainable: tuple[bool, bool, bool, bool] = field(default=(True, True, False, True))

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.as_array()):
            raise ValueError(f"non-finite controller parameters {self.as_array()}")
        if self.rho < 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        self.trainable = tuple(bool(t) for t in self.trainable)

    def as_array(self) -> np.ndarray:
        return np.array([self.kp, self.ki, self.kd, self.rho], dtype=float)

    @property
    def mask(self) -> np.ndarray:
        return np.array(self.trainable, dtype=float)

    @classmethod
    def from_array(cls, w, trainable=(True, True, False, True)) -> "ControllerParams":
        w = np.asarray(w, dtype=float)
        return cls(float(w[0]), float(w[1]), float(w[2]), float(w[3]), trainable)

    def to_dict(self) -> dict:
        return {"kp": self.kp, "ki": self.ki, "kd": self.kd, "rho": self.rho}

    def is_zero(self) -> bool:
        return not np.any(self.as_array())


@dataclass(frozen=True)
class FopdtModel:
    """First-order-plus-dead-time model ``k exp(-theta s) / (tau s + 1)``."""

    k: float
    tau: float
    theta: float

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be > 0, got {self.tau}")
        if self.theta < 0:
            raise ValueError(f"theta must be >= 0, got {self.theta}")


def saturate(u, lim: ActuatorLimits):
    return np.clip(u, lim.u_min, lim.u_max)


def _relu(x):
    return np.maximum(x, 0.0)


def saturate_relu(u, lim: ActuatorLimits):
    """Saturation written with two ReLUs; numerically equal to ``saturate``."""
    return _relu(-_relu(lim.u_max - u) + lim.u_max - lim.u_min) + lim.u_min


def actor_forward(K: ControllerParams, s, lim: ActuatorLimits) -> tuple[float, float]:
    """Return ``(u_raw, u_sat)`` for a single feature vector ``s``."""
    u_raw = float(np.dot(K.as_array(), np.asarray(s, dtype=float)))
    if not math.isfinite(u_raw):
        raise FloatingPointError(f"non-finite control signal from K={K.to_dict()}, s={s}")
    return u_raw, min(max(u_raw, lim.u_min), lim.u_max)


def actor_grad(K: ControllerParams, s, lim: ActuatorLimits) -> np.ndarray:
    """Gradient of the saturated control w.r.t. ``(kp, ki, kd, rho)``.

    Works row-wise on a batch of features. The clamp has zero slope outside
    the limits; exactly on a limit the interior slope is used.
    """
    s = np.asarray(s, dtype=float)
    u_raw = s @ K.as_array()
    inside = (u_raw >= lim.u_min) & (u_raw <= lim.u_max)
    return s * np.asarray(inside, dtype=float)[..., None]


def half_rule(sections, dead_time: float = 0.0) -> FopdtModel:
    """Reduce a lag cascade to FOPDT form with Skogestad's half rule.

    Half of the second-largest lag goes to the retained time constant and
    half to the dead time; smaller lags are added to the dead time entirely.
    """
    secs = [(float(k), float(tau)) for k, tau in sections]
    if not secs:
        raise ValueError("half_rule needs at least one section")
    taus = sorted((tau for _, tau in secs), reverse=True)
    k = math.prod(g for g, _ in secs)
    tau = taus[0]
    theta = float(dead_time)
    if len(taus) > 1:
        tau += taus[1] / 2
        theta += taus[1] / 2 + sum(taus[2:])
    return FopdtModel(k, tau, theta)


def simc_pi(m: FopdtModel, tau_c: float | None = None, trainable=(True, True, False, True)) -> ControllerParams:
    """SIMC PI tuning; ``tau_c`` defaults to the model dead time."""
    if tau_c is None:
        tau_c = m.theta
    if not tau_c > 0:
        raise ValueError(f"SIMC needs tau_c > 0; got tau_c={tau_c} (theta={m.theta})")
    if m.k == 0:
        raise ValueError("SIMC needs a nonzero plant gain")
    kc = m.tau / (m.k * (tau_c + m.theta))
    tau_i = min(m.tau, 4.0 * (tau_c + m.theta))
    return ControllerParams(kc, kc / tau_i, 0.0, 0.0, trainable)


def save_params(K: ControllerParams, path) -> None:
    # repr round-trips floats exactly through json
    Path(path).write_text(json.dumps(K.to_dict(), indent=2) + "\n")


def load_params(path, trainable=(True, True, False, True)) -> ControllerParams:
    d = json.loads(Path(path).read_text())
    return ControllerParams(float(d["kp"]), float(d["ki"]), float(d.get("kd", 0.0)), float(d.get("rho", 0.0)), trainable)
