"""Q-function approximator: a small ReLU MLP with hand-written backprop.

Inputs are the four controller features plus the applied input, output is a
scalar Q value. Everything is float64 so finite-difference checks are tight.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mlp",
    "mlp_init",
    "q_forward",
    "q_values",
    "q_backward",
    "grad_wrt_action",
    "Adam",
    "SgdMomentum",
    "Sgd",
    "make_optimizer",
    "clip_by_global_norm",
    "soft_update",
    "save_mlp",
    "load_mlp",
    "N_INPUTS",
]

N_INPUTS = 5
_MAGIC = b"PIDRLMLP"
_FORMAT_VERSION = 1


class Mlp:
    """ReLU MLP whose parameters live in one flat vector ``theta``.

    ``weights[i]`` (shape ``(fan_in, fan_out)``) and ``biases[i]`` are views
    into ``theta``, so optimizers and soft updates touch a single array.
    Rows of an input batch are samples.
    """

    def __init__(self, sizes, theta=None):
        self.sizes = tuple(int(n) for n in sizes)
        shapes = []
        for fan_in, fan_out in zip(self.sizes, self.sizes[1:]):
            shapes += [(fan_in, fan_out), (fan_out,)]
        total = sum(math.prod(sh) for sh in shapes)
        if theta is None:
            theta = np.zeros(total)
        theta = np.ascontiguousarray(theta, dtype=float)
        if theta.shape != (total,):
            raise ValueError(f"expected {total} parameters for sizes {self.sizes}, got {theta.shape}")
        self.theta = theta
        views, pos = [], 0
        for sh in shapes:
            n = math.prod(sh)
            views.append(theta[pos : pos + n].reshape(sh))
            pos += n
        self.weights = views[0::2]
        self.biases = views[1::2]

    @property
    def params(self) -> list[np.ndarray]:
        return [p for wb in zip(self.weights, self.biases) for p in wb]

    @property
    def n_params(self) -> int:
        return self.theta.size

    @property
    def shapes(self) -> list[tuple[int, ...]]:
        return [p.shape for p in self.params]

    def copy(self) -> "Mlp":
        return Mlp(self.sizes, self.theta.copy())

    def flat(self) -> np.ndarray:
        return self.theta.copy()


def mlp_init(hidden, rng: np.random.Generator | None = None, n_in: int = N_INPUTS, zero: bool = False) -> Mlp:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases. ``hidden=[]`` gives a linear net."""
    sizes = [n_in, *[int(h) for h in hidden], 1]
    if any(h < 1 for h in sizes):
        raise ValueError(f"layer widths must be >= 1, got {sizes}")
    if rng is None and not zero:
        raise ValueError("mlp_init needs an rng unless zero=True")
    net = Mlp(sizes)
    if not zero:
        for w in net.weights:
            bound = 1.0 / math.sqrt(w.shape[0])
            w[...] = rng.uniform(-bound, bound, size=w.shape)
    return net


def _inputs(S, U) -> np.ndarray:
    S = np.atleast_2d(np.asarray(S, dtype=float))
    U = np.asarray(U, dtype=float).reshape(-1, 1)
    return np.hstack([S, U])


def _forward(net: Mlp, X: np.ndarray):
    acts = [X]
    h = X
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w
        h += b
        if i != last:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    return acts


def q_values(net: Mlp, S, U) -> np.ndarray:
    """Batched Q(s, u); returns shape ``(batch,)``."""
    return _forward(net, _inputs(S, U))[-1][:, 0]


def q_forward(net: Mlp, s, u: float) -> float:
    q = float(q_values(net, s, u)[0])
    if not math.isfinite(q):
        raise FloatingPointError("critic produced a non-finite value")
    return q


def _backprop(net: Mlp, acts, dout: np.ndarray, want_input: bool = False):
    """Flat parameter gradient (``theta`` layout) and, optionally, input gradient."""
    grad = Mlp(net.sizes)
    delta = dout
    for i in range(len(net.weights) - 1, -1, -1):
        np.dot(acts[i].T, delta, out=grad.weights[i])
        delta.sum(axis=0, out=grad.biases[i])
        if i == 0 and not want_input:
            return grad, None
        delta = delta @ net.weights[i].T
        if i > 0:
            delta *= acts[i] > 0
    return grad, delta


def q_backward(net: Mlp, S, U, targets) -> tuple[Mlp, float]:
    """Gradient of ``0.5 * mean((Q - target)^2)`` w.r.t. all parameters.

    The gradient is returned as an ``Mlp`` of the same shape, so
    ``grad.theta`` lines up with ``net.theta`` and ``grad.weights[i]`` with
    ``net.weights[i]``.
    """
    X = _inputs(S, U)
    if X.shape[0] == 0:
        raise ValueError("q_backward needs a non-empty batch")
    acts = _forward(net, X)
    err = acts[-1][:, 0] - np.asarray(targets, dtype=float)
    n = X.shape[0]
    grad, _ = _backprop(net, acts, (err / n)[:, None])
    return grad, 0.5 * float(np.mean(err**2))


def grad_wrt_action(net: Mlp, S, U) -> np.ndarray:
    """dQ/du for each row, by backprop to the last input coordinate."""
    X = _inputs(S, U)
    acts = _forward(net, X)
    _, dx = _backprop(net, acts, np.ones((X.shape[0], 1)), want_input=True)
    return dx[:, -1]


def clip_by_global_norm(grads, max_norm: float | None):
    if max_norm is None:
        return grads
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    if norm > max_norm:
        scale = max_norm / norm
        return [g * scale for g in grads]
    return grads


def _check_shapes(params, grads):
    if len(params) != len(grads) or any(p.shape != np.shape(g) for p, g in zip(params, grads)):
        raise ValueError("gradient shapes do not match parameters")


@dataclass
class Adam:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip: float | None = None
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads) -> None:
        """Minimizing update, applied in place."""
        _check_shapes(params, grads)
        grads = clip_by_global_norm(grads, self.clip)
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class SgdMomentum:
    """``v <- decay*v + g``, ``p <- p - lr/sqrt(t) * v``."""

    lr: float = 1e-3
    decay: float = 0.75
    clip: float | None = 1.0
    t: int = 0
    v: list = field(default_factory=list)

    def step(self, params: list[np.ndarray], grads) -> None:
        _check_shapes(params, grads)
        grads = clip_by_global_norm(grads, self.clip)
        if not self.v:
            self.v = [np.zeros_like(p) for p in params]
        self.t += 1
        lr = self.lr / math.sqrt(self.t)
        for p, g, v in zip(params, grads, self.v):
            v *= self.decay
            v += g
            p -= lr * v


@dataclass
class Sgd:
    lr: float = 1e-3
    clip: float | None = None
    t: int = 0

    def step(self, params: list[np.ndarray], grads) -> None:
        _check_shapes(params, grads)
        grads = clip_by_global_norm(grads, self.clip)
        self.t += 1
        for p, g in zip(params, grads):
            p -= self.lr * g


def make_optimizer(kind: str, lr: float, clip: float | None = None, momentum: float = 0.75):
    if not lr >= 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if kind == "adam":
        return Adam(lr=lr, clip=clip)
    if kind == "sgd_momentum":
        return SgdMomentum(lr=lr, decay=momentum, clip=clip)
    if kind == "sgd":
        return Sgd(lr=lr, clip=clip)
    raise ValueError(f"unknown optimizer {kind!r} (expected adam, sgd_momentum or sgd)")


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """Polyak averaging ``target <- tau*online + (1-tau)*target``, in place."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    if target.shapes != online.shapes:
        raise ValueError("soft_update between networks of different shapes")
    target.theta *= 1.0 - tau
    target.theta += tau * online.theta
    return target


def save_mlp(net: Mlp, path) -> None:
    """Binary format: magic, one JSON header line, then little-endian float64 params."""
    header = {"version": _FORMAT_VERSION, "dtype": "<f8", "shapes": [list(s) for s in net.shapes]}
    with open(path, "wb") as f:
        f.write(_MAGIC + b"\n")
        f.write(json.dumps(header).encode() + b"\n")
        f.write(net.flat().astype("<f8").tobytes())


def load_mlp(path) -> Mlp:
    with open(path, "rb") as f:
        if f.readline().rstrip(b"\n") != _MAGIC:
            raise ValueError(f"{path}: not a critic weight file")
        header = json.loads(f.readline())
        if header.get("version") != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {header.get('version')}")
        flat = np.frombuffer(f.read(), dtype=header["dtype"]).astype(float)
    shapes = [tuple(s) for s in header["shapes"]]
    if sum(math.prod(s) for s in shapes) != flat.size:
        raise ValueError(f"{path}: truncated weight data")
    sizes = [shapes[0][0]] + [s[1] for s in shapes[0::2]]
    net = Mlp(sizes, flat)
    if net.shapes != shapes:
        raise ValueError(f"{path}: inconsistent layer shapes {shapes}")
    return net
