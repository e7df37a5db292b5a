"""Small dense-network engine: layers, manual backprop, optimizers, gradient checks.

Everything runs in float64 so finite-difference checks can be tight.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError, StateError

ACTIVATIONS = ("linear", "relu", "tanh", "sigmoid")


def make_rng(seed: int) -> np.random.Generator:
    """Seeded generator; every random draw in the package goes through one of these."""
    return np.random.default_rng(seed)


def minibatches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]


def _activate(tag, z):
    if tag == "linear":
        return z
    if tag == "relu":
        return np.maximum(z, 0.0)
    if tag == "tanh":
        return np.tanh(z)
    if tag == "sigmoid":
        return 0.5 * (1.0 + np.tanh(0.5 * z))
    raise ValueError(f"unknown activation {tag!r}")


def _activate_grad(tag, z, a):
    # derivative of the activation w.r.t. its input, given input z and output a
    if tag == "linear":
        return np.ones_like(z)
    if tag == "relu":
        return (z > 0).astype(z.dtype)
    if tag == "tanh":
        return 1.0 - a * a
    if tag == "sigmoid":
        return a * (1.0 - a)
    raise ValueError(f"unknown activation {tag!r}")


@dataclass
class Layer:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray    # (out,)
    activation: str = "linear"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise ShapeError(
                f"layer weight {self.weight.shape} and bias {self.bias.shape} disagree")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")

    @property
    def n_in(self) -> int:
        return self.weight.shape[1]

    @property
    def n_out(self) -> int:
        return self.weight.shape[0]


def init_layer(n_in: int, n_out: int, activation: str, rng: np.random.Generator) -> Layer:
    """Uniform fan-in init, U(-1/sqrt(n_in), 1/sqrt(n_in)), zero bias."""
    bound = 1.0 / np.sqrt(n_in)
    weight = rng.uniform(-bound, bound, size=(n_out, n_in))
    return Layer(weight, np.zeros(n_out), activation)


class DenseNet:
    """Feedforward stack of affine layers with per-layer activation tags.

    ``forward`` caches what ``backward`` needs, so a net instance must not be
    shared between threads while training.
    """

    def __init__(self, layers: Sequence[Layer]):
        layers = list(layers)
        if not layers:
            raise ShapeError("a DenseNet needs at least one layer")
        for k in range(len(layers) - 1):
            if layers[k].n_out != layers[k + 1].n_in:
                raise ShapeError(
                    f"layer {k} outputs {layers[k].n_out} but layer {k + 1} "
                    f"expects {layers[k + 1].n_in}")
        self.layers = layers
        self._cache = None

    @classmethod
    def build(cls, sizes: Sequence[int], rng: np.random.Generator,
              hidden: str = "relu", output: str = "linear") -> "DenseNet":
        """``sizes = [d_in, h1, ..., d_out]``."""
        if len(sizes) < 2:
            raise ShapeError("sizes needs an input and an output dimension")
        n = len(sizes) - 1
        layers = [init_layer(sizes[k], sizes[k + 1], hidden if k < n - 1 else output, rng)
                  for k in range(n)]
        return cls(layers)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    @property
    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def param_labels(self) -> list[str]:
        out = []
        for k in range(len(self.layers)):
            out.extend((f"layer {k} weight", f"layer {k} bias"))
        return out

    def get_state(self) -> list[np.ndarray]:
        return [p.copy() for p in self.parameters()]

    def set_state(self, state: Sequence[np.ndarray]) -> None:
        for p, s in zip(self.parameters(), state, strict=True):
            if p.shape != s.shape:
                raise ShapeError(f"state shape {s.shape} does not match {p.shape}")
            p[...] = s

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Forward pass without caching (safe for concurrent use)."""
        a = self._check_input(X)
        for layer in self.layers:
            a = _activate(layer.activation, a @ layer.weight.T + layer.bias)
        return a

    def forward(self, X: np.ndarray) -> np.ndarray:
        a = self._check_input(X)
        cache = []
        for layer in self.layers:
            z = a @ layer.weight.T + layer.bias
            out = _activate(layer.activation, z)
            cache.append((a, z, out))
            a = out
        self._cache = cache
        return a

    def backward(self, grad_out: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        """Gradients for ``parameters()`` (same order) and for the input batch."""
        if self._cache is None:
            raise StateError("backward called before forward")
        grad_out = np.asarray(grad_out, dtype=np.float64)
        last = self._cache[-1][2]
        if grad_out.shape != last.shape:
            raise ShapeError(f"loss gradient {grad_out.shape} does not match output {last.shape}")
        grads: list[np.ndarray] = []
        g = grad_out
        for layer, (a_in, z, a_out) in zip(reversed(self.layers), reversed(self._cache)):
            gz = g * _activate_grad(layer.activation, z, a_out)
            # bias first, so the final reverse gives weight, bias order
            grads.append(gz.sum(axis=0))
            grads.append(gz.T @ a_in)
            g = gz @ layer.weight
        grads.reverse()
        return grads, g

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_in:
            raise ShapeError(f"batch of shape {X.shape} does not fit input dimension {self.n_in}")
        return X


class Optimizer:
    """Updates parameter arrays in place. Buffers are created lazily on the first step."""

    kind = "base"

    def __init__(self, learning_rate: float):
        if not learning_rate > 0:
            raise ValueError("learning rate must be positive")
        self.learning_rate = float(learning_rate)
        self.step_count = 0

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
             labels: Sequence[str] | None = None) -> None:
        if len(params) != len(grads):
            raise ShapeError(f"{len(grads)} gradients for {len(params)} parameters")
        for i, (p, g) in enumerate(zip(params, grads)):
            if p.shape != g.shape:
                raise ShapeError(f"gradient {i} has shape {g.shape}, parameter has {p.shape}")
            if not np.all(np.isfinite(g)):
                where = labels[i] if labels is not None else f"parameter {i}"
                raise NumericError(f"non-finite gradient in {where}", where=where)
        self.step_count += 1
        self._update(params, grads)

    def _update(self, params, grads):
        raise NotImplementedError


class SGD(Optimizer):
    kind = "sgd"

    def _update(self, params, grads):
        for p, g in zip(params, grads):
            p -= self.learning_rate * g


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, learning_rate=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        super().__init__(learning_rate)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def _update(self, params, grads):
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)


def make_optimizer(kind: str, learning_rate: float) -> Optimizer:
    if kind == "adam":
        return Adam(learning_rate)
    if kind == "sgd":
        return SGD(learning_rate)
    raise ValueError(f"unknown optimizer {kind!r}")


def step(opt: Optimizer, net: DenseNet, grads: Sequence[np.ndarray]) -> None:
    opt.step(net.parameters(), grads, net.param_labels())


@dataclass
class GradCheckReport:
    tolerance: float
    errors: dict[str, float] = field(default_factory=dict)

    @property
    def failures(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e <= self.tolerance]

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def lines(self) -> list[str]:
        return [f"{'FAIL' if not e <= self.tolerance else 'ok  '} {k}: rel err {e:.3e}"
                for k, e in self.errors.items()]


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(np.linalg.norm(analytic - numeric) / scale)


def numeric_gradient(param: np.ndarray, loss: Callable[[], float], h: float = 1e-5) -> np.ndarray:
    """Central differences, perturbing ``param`` in place and restoring it."""
    num = np.zeros_like(param)
    flat = param.reshape(-1)
    out = num.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss()
        flat[i] = orig - h
        down = loss()
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return num


def grad_check(params: Sequence[np.ndarray], loss: Callable[[], float],
               grads: Sequence[np.ndarray], tolerance: float = 1e-4, h: float = 1e-5,
               labels: Sequence[str] | None = None) -> GradCheckReport:
    """Compare analytic ``grads`` with central differences of ``loss``.

    ``loss`` is called with no arguments and must read the current values of
    ``params``. The per-parameter error is ``|a - n| / max(|a|, |n|)`` in the
    2-norm over all elements of that parameter.
    """
    base = loss()
    if not np.isfinite(base):
        raise NumericError("loss is not finite at the base point")
    if labels is None:
        labels = [f"param {i}" for i in range(len(params))]
    report = GradCheckReport(tolerance)
    for label, p, g in zip(labels, params, grads, strict=True):
        report.errors[label] = relative_error(np.asarray(g), numeric_gradient(p, loss, h))
    return report
