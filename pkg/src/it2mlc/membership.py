"""Centered-clamp output layer producing type-1 memberships in [0, 1].

Each label neuron j computes

    g_j = 0.5 + alpha_j * (w_j . h - (sum(h) + sum(w_j)) / d_in)
    y_j = clip(g_j, 0, 1)

so the neuron's bias is tied to the means of its input and its own weights
instead of being a free parameter.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


class MembershipHead:
    """Weights ``(L, d_in)`` and per-label scale ``alpha`` (``(L,)``, starts at 1)."""

    def __init__(self, weight: np.ndarray, alpha: np.ndarray | None = None):
        self.weight = np.array(weight, dtype=np.float64)
        if self.weight.ndim != 2:
            raise ShapeError("head weight must be a (labels, inputs) matrix")
        if alpha is None:
            alpha = np.ones(self.weight.shape[0])
        self.alpha = np.array(alpha, dtype=np.float64)
        if self.alpha.shape != (self.weight.shape[0],):
            raise ShapeError(f"alpha shape {self.alpha.shape} does not match {self.weight.shape[0]} labels")

    @classmethod
    def init(cls, d_in: int, n_labels: int, rng: np.random.Generator) -> "MembershipHead":
        bound = 1.0 / np.sqrt(d_in)
        return cls(rng.uniform(-bound, bound, size=(n_labels, d_in)))

    @property
    def n_labels(self) -> int:
        return self.weight.shape[0]

    @property
    def d_in(self) -> int:
        return self.weight.shape[1]

    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.alpha]

    def param_labels(self) -> list[str]:
        return ["head weight", "head alpha"]

    def _check(self, h):
        h = np.asarray(h, dtype=np.float64)
        if h.shape[-1] != self.d_in or h.ndim not in (1, 2):
            raise ShapeError(f"input of shape {h.shape} does not fit head input dimension {self.d_in}")
        return h

    def centered(self, h: np.ndarray) -> np.ndarray:
        """``w_j . h - (sum(h) + sum(w_j)) / d_in``, before scaling by alpha."""
        h = self._check(h)
        d = self.d_in
        return h @ self.weight.T - (h.sum(axis=-1, keepdims=True) + self.weight.sum(axis=1)) / d

    def score(self, h: np.ndarray) -> np.ndarray:
        return 0.5 + self.alpha * self.centered(h)

    def apply(self, h: np.ndarray) -> np.ndarray:
        """Memberships for one input ``(d_in,)`` or a batch ``(n, d_in)``."""
        return np.clip(self.score(h), 0.0, 1.0)

    def apply_grad(self, h: np.ndarray, upstream: np.ndarray):
        """Backpropagate ``upstream = dLoss/dy`` through the head.

        Returns ``(d_weight, d_alpha, d_h)``. Batched inputs sum the parameter
        gradients over rows. Neurons whose score lies outside (0, 1) pass no
        gradient at all.
        """
        h = self._check(h)
        c = self.centered(h)
        g = 0.5 + self.alpha * c
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != g.shape:
            raise ShapeError(f"upstream gradient {upstream.shape} does not match output {g.shape}")
        gm = np.where((g > 0.0) & (g < 1.0), upstream, 0.0)
        d = self.d_in
        hb = h.reshape(-1, d)
        gb = gm.reshape(-1, self.n_labels)
        scaled = gb * self.alpha
        d_weight = scaled.T @ hb - scaled.sum(axis=0)[:, None] / d
        d_alpha = (gb * c.reshape(gb.shape)).sum(axis=0)
        d_h = scaled @ self.weight - scaled.sum(axis=1, keepdims=True) / d
        return d_weight, d_alpha, d_h.reshape(h.shape)
