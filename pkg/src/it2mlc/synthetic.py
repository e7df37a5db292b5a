"""Synthetic multi-label data for tests and demos."""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .data import Dataset
from .numerics import make_rng


def clustered(n: int = 200, d: int = 10, n_labels: int = 3, seed: int = 0, noise: float = 0.3,
              separation: float = 3.0, max_card: int | None = None, name: str = "synthetic") -> Dataset:
    """Tight Gaussian clusters, one per non-empty label subset of size <= ``max_card``.

    Every instance in a cluster carries exactly that cluster's label set, so
    both the label sets and their sizes are linear functions of cluster
    membership.
    """
    rng = make_rng(seed)
    max_card = n_labels if max_card is None else max_card
    subsets = [c for k in range(1, max_card + 1) for c in combinations(range(n_labels), k)]
    centers = separation * rng.standard_normal((len(subsets), d))
    which = rng.integers(len(subsets), size=n)
    X = centers[which] + noise * rng.standard_normal((n, d))
    Y = np.zeros((n, n_labels), dtype=np.int64)
    for i, c in enumerate(which):
        Y[i, list(subsets[c])] = 1
    return Dataset(name, X, Y)


def scene_like(n: int = 2407, d: int = 294, n_labels: int = 6, seed: int = 0,
               extra_label_rate: float = 0.07, noise: float = 5.0, name: str = "scene-like") -> Dataset:
    """Mostly single-label data with occasional second labels and overlapping classes.

    Label means roughly follow a one-or-two-labels-per-image regime; the
    features are a noisy linear mix of the label indicators, so the task is
    learnable but not separable.
    """
    rng = make_rng(seed)
    primary = rng.integers(n_labels, size=n)
    Y = np.zeros((n, n_labels), dtype=np.int64)
    Y[np.arange(n), primary] = 1
    extra = rng.random(n) < extra_label_rate
    second = (primary + rng.integers(1, n_labels, size=n)) % n_labels
    Y[np.flatnonzero(extra), second[extra]] = 1
    mix = rng.standard_normal((n_labels, d))
    X = Y @ mix + noise * rng.standard_normal((n, d))
    perm = rng.permutation(n)
    half = n // 2
    return Dataset(name, X, Y, original_splits={"train": np.sort(perm[:half]), "test": np.sort(perm[half:])})
