"""Interval type-2 memberships: fuzzifiers, intervals, losses and defuzzification.

A type-1 membership ``y`` in [0, 1] is widened into the interval
``[y ** m_lower, y ** m_upper]`` with ``m_lower >= m_upper``. Both exponents
come from the estimated label cardinality, so an instance believed to carry
many labels receives wider (fuzzier) intervals.

All functions accept a single instance (1-D arrays, scalar fuzzifiers) or a
batch (``(n, L)`` arrays, ``(n,)`` fuzzifiers).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ShapeError

MEMBERSHIP_FLOOR = 1e-6
DENOM_EPS = 1e-8
DEFAULT_LAMBDA = 0.1


def round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def predicted_cardinality(m_hat, n_labels: int):
    """``clamp(round(m_hat), 1, L)``, the label count used at inference."""
    return np.clip(round_half_up(m_hat), 1, n_labels)


@dataclass(frozen=True)
class FuzzifierPair:
    m_lower: np.ndarray
    m_upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.m_lower, dtype=np.float64)
        up = np.asarray(self.m_upper, dtype=np.float64)
        if lo.shape != up.shape:
            raise ShapeError("fuzzifier arrays differ in shape")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(up))):
            raise InputError("fuzzifiers must be finite")
        if np.any(lo <= 0) or np.any(up <= 0):
            raise InputError("fuzzifiers must be positive")
        if np.any(lo < up):
            raise InputError("lower-bound fuzzifier must not be smaller than the upper-bound one")
        object.__setattr__(self, "m_lower", lo)
        object.__setattr__(self, "m_upper", up)


@dataclass(frozen=True)
class It2Label:
    lower: np.ndarray
    upper: np.ndarray
    y: np.ndarray
    pair: FuzzifierPair

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower


@dataclass(frozen=True)
class Prediction:
    y_hat: np.ndarray   # binary, same shape as the scores
    bar_y: np.ndarray   # scores that were ranked or thresholded
    k: np.ndarray       # label count used for each instance


def derive_fuzzifiers(m_hat, card, n_labels: int) -> FuzzifierPair:
    """``m_lower = m_hat / card`` and ``m_upper = m_hat / L``.

    ``card`` is the true cardinality during training and the predicted one
    (see :func:`predicted_cardinality`) at inference.
    """
    m_hat = np.asarray(m_hat, dtype=np.float64)
    card = np.asarray(card)
    if np.any(card < 1):
        raise InputError("cardinality 0 has no fuzzifier; zero-label instances must be filtered out")
    if np.any(card > n_labels):
        raise InputError(f"cardinality exceeds the label count {n_labels}")
    return FuzzifierPair(m_hat / card, m_hat / float(n_labels))


def _exponents(y, pair):
    lo, up = pair.m_lower, pair.m_upper
    if y.ndim == 2 and lo.ndim == 1:
        lo, up = lo[:, None], up[:, None]
    return lo, up


def build_interval(y, pair: FuzzifierPair) -> It2Label:
    y = np.asarray(y, dtype=np.float64)
    if np.any(y < 0) or np.any(y > 1):
        raise InputError("memberships must lie in [0, 1]")
    lo, up = _exponents(y, pair)
    base = np.maximum(y, MEMBERSHIP_FLOOR)
    return It2Label(base ** lo, base ** up, y, pair)


def _soft_f1_terms(u, y_star):
    # per-row -2 u.s / (sum(u) + sum(s) + eps) and its gradient w.r.t. u
    num = (u * y_star).sum(axis=-1, keepdims=True)
    den = u.sum(axis=-1, keepdims=True) + y_star.sum(axis=-1, keepdims=True) + DENOM_EPS
    value = -2.0 * num / den
    grad = -2.0 * y_star / den + 2.0 * num / den ** 2
    return value[..., 0], grad


def _check_target(y_star, shape):
    y_star = np.asarray(y_star, dtype=np.float64)
    if y_star.shape != shape:
        raise ShapeError(f"target shape {y_star.shape} does not match memberships {shape}")
    return y_star


def it2_loss(it2: It2Label, y_star) -> float:
    """Soft-F1 mismatch summed over both interval bounds; in [-2, 0].

    Batches return the mean over rows.
    """
    y_star = _check_target(y_star, it2.lower.shape)
    lo, _ = _soft_f1_terms(it2.lower, y_star)
    up, _ = _soft_f1_terms(it2.upper, y_star)
    return float(np.mean(lo + up))


def it2_loss_grad(y, y_star, pair: FuzzifierPair):
    """Loss (mean over rows) and its gradient w.r.t. the type-1 memberships ``y``.

    The fuzzifiers are held constant. Memberships below the floor get zero
    gradient, matching the floored forward pass.
    """
    it2 = build_interval(y, pair)
    y_star = _check_target(y_star, it2.lower.shape)
    lo_val, lo_grad = _soft_f1_terms(it2.lower, y_star)
    up_val, up_grad = _soft_f1_terms(it2.upper, y_star)
    m_lo, m_up = _exponents(it2.y, pair)
    y = it2.y
    base = np.maximum(y, MEMBERSHIP_FLOOR)
    live = y > MEMBERSHIP_FLOOR
    dlo = np.where(live, m_lo * it2.lower / base, 0.0)
    dup = np.where(live, m_up * it2.upper / base, 0.0)
    n = 1 if y.ndim == 1 else y.shape[0]
    grad = (lo_grad * dlo + up_grad * dup) / n
    return float(np.mean(lo_val + up_val)), grad


def type1_loss(y, y_star) -> float:
    y = np.asarray(y, dtype=np.float64)
    y_star = _check_target(y_star, y.shape)
    value, _ = _soft_f1_terms(y, y_star)
    return float(np.mean(value))


def type1_loss_grad(y, y_star):
    y = np.asarray(y, dtype=np.float64)
    y_star = _check_target(y_star, y.shape)
    value, grad = _soft_f1_terms(y, y_star)
    n = 1 if y.ndim == 1 else y.shape[0]
    return float(np.mean(value)), grad / n


def top_k_mask(scores, k) -> np.ndarray:
    """Ones at the ``k`` largest scores per row; ties go to the lower label index."""
    scores = np.asarray(scores, dtype=np.float64)
    s2 = np.atleast_2d(scores)
    k2 = np.broadcast_to(np.asarray(k), (s2.shape[0],))
    order = np.argsort(-s2, axis=1, kind="stable")
    rank = np.empty_like(order)
    np.put_along_axis(rank, order, np.arange(s2.shape[1])[None, :].repeat(s2.shape[0], 0), axis=1)
    mask = (rank < k2[:, None]).astype(np.int64)
    return mask.reshape(scores.shape)


def defuzz_scores(it2: It2Label, lam: float) -> np.ndarray:
    """Interval midpoint penalized by ``lam / 2`` times the interval width."""
    return 0.5 * (it2.upper + it2.lower) - 0.5 * lam * (it2.upper - it2.lower)


def defuzzify(it2: It2Label, m_hat, lam: float = DEFAULT_LAMBDA) -> Prediction:
    if lam < 0:
        raise InputError("lambda must be non-negative")
    bar_y = defuzz_scores(it2, lam)
    k = predicted_cardinality(m_hat, bar_y.shape[-1])
    return Prediction(top_k_mask(bar_y, k), bar_y, k)


def type1_binarize(y, m_hat, total_labels: bool = False) -> Prediction:
    """Threshold at ``1 / k``.

    ``k`` is the rounded predicted cardinality, or the label count ``L`` when
    ``total_labels`` is set.
    """
    y = np.asarray(y, dtype=np.float64)
    L = y.shape[-1]
    if total_labels:
        k = np.full(np.shape(m_hat), L, dtype=np.int64)
    else:
        k = predicted_cardinality(m_hat, L)
    thr = 1.0 / k
    if y.ndim == 2:
        thr = np.reshape(thr, (-1, 1))
    return Prediction((y >= thr).astype(np.int64), y, k)
