"""Cardinality estimation: autoencoder with a softmax head, then a linear fit on its codes.

The estimator never sees which labels are on, only how many. Its output
``m_hat`` drives the fuzzifier exponents and the top-k label count.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericError, ShapeError, StateError
from .numerics import Adam, DenseNet, init_layer, make_rng, minibatches


def cardinality_one_hot(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """One-hot cardinality targets and a mask of rows that have one.

    Column ``i`` (0-based) marks an instance carrying ``i + 1`` labels. Rows
    with no labels get an all-zero target and ``mask = False``.
    """
    Y = np.atleast_2d(np.asarray(Y))
    n, L = Y.shape
    counts = Y.sum(axis=1).astype(np.int64)
    onehot = np.zeros((n, L))
    mask = counts >= 1
    onehot[np.flatnonzero(mask), counts[mask] - 1] = 1.0
    return onehot, mask


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


class Autoencoder:
    """Symmetric encoder/decoder pair plus an affine softmax head on the bottleneck."""

    def __init__(self, encoder: DenseNet, decoder: DenseNet, head_weight, head_bias, eta: float = 1.0):
        if decoder.n_out != encoder.n_in or decoder.n_in != encoder.n_out:
            raise ShapeError("decoder must map the bottleneck back to the input dimension")
        self.encoder = encoder
        self.decoder = decoder
        self.head_weight = np.asarray(head_weight, dtype=np.float64)
        self.head_bias = np.asarray(head_bias, dtype=np.float64)
        if self.head_weight.shape[1] != encoder.n_out:
            raise ShapeError("cardinality head must read the bottleneck")
        self.eta = float(eta)

    @classmethod
    def build(cls, d: int, n_labels: int, rng: np.random.Generator, hidden: int = 256,
              bottleneck: int = 64, eta: float = 1.0) -> "Autoencoder":
        encoder = DenseNet.build([d, hidden, bottleneck], rng, hidden="relu", output="linear")
        decoder = DenseNet.build([bottleneck, hidden, d], rng, hidden="relu", output="linear")
        head = init_layer(bottleneck, n_labels, "linear", rng)
        return cls(encoder, decoder, head.weight, head.bias, eta)

    @property
    def n_labels(self) -> int:
        return self.head_weight.shape[0]

    def parameters(self) -> list[np.ndarray]:
        return self.encoder.parameters() + self.decoder.parameters() + [self.head_weight, self.head_bias]

    def param_labels(self) -> list[str]:
        return ([f"encoder {s}" for s in self.encoder.param_labels()]
                + [f"decoder {s}" for s in self.decoder.param_labels()]
                + ["cardinality head weight", "cardinality head bias"])

    def encode(self, X) -> np.ndarray:
        return self.encoder.predict(np.atleast_2d(X))

    def reconstruct(self, X) -> np.ndarray:
        return self.decoder.predict(self.encode(X))

    def cardinality_proba(self, X) -> np.ndarray:
        return _softmax(self.encode(X) @ self.head_weight.T + self.head_bias)

    def loss_and_grad(self, X, onehot, mask=None):
        """Mean over rows of ``mean((x - x_rec)^2) + eta * CE(softmax(head(code)), l)``.

        Rows with ``mask = False`` contribute reconstruction only.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        onehot = np.atleast_2d(onehot)
        n, d = X.shape
        if mask is None:
            mask = np.ones(n, dtype=bool)
        w = mask.astype(np.float64)

        codes = self.encoder.forward(X)
        X_rec = self.decoder.forward(codes)
        resid = X_rec - X
        rec = (resid ** 2).mean(axis=1)

        logits = codes @ self.head_weight.T + self.head_bias
        ce = -(onehot * _log_softmax(logits)).sum(axis=1) * w
        loss = float(np.mean(rec + self.eta * ce))

        d_rec = 2.0 * resid / (d * n)
        dec_grads, d_codes = self.decoder.backward(d_rec)
        d_logits = self.eta * (_softmax(logits) - onehot) * w[:, None] / n
        d_hw = d_logits.T @ codes
        d_hb = d_logits.sum(axis=0)
        d_codes = d_codes + d_logits @ self.head_weight
        enc_grads, _ = self.encoder.backward(d_codes)
        return loss, enc_grads + dec_grads + [d_hw, d_hb]


def ae_loss(ae: Autoencoder, x, l) -> float:
    """Objective for one instance (or the row mean for a batch) against one-hot ``l``."""
    x = np.atleast_2d(x)
    l = np.atleast_2d(l)
    if l.shape != (x.shape[0], ae.n_labels):
        raise ShapeError(f"cardinality target {l.shape} does not fit {ae.n_labels} labels")
    if np.any(l.sum(axis=1) != 1) or np.any((l != 0) & (l != 1)):
        raise InputError("cardinality target must be one-hot")
    X = np.asarray(x, dtype=np.float64)
    codes = ae.encode(X)
    rec = ((ae.decoder.predict(codes) - X) ** 2).mean(axis=1)
    ce = -(l * _log_softmax(codes @ ae.head_weight.T + ae.head_bias)).sum(axis=1)
    return float(np.mean(rec + ae.eta * ce))


@dataclass
class AutoencoderHistory:
    # full-split values after each epoch; index 0 is the initial network
    losses: list[float] = field(default_factory=list)
    reconstruction: list[float] = field(default_factory=list)


def train_autoencoder(X, Y, eta: float = 1.0, seed: int = 0, *, hidden: int = 256,
                      bottleneck: int = 64, epochs: int = 50, batch_size: int = 128,
                      learning_rate: float = 1e-3) -> tuple[Autoencoder, AutoencoderHistory]:
    """Fit the autoencoder with Adam on shuffled minibatches.

    Zero-label rows are kept for reconstruction but carry no cardinality term.
    """
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise InputError("autoencoder training split is empty")
    if Y.shape[0] != X.shape[0]:
        raise ShapeError("features and labels differ in row count")
    rng = make_rng(seed)
    ae = Autoencoder.build(X.shape[1], Y.shape[1], rng, hidden=hidden, bottleneck=bottleneck, eta=eta)
    onehot, mask = cardinality_one_hot(Y)
    opt = Adam(learning_rate)
    params, labels = ae.parameters(), ae.param_labels()
    history = AutoencoderHistory()

    def record():
        history.losses.append(ae.loss_and_grad(X, onehot, mask)[0])
        history.reconstruction.append(float(((ae.reconstruct(X) - X) ** 2).mean()))

    record()
    for _ in range(epochs):
        for idx in minibatches(X.shape[0], batch_size, rng):
            loss, grads = ae.loss_and_grad(X[idx], onehot[idx], mask[idx])
            if not np.isfinite(loss):
                raise NumericError("autoencoder loss became non-finite")
            opt.step(params, grads, labels)
        record()
    return ae, history


@dataclass
class CardinalityRegressor:
    coefficients: np.ndarray
    intercept: float
    n_labels: int

    def predict_raw(self, codes) -> np.ndarray:
        return np.atleast_2d(codes) @ self.coefficients + self.intercept

    def predict(self, codes) -> np.ndarray:
        return np.clip(self.predict_raw(codes), 1.0, float(self.n_labels))


def fit_regressor(codes, counts, n_labels: int, ridge: float = 1e-6) -> CardinalityRegressor:
    """Least squares of ``counts`` on ``codes`` with an unpenalized intercept.

    Solved as an augmented least-squares problem rather than via the normal
    equations, which keeps the conditioning of the code matrix rather than
    squaring it.
    """
    A = np.atleast_2d(np.asarray(codes, dtype=np.float64))
    t = np.asarray(counts, dtype=np.float64)
    n, b = A.shape
    if t.shape != (n,):
        raise ShapeError("one count per code row is required")
    if n == 0:
        raise InputError("no instances to fit the cardinality regressor")
    mu = A.mean(axis=0)
    t_mu = t.mean()
    Ac = A - mu
    if ridge > 0:
        Ac_aug = np.vstack([Ac, np.sqrt(ridge) * np.eye(b)])
        t_aug = np.concatenate([t - t_mu, np.zeros(b)])
    else:
        if np.linalg.matrix_rank(Ac) < b:
            raise NumericError("code matrix is rank deficient; enable ridge regularization")
        Ac_aug, t_aug = Ac, t - t_mu
    coef, *_ = np.linalg.lstsq(Ac_aug, t_aug, rcond=None)
    return CardinalityRegressor(coef, float(t_mu - mu @ coef), int(n_labels))


def predict_mhat(reg: CardinalityRegressor, ae: Autoencoder, x) -> np.ndarray:
    return reg.predict(ae.encode(x))


class FuzzifierEstimator:
    """Autoencoder followed by the cardinality regressor; call :meth:`fit` then :meth:`predict`."""

    def __init__(self, eta=1.0, hidden=256, bottleneck=64, epochs=50, batch_size=128,
                 learning_rate=1e-3, ridge=1e-6):
        self.eta = eta
        self.hidden = hidden
        self.bottleneck = bottleneck
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.ridge = ridge
        self.autoencoder: Autoencoder | None = None
        self.regressor: CardinalityRegressor | None = None
        self.history: AutoencoderHistory | None = None

    def fit(self, X, Y, seed=0) -> "FuzzifierEstimator":
        Y = np.asarray(Y)
        self.autoencoder, self.history = train_autoencoder(
            X, Y, self.eta, seed, hidden=self.hidden, bottleneck=self.bottleneck,
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate)
        counts = Y.sum(axis=1)
        keep = counts >= 1
        if not keep.any():
            raise InputError("every training instance has zero labels")
        codes = self.autoencoder.encode(np.asarray(X)[keep])
        self.regressor = fit_regressor(codes, counts[keep], Y.shape[1], self.ridge)
        return self

    def predict(self, X) -> np.ndarray:
        if self.autoencoder is None or self.regressor is None:
            raise StateError("estimator is not fitted")
        return predict_mhat(self.regressor, self.autoencoder, X)
