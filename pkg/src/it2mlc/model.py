"""The fuzziness initializer network and the full two-network classifier."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .errors import InputError, NumericError, ShapeError, StateError
from .fuzzifier import Autoencoder, CardinalityRegressor, FuzzifierEstimator
from .it2 import (
    DEFAULT_LAMBDA,
    Prediction,
    build_interval,
    defuzzify,
    derive_fuzzifiers,
    it2_loss_grad,
    predicted_cardinality,
    type1_binarize,
    type1_loss_grad,
)
from .membership import MembershipHead
from .metrics import example_f1
from .numerics import DenseNet, Layer, make_optimizer, make_rng, minibatches

MODES = ("it2", "type1")
BUNDLE_VERSION = 1


@dataclass
class ModelParams:
    hidden: tuple[int, ...] = (512, 512)
    activation: str = "relu"
    ae_hidden: int = 256
    bottleneck: int = 64
    eta: float = 1.0
    lam: float = DEFAULT_LAMBDA
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    patience: int = 10
    ae_epochs: int = 100
    ridge: float = 1e-6
    mode: str = "it2"
    # "mhat": type-1 threshold 1/round(m_hat); "labels": 1/L
    type1_threshold: str = "mhat"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.mode not in MODES:
            raise InputError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.lam < 0:
            raise InputError("lambda must be non-negative")
        if self.eta < 0:
            raise InputError("eta must be non-negative")
        if self.type1_threshold not in ("mhat", "labels"):
            raise InputError("type1_threshold must be 'mhat' or 'labels'")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown model settings: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


class FuzzinessInitializer:
    """Feedforward trunk with a :class:`MembershipHead` as its output layer."""

    def __init__(self, trunk: DenseNet | None, head: MembershipHead):
        if trunk is not None and trunk.n_out != head.d_in:
            raise ShapeError("trunk output does not match head input")
        self.trunk = trunk
        self.head = head

    @classmethod
    def build(cls, d: int, n_labels: int, rng, hidden=(512, 512), activation="relu"):
        hidden = tuple(hidden)
        trunk = None
        if hidden:
            trunk = DenseNet.build([d, *hidden], rng, hidden=activation, output=activation)
        head = MembershipHead.init(hidden[-1] if hidden else d, n_labels, rng)
        return cls(trunk, head)

    @property
    def n_labels(self) -> int:
        return self.head.n_labels

    def parameters(self):
        return (self.trunk.parameters() if self.trunk else []) + self.head.parameters()

    def param_labels(self):
        return (self.trunk.param_labels() if self.trunk else []) + self.head.param_labels()

    def get_state(self):
        return [p.copy() for p in self.parameters()]

    def set_state(self, state):
        for p, s in zip(self.parameters(), state, strict=True):
            p[...] = s

    def memberships(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        H = self.trunk.predict(X) if self.trunk else X
        return self.head.apply(H)

    def loss_and_grad(self, X, Y, m_hat, mode="it2"):
        """Batch loss and parameter gradients with the fuzzifiers held fixed.

        In it2 mode, rows without any positive label are dropped: their
        fuzzifiers are undefined and their loss is identically zero.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
        H = self.trunk.forward(X) if self.trunk else X
        y = self.head.apply(H)
        gy = np.zeros_like(y)
        if mode == "it2":
            card = Y.sum(axis=1)
            keep = card >= 1
            if keep.any():
                pair = derive_fuzzifiers(np.asarray(m_hat)[keep], card[keep], self.n_labels)
                loss, g = it2_loss_grad(y[keep], Y[keep], pair)
                gy[keep] = g
            else:
                loss = 0.0
        elif mode == "type1":
            loss, gy = type1_loss_grad(y, Y)
        else:
            raise InputError(f"unknown mode {mode!r}")
        d_w, d_alpha, d_h = self.head.apply_grad(H, gy)
        grads = [d_w, d_alpha]
        if self.trunk:
            trunk_grads, _ = self.trunk.backward(d_h)
            grads = trunk_grads + grads
        return loss, grads


def predict_from_memberships(y, m_hat, mode="it2", lam=DEFAULT_LAMBDA,
                             type1_threshold="mhat") -> Prediction:
    """Binary predictions from type-1 memberships and cardinality estimates."""
    y = np.atleast_2d(y)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    if mode == "it2":
        L = y.shape[1]
        pair = derive_fuzzifiers(m_hat, predicted_cardinality(m_hat, L), L)
        return defuzzify(build_interval(y, pair), m_hat, lam)
    if mode == "type1":
        return type1_binarize(y, m_hat, total_labels=type1_threshold == "labels")
    raise InputError(f"unknown mode {mode!r}")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_example_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1


def train_initializer(net: FuzzinessInitializer, X, Y, m_hat, params: ModelParams, rng,
                      X_val=None, Y_val=None, m_hat_val=None) -> TrainHistory:
    """Minibatch training; with a validation split, keeps the best-example-F1 epoch."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y)
    m_hat = np.asarray(m_hat, dtype=np.float64)
    opt = make_optimizer(params.optimizer, params.learning_rate)
    plist, labels = net.parameters(), net.param_labels()
    history = TrainHistory()
    use_val = X_val is not None and len(X_val) > 0
    best_score, best_state, stale = -np.inf, None, 0
    for epoch in range(params.epochs):
        total, count = 0.0, 0
        for idx in minibatches(X.shape[0], params.batch_size, rng):
            loss, grads = net.loss_and_grad(X[idx], Y[idx], m_hat[idx], params.mode)
            if not np.isfinite(loss):
                raise NumericError(f"initializer loss became non-finite at epoch {epoch}")
            opt.step(plist, grads, labels)
            total += loss * len(idx)
            count += len(idx)
        history.train_loss.append(total / count)
        if not use_val:
            continue
        pred = predict_from_memberships(net.memberships(X_val), m_hat_val, params.mode,
                                        params.lam, params.type1_threshold)
        score = example_f1(pred.y_hat, Y_val)
        history.val_example_f1.append(score)
        if score >= best_score:
            best_score, best_state, stale = score, net.get_state(), 0
            history.best_epoch = epoch
        else:
            stale += 1
            if stale >= params.patience:
                break
    if best_state is not None:
        net.set_state(best_state)
    else:
        history.best_epoch = len(history.train_loss) - 1
    return history


class It2Classifier:
    """Two-network multi-label classifier.

    Stages, in order: fit the fuzzifier estimator (autoencoder plus
    cardinality regressor), freeze it, then train the fuzziness initializer
    under the interval loss (or the type-1 loss in ``mode="type1"``).
    """

    def __init__(self, params: ModelParams | None = None):
        self.params = params or ModelParams()
        self.estimator: FuzzifierEstimator | None = None
        self.initializer: FuzzinessInitializer | None = None
        self.history: TrainHistory | None = None

    def _estimator(self):
        p = self.params
        return FuzzifierEstimator(eta=p.eta, hidden=p.ae_hidden, bottleneck=p.bottleneck,
                                  epochs=p.ae_epochs, batch_size=p.batch_size,
                                  learning_rate=p.learning_rate, ridge=p.ridge)

    def fit(self, X, Y, X_val=None, Y_val=None, seed: int = 0) -> "It2Classifier":
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y)
        if X.shape[0] == 0:
            raise InputError("empty training split")
        est_seed, init_seed = np.random.SeedSequence(seed).spawn(2)
        self.estimator = self._estimator().fit(X, Y, seed=est_seed)
        self.fit_initializer(X, Y, X_val, Y_val, seed=init_seed)
        return self

    def fit_initializer(self, X, Y, X_val=None, Y_val=None, seed=0) -> "It2Classifier":
        """Retrain only the initializer against the current (frozen) estimator."""
        if self.estimator is None:
            raise StateError("fit the fuzzifier estimator first")
        rng = make_rng(seed)
        p = self.params
        self.initializer = FuzzinessInitializer.build(X.shape[1], Y.shape[1], rng, p.hidden, p.activation)
        m_val = self.estimator.predict(X_val) if X_val is not None and len(X_val) else None
        self.history = train_initializer(self.initializer, X, Y, self.estimator.predict(X), p, rng,
                                         X_val, Y_val, m_val)
        return self

    def _require_fit(self):
        if self.estimator is None or self.initializer is None:
            raise StateError("classifier is not fitted")

    def memberships(self, X) -> np.ndarray:
        self._require_fit()
        return self.initializer.memberships(X)

    def predict_mhat(self, X) -> np.ndarray:
        self._require_fit()
        return self.estimator.predict(X)

    def predict(self, X, lam: float | None = None) -> Prediction:
        p = self.params
        return predict_from_memberships(self.memberships(X), self.predict_mhat(X), p.mode,
                                        p.lam if lam is None else lam, p.type1_threshold)

    # serialization ---------------------------------------------------------

    def to_arrays(self) -> tuple[dict, dict]:
        self._require_fit()
        ae = self.estimator.autoencoder
        reg = self.estimator.regressor
        arrays, meta = {}, {"params": self.params.to_dict()}
        nets = {"trunk": self.initializer.trunk, "encoder": ae.encoder, "decoder": ae.decoder}
        meta["activations"] = {}
        for name, net in nets.items():
            if net is None:
                meta["activations"][name] = None
                continue
            meta["activations"][name] = [layer.activation for layer in net.layers]
            for k, layer in enumerate(net.layers):
                arrays[f"{name}.{k}.weight"] = layer.weight
                arrays[f"{name}.{k}.bias"] = layer.bias
        arrays["head.weight"] = self.initializer.head.weight
        arrays["head.alpha"] = self.initializer.head.alpha
        arrays["card_head.weight"] = ae.head_weight
        arrays["card_head.bias"] = ae.head_bias
        arrays["regressor.coefficients"] = reg.coefficients
        meta["regressor"] = {"intercept": reg.intercept, "n_labels": reg.n_labels}
        meta["eta"] = ae.eta
        return arrays, meta

    @classmethod
    def from_arrays(cls, arrays, meta) -> "It2Classifier":
        model = cls(ModelParams.from_dict(meta["params"]))

        def net(name):
            tags = meta["activations"][name]
            if tags is None:
                return None
            return DenseNet([Layer(arrays[f"{name}.{k}.weight"], arrays[f"{name}.{k}.bias"], t)
                             for k, t in enumerate(tags)])

        model.initializer = FuzzinessInitializer(
            net("trunk"), MembershipHead(arrays["head.weight"], arrays["head.alpha"]))
        est = model._estimator()
        est.autoencoder = Autoencoder(net("encoder"), net("decoder"), arrays["card_head.weight"],
                                      arrays["card_head.bias"], meta["eta"])
        est.regressor = CardinalityRegressor(np.array(arrays["regressor.coefficients"]),
                                             float(meta["regressor"]["intercept"]),
                                             int(meta["regressor"]["n_labels"]))
        model.estimator = est
        return model


def save_bundle(path, model: It2Classifier, extra: dict | None = None) -> None:
    """Write a versioned ``.npz`` model bundle; ``extra`` lands in the JSON metadata."""
    arrays, meta = model.to_arrays()
    meta = {"bundle_version": BUNDLE_VERSION, **meta, **(extra or {})}
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8),
                 **arrays)


def load_bundle(path) -> tuple[It2Classifier, dict]:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(bytes(z["__meta__"]).decode())
        if meta.get("bundle_version") != BUNDLE_VERSION:
            raise InputError(f"unsupported bundle version {meta.get('bundle_version')!r}")
        arrays = {k: z[k] for k in z.files if k != "__meta__"}
    return It2Classifier.from_arrays(arrays, meta), meta


class BinaryRelevance:
    """Independent per-label logistic regressions, thresholded at 0.5.

    A reference point for the larger datasets, not a tuned baseline.
    """

    def __init__(self, epochs=100, learning_rate=1e-2, batch_size=128):
        self.epochs = epochs
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.net: DenseNet | None = None

    def fit(self, X, Y, seed=0) -> "BinaryRelevance":
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        rng = make_rng(seed)
        self.net = DenseNet.build([X.shape[1], Y.shape[1]], rng, output="linear")
        opt = make_optimizer("adam", self.learning_rate)
        for _ in range(self.epochs):
            for idx in minibatches(X.shape[0], self.batch_size, rng):
                z = self.net.forward(X[idx])
                p = 0.5 * (1.0 + np.tanh(0.5 * z))
                grads, _ = self.net.backward((p - Y[idx]) / len(idx))
                opt.step(self.net.parameters(), grads, self.net.param_labels())
        return self

    def predict_proba(self, X) -> np.ndarray:
        if self.net is None:
            raise StateError("baseline is not fitted")
        z = self.net.predict(np.atleast_2d(X))
        return 0.5 * (1.0 + np.tanh(0.5 * z))

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X) >= 0.5).astype(np.int64)
