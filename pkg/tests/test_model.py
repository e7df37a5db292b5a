import numpy as np
import pytest

from it2mlc.errors import InputError, StateError
from it2mlc.harness import gradient_checks
from it2mlc.it2 import predicted_cardinality
from it2mlc.metrics import example_f1
from it2mlc.model import (
    BinaryRelevance,
    FuzzinessInitializer,
    It2Classifier,
    ModelParams,
    load_bundle,
    predict_from_memberships,
    save_bundle,
)
from it2mlc.numerics import grad_check, make_rng

SMALL = dict(hidden=(32,), ae_hidden=32, bottleneck=8, epochs=40, ae_epochs=40, patience=10)


@pytest.fixture(scope="module")
def fitted(separable):
    ds = separable
    return It2Classifier(ModelParams()).fit(ds.X[:150], ds.Y[:150], ds.X[150:], ds.Y[150:], seed=0)


def test_defaults():
    p = ModelParams()
    assert p.hidden == (512, 512) and p.activation == "relu"
    assert (p.optimizer, p.learning_rate, p.batch_size, p.epochs, p.patience) == ("adam", 1e-3, 128, 100, 10)
    assert (p.eta, p.lam, p.bottleneck, p.ridge) == (1.0, 0.1, 64, 1e-6)


@pytest.mark.parametrize("bad", [{"mode": "fuzzy"}, {"lam": -1}, {"eta": -1}, {"type1_threshold": "x"}])
def test_param_validation(bad):
    with pytest.raises(InputError):
        ModelParams(**bad)


def test_params_round_trip():
    p = ModelParams(hidden=(8, 4), mode="type1")
    assert ModelParams.from_dict(p.to_dict()) == p
    with pytest.raises(InputError):
        ModelParams.from_dict({"depth": 3})


@pytest.mark.parametrize("mode", ["it2", "type1"])
def test_initializer_gradient_through_head(mode):
    # interval (or type-1) loss backpropagated through the membership head and trunk, 5 instances
    rng = make_rng(11)
    net = FuzzinessInitializer.build(4, 3, rng, hidden=(6,), activation="tanh")
    X = 0.5 * rng.standard_normal((5, 4))
    Y = np.array([[1, 0, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1], [0, 0, 0]])
    m_hat = rng.uniform(1, 3, 5)
    _, grads = net.loss_and_grad(X, Y, m_hat, mode)
    report = grad_check(net.parameters(), lambda: net.loss_and_grad(X, Y, m_hat, mode)[0], grads,
                        labels=net.param_labels())
    assert report.passed, report.lines()


def test_zero_label_rows_do_not_contribute_in_it2_mode():
    rng = make_rng(1)
    net = FuzzinessInitializer.build(3, 2, rng, hidden=(4,))
    X = rng.standard_normal((3, 3))
    Y = np.array([[1, 0], [0, 1], [0, 0]])
    m = np.array([1.2, 1.7, 1.0])
    full, _ = net.loss_and_grad(X, Y, m)
    part, _ = net.loss_and_grad(X[:2], Y[:2], m[:2])
    assert full == part


def test_it2_predictions_have_predicted_cardinality(rng):
    y = rng.random((20, 5))
    m = rng.uniform(0.5, 6, 20)
    pred = predict_from_memberships(y, m, "it2", 0.1)
    np.testing.assert_array_equal(pred.y_hat.sum(1), predicted_cardinality(m, 5))


def test_fit_and_predict(fitted, separable):
    ds = separable
    pred = fitted.predict(ds.X[150:])
    assert pred.y_hat.shape == (50, 3)
    assert example_f1(pred.y_hat, ds.Y[150:]) > 0.9
    assert 0 <= fitted.history.best_epoch < 100
    assert np.all((fitted.memberships(ds.X) >= 0) & (fitted.memberships(ds.X) <= 1))


def test_training_reduces_loss(fitted):
    losses = fitted.history.train_loss
    assert min(losses) < losses[0]


def test_fit_is_deterministic(separable):
    ds = separable
    params = ModelParams(**{**SMALL, "epochs": 5, "ae_epochs": 5})
    a = It2Classifier(params).fit(ds.X, ds.Y, seed=3)
    b = It2Classifier(params).fit(ds.X, ds.Y, seed=3)
    pa, pb = a.to_arrays()[0], b.to_arrays()[0]
    assert pa.keys() == pb.keys() and all(np.array_equal(pa[k], pb[k]) for k in pa)


def test_unfitted():
    with pytest.raises(StateError):
        It2Classifier().predict(np.zeros((1, 3)))
    with pytest.raises(InputError):
        It2Classifier().fit(np.zeros((0, 3)), np.zeros((0, 2)))


def test_bundle_round_trip(fitted, separable, tmp_path):
    path = tmp_path / "m.npz"
    save_bundle(path, fitted, {"config_hash": "abc", "seed": 0})
    model, meta = load_bundle(path)
    assert meta["config_hash"] == "abc" and meta["bundle_version"] == 1
    X = separable.X
    np.testing.assert_array_equal(model.memberships(X), fitted.memberships(X))
    np.testing.assert_array_equal(model.predict_mhat(X), fitted.predict_mhat(X))
    np.testing.assert_array_equal(model.predict(X).y_hat, fitted.predict(X).y_hat)


def test_type1_mode_runs(separable):
    ds = separable
    model = It2Classifier(ModelParams(**{**SMALL, "mode": "type1", "epochs": 10})).fit(ds.X, ds.Y, seed=0)
    pred = model.predict(ds.X)
    assert set(np.unique(pred.y_hat)) <= {0, 1}


def test_binary_relevance(separable):
    ds = separable
    br = BinaryRelevance(epochs=50).fit(ds.X, ds.Y, seed=0)
    assert example_f1(br.predict(ds.X), ds.Y) > 0.5
    p = br.predict_proba(ds.X)
    assert np.all((p > 0) & (p < 1))


def test_all_gradient_checks_pass():
    report = gradient_checks(seed=0)
    failed = {k: r.lines() for k, r in report.items() if not r.passed}
    assert not failed
