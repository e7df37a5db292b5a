"""Experiment orchestration: multi-seed runs, lambda sweeps, ablations, reports."""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import (
    Dataset,
    SplitSpec,
    check_expected,
    load_dataset,
    normalize,
    resolve_spec,
    split,
    stats,
)
from .errors import InputError
from .metrics import METRIC_NAMES, MetricsReport, delta_m, evaluate
from .model import BinaryRelevance, It2Classifier, ModelParams, predict_from_memberships

log = logging.getLogger(__name__)

METRIC_LABELS = {"example_f1": "example-F1", "micro_f1": "micro-F1", "macro_f1": "macro-F1", "ha": "HA"}


@dataclass
class ExperimentConfig:
    dataset: str | dict = "scene"
    data_dir: str | None = None
    split: SplitSpec = field(default_factory=SplitSpec)
    model: ModelParams = field(default_factory=ModelParams)
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    normalize: bool = True
    validate: bool = True
    literal_micro: bool = False
    macro_empty: float = 1.0
    # eta = 0 removes the cardinality term; only allowed as an explicit diagnostic
    allow_zero_eta: bool = False

    def __post_init__(self):
        if isinstance(self.split, dict):
            self.split = SplitSpec(**{**self.split, "fractions": tuple(self.split.get("fractions", (0.8, 0.1, 0.1)))})
        if isinstance(self.model, dict):
            self.model = ModelParams.from_dict(self.model)
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise InputError("at least one seed is required")
        if self.model.eta == 0 and not self.allow_zero_eta:
            raise InputError("eta must be positive (set allow_zero_eta for the eta = 0 diagnostic)")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise InputError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        split_d = asdict(self.split)
        split_d["fractions"] = list(self.split.fractions)
        return {
            "dataset": self.dataset, "data_dir": self.data_dir, "split": split_d,
            "model": self.model.to_dict(), "seeds": list(self.seeds), "normalize": self.normalize,
            "validate": self.validate, "literal_micro": self.literal_micro,
            "macro_empty": self.macro_empty, "allow_zero_eta": self.allow_zero_eta,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def with_model(self, **changes) -> "ExperimentConfig":
        return replace(self, model=replace(self.model, **changes))

    @property
    def dataset_name(self) -> str:
        if isinstance(self.dataset, str):
            try:
                return resolve_spec(self.dataset).name
            except InputError:
                return self.dataset
        return resolve_spec(self.dataset).name


@dataclass
class RunRecord:
    config_hash: str
    dataset: str
    mode: str
    reports: list[MetricsReport] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    duration_s: float = 0.0
    lam: float | None = None

    def mean(self) -> dict[str, float]:
        if not self.reports:
            raise InputError("record holds no per-seed reports")
        return {m: float(np.mean([r.get(m) for r in self.reports])) for m in METRIC_NAMES}

    def std(self) -> dict[str, float]:
        if not self.reports:
            raise InputError("record holds no per-seed reports")
        return {m: float(np.std([r.get(m) for r in self.reports])) for m in METRIC_NAMES}

    def summary(self) -> dict:
        return {"kind": "summary", "config_hash": self.config_hash, "dataset": self.dataset,
                "mode": self.mode, "lambda": self.lam, "mean": self.mean(), "std": self.std(),
                "failures": self.failures, "duration_s": self.duration_s}


@dataclass
class SeedResult:
    seed: int
    report: MetricsReport
    model: It2Classifier
    memberships: np.ndarray
    m_hat: np.ndarray
    Y_test: np.ndarray


@dataclass
class PreparedData:
    train: Dataset
    val: Dataset
    test: Dataset


def prepare_data(cfg: ExperimentConfig, dataset: Dataset | None = None) -> PreparedData:
    ds = dataset if dataset is not None else load_dataset(cfg.dataset, cfg.data_dir)
    if cfg.validate and dataset is None:
        problems = check_expected(stats(ds), resolve_spec(cfg.dataset).expected)
        if problems:
            raise InputError(f"dataset {ds.name!r} does not match its expectation: " + "; ".join(problems))
    train, val, test = split(ds, cfg.split)
    if cfg.normalize:
        (train, val, test), _ = normalize(train, val, test)
    return PreparedData(train, val, test)


class _Stage:
    """Tracks which pipeline stage is running so failures can name it."""

    def __init__(self):
        self.name = "setup"

    def __call__(self, name):
        self.name = name
        return self


def evaluate_model(model: It2Classifier, test: Dataset, lam: float | None = None, seed: int = 0,
                   cfg: ExperimentConfig | None = None) -> MetricsReport:
    pred = model.predict(test.X, lam=lam)
    kw = {} if cfg is None else {"literal_micro": cfg.literal_micro, "macro_empty": cfg.macro_empty}
    return evaluate(pred.y_hat, test.Y, seed=seed, **kw)


def run_seed(cfg: ExperimentConfig, seed: int, data: PreparedData, stage: _Stage | None = None) -> SeedResult:
    stage = stage or _Stage()
    model = It2Classifier(cfg.model)
    est_seed, init_seed = np.random.SeedSequence(seed).spawn(2)
    stage("fuzzifier estimator")
    model.estimator = model._estimator().fit(data.train.X, data.train.Y, seed=est_seed)
    stage("fuzziness initializer")
    model.fit_initializer(data.train.X, data.train.Y, data.val.X, data.val.Y, seed=init_seed)
    stage("evaluation")
    y = model.memberships(data.test.X)
    m_hat = model.predict_mhat(data.test.X)
    pred = predict_from_memberships(y, m_hat, cfg.model.mode, cfg.model.lam, cfg.model.type1_threshold)
    report = evaluate(pred.y_hat, data.test.Y, seed=seed, literal_micro=cfg.literal_micro,
                      macro_empty=cfg.macro_empty)
    return SeedResult(seed, report, model, y, m_hat, data.test.Y)


def run_pipeline(cfg: ExperimentConfig, data: PreparedData | None = None,
                 keep: bool = False) -> RunRecord | tuple[RunRecord, list[SeedResult]]:
    """Train and evaluate one model per seed.

    A failing seed is recorded in ``failures`` with the stage it died in;
    the remaining seeds still run. With ``keep=True`` the per-seed results
    (models, test memberships) are returned alongside the record.
    """
    t0 = time.perf_counter()
    data = data or prepare_data(cfg)
    record = RunRecord(cfg.config_hash(), cfg.dataset_name, cfg.model.mode, lam=cfg.model.lam)
    results = []
    for seed in cfg.seeds:
        stage = _Stage()
        try:
            res = run_seed(cfg, seed, data, stage)
        except Exception as exc:  # one bad seed must not sink the others
            log.warning("seed %d failed during %s: %s", seed, stage.name, exc)
            record.failures.append({"seed": seed, "stage": stage.name,
                                    "error": type(exc).__name__, "message": str(exc)})
            continue
        log.info("seed %d: %s", seed, res.report)
        record.reports.append(res.report)
        results.append(res)
    record.duration_s = time.perf_counter() - t0
    return (record, results) if keep else record


@dataclass
class SweepResult:
    lambdas: list[float]
    records: dict[float, RunRecord]
    deltas: dict[str, dict[float, float]]   # metric -> lambda -> delta

    def table(self) -> str:
        head = f"{'lambda':>8} " + " ".join(f"{METRIC_LABELS[m]:>11} {'dM':>8}" for m in METRIC_NAMES)
        lines = [head]
        for lam in self.lambdas:
            mean = self.records[lam].mean()
            lines.append(f"{lam:>8.3f} " + " ".join(
                f"{mean[m]:>11.4f} {self.deltas[m][lam]:>8.4f}" for m in METRIC_NAMES))
        return "\n".join(lines)


def lambda_sweep(cfg: ExperimentConfig, lambdas: Sequence[float],
                 results: list[SeedResult] | None = None, data: PreparedData | None = None) -> SweepResult:
    """Re-defuzzify trained models under each lambda; no retraining happens."""
    lambdas = [float(x) for x in lambdas]
    if not lambdas:
        raise InputError("lambda sweep needs at least one value")
    if any(x < 0 for x in lambdas):
        raise InputError("lambda must be non-negative")
    if results is None:
        _, results = run_pipeline(cfg, data=data, keep=True)
    if not results:
        raise InputError("no successful seeds to sweep")
    records = {}
    for lam in lambdas:
        rec = RunRecord(cfg.config_hash(), cfg.dataset_name, "it2", lam=lam)
        for res in results:
            pred = predict_from_memberships(res.memberships, res.m_hat, "it2", lam)
            rec.reports.append(evaluate(pred.y_hat, res.Y_test, seed=res.seed,
                                        literal_micro=cfg.literal_micro, macro_empty=cfg.macro_empty))
        records[lam] = rec
    deltas = {m: delta_m({lam: records[lam].mean()[m] for lam in lambdas}) for m in METRIC_NAMES}
    return SweepResult(lambdas, records, deltas)


@dataclass
class AblationResult:
    it2: RunRecord
    type1: RunRecord

    @property
    def deltas(self) -> dict[str, float]:
        a, b = self.it2.mean(), self.type1.mean()
        return {m: a[m] - b[m] for m in METRIC_NAMES}

    def table(self) -> str:
        lines = [f"{'method':>8} " + " ".join(f"{METRIC_LABELS[m]:>11}" for m in METRIC_NAMES)]
        for name, rec in (("type-1", self.type1), ("type-2", self.it2)):
            mean = rec.mean()
            lines.append(f"{name:>8} " + " ".join(f"{mean[m]:>11.4f}" for m in METRIC_NAMES))
        d = self.deltas
        lines.append(f"{'delta':>8} " + " ".join(f"{d[m]:>+11.4f}" for m in METRIC_NAMES))
        return "\n".join(lines)


def ablation(cfg: ExperimentConfig, data: PreparedData | None = None) -> AblationResult:
    """Same seeds and splits, once with the interval loss and once with the type-1 loss."""
    data = data or prepare_data(cfg)
    it2 = run_pipeline(cfg.with_model(mode="it2"), data=data)
    type1 = run_pipeline(cfg.with_model(mode="type1"), data=data)
    return AblationResult(it2, type1)


def run_baseline(cfg: ExperimentConfig, data: PreparedData | None = None) -> RunRecord:
    """Binary-relevance logistic baseline over the same seeds and splits."""
    t0 = time.perf_counter()
    data = data or prepare_data(cfg)
    record = RunRecord(cfg.config_hash(), cfg.dataset_name, "br")
    for seed in cfg.seeds:
        br = BinaryRelevance().fit(data.train.X, data.train.Y, seed=seed)
        record.reports.append(evaluate(br.predict(data.test.X), data.test.Y, seed=seed,
                                       literal_micro=cfg.literal_micro, macro_empty=cfg.macro_empty))
    record.duration_s = time.perf_counter() - t0
    return record


# ------------------------------------------------------------------ reports

def format_table(records: Sequence[RunRecord]) -> str:
    """Metric rows by dataset/mode columns, cells ``mean +/- std``."""
    if not records:
        raise InputError("nothing to tabulate")
    cols = [f"{r.dataset}[{r.mode}]" for r in records]
    width = max(17, *(len(c) for c in cols))
    lines = [f"{'metric':<11}" + "".join(f"{c:>{width + 2}}" for c in cols)]
    means = [r.mean() for r in records]
    stds = [r.std() for r in records]
    for m in METRIC_NAMES:
        cells = "".join(f"{f'{mu[m]:.4f} +/- {sd[m]:.4f}':>{width + 2}}" for mu, sd in zip(means, stds))
        lines.append(f"{METRIC_LABELS[m]:<11}" + cells)
    lines.append(f"{'seeds':<11}" + "".join(f"{len(r.reports):>{width + 2}}" for r in records))
    return "\n".join(lines)


def emit_report(record: RunRecord, path, fmt: str = "json-lines") -> Path:
    """Write a record as json-lines (one report per line plus a summary line) or a text table."""
    if not record.reports:
        raise InputError("cannot emit a record without per-seed reports")
    path = Path(path)
    if fmt == "json-lines":
        lines = [json.dumps({"kind": "report", "config_hash": record.config_hash, "dataset": record.dataset,
                             "mode": record.mode, "lambda": record.lam, **r.to_dict()}, sort_keys=True)
                 for r in record.reports]
        lines.append(json.dumps(record.summary(), sort_keys=True))
        text = "\n".join(lines) + "\n"
    elif fmt == "text-table":
        text = format_table([record]) + "\n"
    else:
        raise InputError(f"unknown report format {fmt!r}")
    try:
        if path.parent and not path.parent.exists():
            path.parent.mkdir(parents=True)
        path.write_text(text)
    except OSError as exc:
        raise InputError(f"cannot write report to {path}: {exc}") from exc
    return path


def read_report(path) -> RunRecord:
    record = None
    reports = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        if row.get("kind") == "report":
            reports.append(MetricsReport.from_dict(row))
        elif row.get("kind") == "summary":
            record = RunRecord(row["config_hash"], row["dataset"], row["mode"], failures=row["failures"],
                               duration_s=row["duration_s"], lam=row.get("lambda"))
    if record is None:
        raise InputError(f"{path} has no summary line")
    record.reports = reports
    return record


# ---------------------------------------------------------- gradient checks

def gradient_checks(seed: int = 0, tolerance: float = 1e-4) -> dict:
    """Finite-difference checks for every trainable piece on small random problems."""
    from .fuzzifier import Autoencoder, cardinality_one_hot
    from .membership import MembershipHead
    from .model import FuzzinessInitializer
    from .numerics import ACTIVATIONS, DenseNet, grad_check, make_rng

    rng = make_rng(seed)
    out = {}
    X = rng.standard_normal((5, 4))
    for tag in ACTIVATIONS:
        net = DenseNet.build([4, 6, 3], rng, hidden=tag, output=tag)
        target = rng.standard_normal((5, 3))

        def loss(net=net, target=target):
            return 0.5 * float(((net.predict(X) - target) ** 2).sum())

        grads, _ = net.backward(net.forward(X) - target)
        out[f"dense[{tag}]"] = grad_check(net.parameters(), loss, grads, tolerance, labels=net.param_labels())

    head = MembershipHead(0.1 * rng.standard_normal((3, 4)), 1.0 + 0.1 * rng.standard_normal(3))
    H = 0.3 * rng.standard_normal((5, 4))
    up = rng.standard_normal((5, 3))

    def head_loss():
        return float((head.apply(H) * up).sum())

    dw, da, dh = head.apply_grad(H, up)
    out["membership head"] = grad_check([head.weight, head.alpha, H], head_loss, [dw, da, dh], tolerance,
                                        labels=["weight", "alpha", "input"])

    Y = np.array([[1, 0, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1], [1, 1, 1]])
    for mode in ("it2", "type1"):
        net = FuzzinessInitializer.build(4, 3, rng, hidden=(8,))
        m_hat = 1.0 + 2.0 * rng.random(5)

        def pipe_loss(net=net, m_hat=m_hat, mode=mode):
            return net.loss_and_grad(X, Y, m_hat, mode)[0]

        _, grads = net.loss_and_grad(X, Y, m_hat, mode)
        out[f"initializer[{mode}]"] = grad_check(net.parameters(), pipe_loss, grads, tolerance,
                                                 labels=net.param_labels())

    ae = Autoencoder.build(4, 3, rng, hidden=6, bottleneck=2, eta=1.0)
    onehot, mask = cardinality_one_hot(Y)
    _, grads = ae.loss_and_grad(X, onehot, mask)
    out["autoencoder"] = grad_check(ae.parameters(), lambda: ae.loss_and_grad(X, onehot, mask)[0], grads,
                                    tolerance, labels=ae.param_labels())
    return out
