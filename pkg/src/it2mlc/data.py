"""Dataset loading, splitting, normalization and statistics.

Supported inputs: MULAN/MEKA-style ARFF (dense and sparse rows), pairs of
CSV files (features, binary labels), and plain-text split index files with
one integer per line.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import re
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import InputError, ParseError, ShapeError
from .numerics import make_rng


@dataclass(frozen=True)
class Dataset:
    name: str
    X: np.ndarray
    Y: np.ndarray
    feature_names: tuple[str, ...] = ()
    label_names: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict)
    original_splits: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        Y = np.asarray(self.Y)
        if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
            raise ShapeError(f"features {X.shape} and labels {Y.shape} do not line up")
        if not np.all((Y == 0) | (Y == 1)):
            raise InputError("labels must be binary")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y.astype(np.int64))
        if not self.feature_names:
            object.__setattr__(self, "feature_names", tuple(f"f{i}" for i in range(X.shape[1])))
        if not self.label_names:
            object.__setattr__(self, "label_names", tuple(f"label{j}" for j in range(Y.shape[1])))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def n_labels(self) -> int:
        return self.Y.shape[1]

    def subset(self, idx, name: str | None = None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, name=name or self.name, X=self.X[idx], Y=self.Y[idx], original_splits={})


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


# --------------------------------------------------------------------- ARFF

_NUMERIC_TYPES = {"numeric", "real", "integer"}


@dataclass
class _Attribute:
    name: str
    kind: str                      # "numeric" or "nominal"
    values: tuple[str, ...] = ()


def _split_name(rest: str, path, lineno):
    rest = rest.strip()
    if rest[:1] in ("'", '"'):
        q = rest[0]
        end = rest.find(q, 1)
        while end > 0 and rest[end - 1] == "\\":
            end = rest.find(q, end + 1)
        if end < 0:
            raise ParseError("unterminated quoted attribute name", path, lineno)
        return rest[1:end], rest[end + 1:].strip()
    parts = rest.split(None, 1)
    if len(parts) < 2:
        raise ParseError("attribute declaration without a type", path, lineno)
    return parts[0], parts[1].strip()


def _parse_attribute(line, path, lineno) -> _Attribute:
    name, typ = _split_name(line[len("@attribute"):], path, lineno)
    if typ.startswith("{"):
        if not typ.endswith("}"):
            raise ParseError("unterminated nominal value list", path, lineno)
        vals = tuple(v.strip().strip("'\"") for v in typ[1:-1].split(","))
        return _Attribute(name, "nominal", vals)
    if typ.lower() in _NUMERIC_TYPES:
        return _Attribute(name, "numeric")
    raise ParseError(f"unsupported attribute type {typ!r}", path, lineno)


def _split_row(row: str):
    if "'" not in row and '"' not in row:
        return [v.strip() for v in row.split(",")]
    quote = "'" if "'" in row else '"'
    return [v.strip() for v in next(csv.reader([row], quotechar=quote, skipinitialspace=True))]


def _meka_label_count(relation: str):
    m = re.search(r"-C\s+(-?\d+)", relation)
    return int(m.group(1)) if m else None


def _locate_labels(attrs, labels, label_location, relation, path):
    names = [a.name for a in attrs]
    n_attr = len(attrs)
    if labels is None:
        c = _meka_label_count(relation)
        if c is None:
            raise ParseError("label attributes unspecified and no '-C n' in the relation name", path)
        labels, label_location = abs(c), "start" if c > 0 else "end"
    if isinstance(labels, (int, np.integer)):
        c = int(labels)
        if not 0 < c < n_attr:
            raise ParseError(f"label count {c} does not fit {n_attr} attributes", path)
        return list(range(c)) if label_location == "start" else list(range(n_attr - c, n_attr))
    idx = []
    for lab in labels:
        if lab not in names:
            raise ParseError(f"label attribute {lab!r} not declared", path)
        idx.append(names.index(lab))
    return idx


def parse_arff(path, labels: int | Sequence[str] | None = None, label_location: str = "end",
               name: str | None = None) -> Dataset:
    """Read an ARFF file into a :class:`Dataset`.

    ``labels`` selects the label attributes: a list of attribute names, or a
    count of trailing (``label_location="end"``) or leading attributes. When
    omitted, a MEKA ``-C n`` option in the relation name is honoured.
    Label attributes must take values 0/1; anything else, missing values and
    ragged rows raise :class:`ParseError` with the offending line.
    """
    path = Path(path)
    attrs: list[_Attribute] = []
    relation = ""
    rows: list[tuple[int, str]] = []
    in_data = False
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                rows.append((lineno, line))
                continue
            low = line.lower()
            if low.startswith("@relation"):
                relation = line[len("@relation"):].strip()
            elif low.startswith("@attribute"):
                attrs.append(_parse_attribute(line, path, lineno))
            elif low.startswith("@data"):
                in_data = True
            else:
                raise ParseError(f"unexpected header line {line[:40]!r}", path, lineno)
    if not in_data:
        raise ParseError("no @data section", path)
    if not attrs:
        raise ParseError("no attributes declared", path)

    label_idx = _locate_labels(attrs, labels, label_location, relation, path)
    label_set = set(label_idx)
    feat_idx = [i for i in range(len(attrs)) if i not in label_set]
    for i in label_idx:
        a = attrs[i]
        if a.kind == "nominal" and not set(a.values) <= {"0", "1"}:
            raise ParseError(f"label attribute {a.name!r} is not binary: {a.values}", path)
    for i in feat_idx:
        if attrs[i].kind != "numeric":
            raise ParseError(f"nominal feature attribute {attrs[i].name!r} is not supported", path)

    n_attr = len(attrs)
    values = np.zeros((len(rows), n_attr))
    is_label = np.zeros(n_attr, dtype=bool)
    is_label[label_idx] = True

    def convert(tok, col, lineno):
        if tok == "?":
            raise ParseError(f"missing value in attribute {attrs[col].name!r}", path, lineno)
        tok = tok.strip("'\"")
        if is_label[col]:
            if tok not in ("0", "1", "0.0", "1.0"):
                raise ParseError(f"non-binary label value {tok!r} for {attrs[col].name!r}", path, lineno)
            return float(tok)
        try:
            return float(tok)
        except ValueError:
            raise ParseError(f"non-numeric value {tok!r} for {attrs[col].name!r}", path, lineno) from None

    for r, (lineno, line) in enumerate(rows):
        if line.startswith("{"):
            if not line.endswith("}"):
                raise ParseError("unterminated sparse row", path, lineno)
            body = line[1:-1].strip()
            if not body:
                continue
            for entry in body.split(","):
                parts = entry.split()
                if len(parts) != 2:
                    raise ParseError(f"malformed sparse entry {entry.strip()!r}", path, lineno)
                try:
                    col = int(parts[0])
                except ValueError:
                    raise ParseError(f"bad sparse index {parts[0]!r}", path, lineno) from None
                if not 0 <= col < n_attr:
                    raise ParseError(f"sparse index {col} out of range", path, lineno)
                values[r, col] = convert(parts[1], col, lineno)
        else:
            toks = _split_row(line)
            if len(toks) != n_attr:
                raise ParseError(f"row has {len(toks)} values, expected {n_attr}", path, lineno)
            values[r] = [convert(t, c, lineno) for c, t in enumerate(toks)]

    return Dataset(
        name=name or path.stem,
        X=values[:, feat_idx],
        Y=values[:, label_idx],
        feature_names=tuple(attrs[i].name for i in feat_idx),
        label_names=tuple(attrs[i].name for i in label_idx),
        provenance={"files": [str(path)], "sha256": [_sha256(path)]},
    )


def concat(parts: dict[str, Dataset], name: str) -> Dataset:
    """Stack datasets and remember each part's rows as an original split."""
    items = list(parts.items())
    first = items[0][1]
    for key, ds in items[1:]:
        if ds.feature_names != first.feature_names or ds.label_names != first.label_names:
            raise InputError(f"split {key!r} has different attributes from {items[0][0]!r}")
    splits, start = {}, 0
    for key, ds in items:
        splits[key] = np.arange(start, start + ds.n)
        start += ds.n
    prov = {"files": [f for _, ds in items for f in ds.provenance.get("files", [])],
            "sha256": [h for _, ds in items for h in ds.provenance.get("sha256", [])]}
    return Dataset(name, np.vstack([ds.X for _, ds in items]), np.vstack([ds.Y for _, ds in items]),
                   first.feature_names, first.label_names, prov, splits)


# ---------------------------------------------------------------------- CSV

def _read_numeric_csv(path, header: bool, binary: bool):
    path = Path(path)
    names, rows = None, []
    with open(path, newline="", encoding="utf-8") as fh:
        for lineno, rec in enumerate(csv.reader(fh), 1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if header and names is None:
                names = tuple(c.strip() for c in rec)
                continue
            try:
                vals = [float(c) for c in rec]
            except ValueError:
                bad = next(c for c in rec if not _is_float(c))
                raise ParseError(f"non-numeric cell {bad!r}", path, lineno) from None
            if rows and len(vals) != len(rows[0][1]):
                raise ParseError(f"row has {len(vals)} cells, expected {len(rows[0][1])}", path, lineno)
            if binary and any(v not in (0.0, 1.0) for v in vals):
                bad = next(v for v in vals if v not in (0.0, 1.0))
                raise ParseError(f"non-binary label value {bad:g}", path, lineno)
            rows.append((lineno, vals))
    return names, np.array([v for _, v in rows], dtype=np.float64)


def _is_float(s):
    try:
        float(s)
        return True
    except ValueError:
        return False


def parse_csv(features_path, labels_path, header: bool = False, name: str | None = None) -> Dataset:
    fnames, X = _read_numeric_csv(features_path, header, binary=False)
    lnames, Y = _read_numeric_csv(labels_path, header, binary=True)
    if X.shape[0] != Y.shape[0]:
        raise ParseError(f"{X.shape[0]} feature rows but {Y.shape[0]} label rows", labels_path)
    return Dataset(
        name=name or Path(features_path).stem,
        X=X, Y=Y,
        feature_names=fnames or (), label_names=lnames or (),
        provenance={"files": [str(features_path), str(labels_path)],
                    "sha256": [_sha256(features_path), _sha256(labels_path)]},
    )


def load_split_indices(path) -> np.ndarray:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(int(line))
            except ValueError:
                raise ParseError(f"not an integer index: {line!r}", path, lineno) from None
    return np.array(out, dtype=np.int64)


# ------------------------------------------------------------------ splits

@dataclass(frozen=True)
class SplitSpec:
    mode: str = "original"                          # "original" or "random"
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 0
    # original mode without a shipped validation split carves this share of train
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.mode not in ("original", "random"):
            raise InputError(f"split mode must be 'original' or 'random', got {self.mode!r}")
        fr = tuple(float(f) for f in self.fractions)
        if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise InputError(f"split fractions must be three non-negative numbers summing to 1, got {fr}")
        object.__setattr__(self, "fractions", fr)
        if not 0 <= self.val_fraction < 1:
            raise InputError("val_fraction must lie in [0, 1)")


def split_indices(n: int, spec: SplitSpec, original: dict | None = None):
    if spec.mode == "random":
        perm = make_rng(spec.seed).permutation(n)
        n_train = int(round(spec.fractions[0] * n))
        n_val = int(round(spec.fractions[1] * n))
        return perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:]
    original = original or {}
    missing = [k for k in ("train", "test") if k not in original]
    if missing:
        raise InputError(f"original split mode but no {'/'.join(missing)} split is available")
    train = np.asarray(original["train"], dtype=np.int64)
    test = np.asarray(original["test"], dtype=np.int64)
    if "val" in original:
        return train, np.asarray(original["val"], dtype=np.int64), test
    perm = make_rng(spec.seed).permutation(train.size)
    n_val = int(round(spec.val_fraction * train.size))
    return np.sort(train[perm[n_val:]]), np.sort(train[perm[:n_val]]), test


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    tr, va, te = split_indices(ds.n, spec, ds.original_splits)
    return (ds.subset(tr, f"{ds.name}/train"), ds.subset(va, f"{ds.name}/val"),
            ds.subset(te, f"{ds.name}/test"))


# ------------------------------------------------------------ normalization

@dataclass(frozen=True)
class Scaler:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, X) -> "Scaler":
        X = np.asarray(X, dtype=np.float64)
        if X.shape[0] == 0:
            raise InputError("cannot fit a scaler on an empty split")
        return cls(X.mean(axis=0), X.std(axis=0))

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        live = self.std > 0
        out = np.zeros_like(X)
        out[:, live] = (X[:, live] - self.mean[live]) / self.std[live]
        return out


def normalize(train: Dataset, *others: Dataset):
    """Z-score every split with the training statistics. Returns ``([train, *others], scaler)``."""
    scaler = Scaler.fit(train.X)
    return [replace(ds, X=scaler.transform(ds.X)) for ds in (train, *others)], scaler


# -------------------------------------------------------------------- stats

@dataclass(frozen=True)
class DatasetStats:
    n_samples: int
    n_labels: int
    feature_dim: int
    mean_labels_per_sample: float
    mean_samples_per_label: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def stats(ds: Dataset) -> DatasetStats:
    total = int(ds.Y.sum())
    return DatasetStats(ds.n, ds.n_labels, ds.d, total / ds.n if ds.n else 0.0,
                        total / ds.n_labels if ds.n_labels else 0.0)


def check_expected(st: DatasetStats, expected: dict, mean_tol: float = 0.01) -> list[str]:
    """Mismatches between computed statistics and an expectation dict (empty when all agree)."""
    problems = []
    for key in ("n_samples", "n_labels", "feature_dim"):
        if expected.get(key) is not None and getattr(st, key) != expected[key]:
            problems.append(f"{key}: got {getattr(st, key)}, expected {expected[key]}")
    exp = expected.get("mean_labels_per_sample")
    if exp is not None and abs(st.mean_labels_per_sample - exp) > mean_tol:
        problems.append(f"mean_labels_per_sample: got {st.mean_labels_per_sample:.4f}, expected {exp}")
    return problems


# -------------------------------------------------------------------- cache

_CACHE_MAGIC = b"IT2MLC\x00\x01"


def save_cache(ds: Dataset, path) -> None:
    """Binary cache: magic, JSON header, row-major float64 X then Y, SHA-256 of all prior bytes."""
    header = json.dumps({
        "name": ds.name, "n": ds.n, "d": ds.d, "L": ds.n_labels,
        "feature_names": list(ds.feature_names), "label_names": list(ds.label_names),
        "provenance": ds.provenance,
        "original_splits": {k: np.asarray(v).tolist() for k, v in ds.original_splits.items()},
    }).encode()
    buf = io.BytesIO()
    buf.write(_CACHE_MAGIC)
    buf.write(struct.pack("<Q", len(header)))
    buf.write(header)
    buf.write(np.ascontiguousarray(ds.X, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(ds.Y, dtype="<f8").tobytes())
    body = buf.getvalue()
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load_cache(path) -> Dataset:
    raw = Path(path).read_bytes()
    body, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise ParseError("cache checksum mismatch", path)
    if not body.startswith(_CACHE_MAGIC):
        raise ParseError("not a dataset cache file", path)
    off = len(_CACHE_MAGIC)
    (hlen,) = struct.unpack_from("<Q", body, off)
    off += 8
    h = json.loads(body[off:off + hlen])
    off += hlen
    n, d, L = h["n"], h["d"], h["L"]
    X = np.frombuffer(body, dtype="<f8", count=n * d, offset=off).reshape(n, d).astype(np.float64)
    off += 8 * n * d
    Y = np.frombuffer(body, dtype="<f8", count=n * L, offset=off).reshape(n, L)
    return Dataset(h["name"], X, Y, tuple(h["feature_names"]), tuple(h["label_names"]),
                   h["provenance"], {k: np.array(v, dtype=np.int64) for k, v in h["original_splits"].items()})


# --------------------------------------------------------- dataset registry

@dataclass
class DatasetSpec:
    """Where a dataset lives and what it should look like once loaded.

    Paths are relative to the data directory. ``files`` maps split names
    ("train", "test", optionally "val") to ARFF files, or is a list of files
    to stack without split information. CSV datasets use ``features`` and
    ``labels`` plus optional ``split_files`` (split name to index file).
    """

    name: str
    format: str = "arff"
    files: dict | list = field(default_factory=dict)
    labels: int | list | None = None
    label_location: str = "end"
    features: str | None = None
    label_file: str | None = None
    header: bool = False
    split_files: dict = field(default_factory=dict)
    expected: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSpec":
        return cls(**d)


KNOWN_DATASETS = {
    "scene": DatasetSpec(
        "scene", files={"train": "scene-train.arff", "test": "scene-test.arff"}, labels=6,
        expected={"n_samples": 2407, "n_labels": 6, "feature_dim": 294, "mean_labels_per_sample": 1.07}),
    # label/feature counts for these two depend on the distribution; set them in the config
    "mirflickr": DatasetSpec(
        "mirflickr", format="csv", features="mirflickr-features.csv", label_file="mirflickr-labels.csv",
        split_files={"train": "mirflickr-train.txt", "val": "mirflickr-val.txt", "test": "mirflickr-test.txt"},
        expected={"n_samples": 25000}),
    "nus-wide": DatasetSpec(
        "nus-wide", files=["nus-wide-train.arff", "nus-wide-test.arff"],
        expected={"n_samples": 269648}),
}


def default_data_dir() -> Path:
    return Path(os.environ.get("IT2MLC_DATA_DIR", "data"))


def resolve_spec(dataset: str | dict | DatasetSpec) -> DatasetSpec:
    if isinstance(dataset, DatasetSpec):
        return dataset
    if isinstance(dataset, dict):
        return DatasetSpec.from_dict(dataset)
    if dataset in KNOWN_DATASETS:
        return KNOWN_DATASETS[dataset]
    p = Path(dataset)
    if p.suffix.lower() == ".arff":
        return DatasetSpec(p.stem, files=[str(p)])
    raise InputError(f"unknown dataset {dataset!r}; use a registered name, an .arff path or a spec dict")


def load_dataset(dataset: str | dict | DatasetSpec, data_dir=None) -> Dataset:
    spec = resolve_spec(dataset)
    root = Path(data_dir) if data_dir is not None else default_data_dir()

    def where(rel):
        p = Path(rel)
        return p if p.is_absolute() else root / p

    if spec.format == "arff":
        files = spec.files if isinstance(spec.files, dict) else dict(enumerate(spec.files))
        if not files:
            raise InputError(f"dataset {spec.name!r} lists no files")
        for k, v in files.items():
            if not where(v).exists():
                raise InputError(f"dataset {spec.name!r}: file for part {k!r} not found at {where(v)}")
        parts = {str(k): parse_arff(where(v), spec.labels, spec.label_location) for k, v in files.items()}
        ds = concat(parts, spec.name)
        if not isinstance(spec.files, dict):
            ds = replace(ds, original_splits={})
    elif spec.format == "csv":
        if spec.features is None or spec.label_file is None:
            raise InputError("csv datasets need 'features' and 'label_file'")
        ds = parse_csv(where(spec.features), where(spec.label_file), spec.header, spec.name)
    else:
        raise InputError(f"unknown dataset format {spec.format!r}")
    if spec.split_files:
        splits = {k: load_split_indices(where(v)) for k, v in spec.split_files.items()
                  if where(v).exists()}
        ds = replace(ds, original_splits=splits)
    return ds
