"""Domain types, CSV ingestion, normalization and stratified splitting."""

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ContractError, ParseError, SchemaError, StratificationError, VocabularyError
from .validation import check_label, check_labels, check_matrix, check_vector, derive_rng

DATASET_FORMAT = "xainudge.dataset/1"

TASK_KINDS = ("census", "recidivism", "bias", "toxicity", "synthetic")

GROUP_VOCAB = {
    "census": ("male", "female"),
    "recidivism": ("black", "white"),
    "bias": ("dem", "rep"),
    "toxicity": ("black", "white"),
}

EXPLANATION_KINDS = ("shapley", "lime", "augmented", "manipulated")


@dataclass(frozen=True)
class TaskInstance:
    id: str
    features: np.ndarray
    label: int
    group: str
    task_kind: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "features", check_vector(self.features, name="features"))
        object.__setattr__(self, "label", check_label(self.label))
        if self.task_kind not in TASK_KINDS:
            raise ContractError(f"unknown task_kind {self.task_kind!r}")

    @property
    def n(self):
        return self.features.shape[0]


@dataclass(frozen=True)
class Explanation:
    attributions: np.ndarray
    kind: str

    def __post_init__(self):
        object.__setattr__(self, "attributions", check_vector(self.attributions, name="attributions"))
        if self.kind not in EXPLANATION_KINDS:
            raise ContractError(f"unknown explanation kind {self.kind!r}")

    def __len__(self):
        return self.attributions.shape[0]


@dataclass(frozen=True)
class BehaviorRecord:
    instance: TaskInstance
    ai_label: int
    explanation: Explanation
    human_label: int
    participant: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ai_label", check_label(self.ai_label, "ai_label"))
        object.__setattr__(self, "human_label", check_label(self.human_label, "human_label"))
        if len(self.explanation) != self.instance.n:
            raise ContractError(
                f"explanation length {len(self.explanation)} != feature length {self.instance.n}"
            )


def records_to_arrays(records):
    """Stack behavior records into ``(X, y_m, E, y_h)`` arrays."""
    if not records:
        raise ContractError("records must be nonempty")
    n = records[0].instance.n
    if any(r.instance.n != n for r in records):
        raise ContractError("records have inconsistent feature dimension")
    X = np.stack([r.instance.features for r in records])
    E = np.stack([r.explanation.attributions for r in records])
    y_m = np.array([r.ai_label for r in records], dtype=np.int64)
    y_h = np.array([r.human_label for r in records], dtype=np.int64)
    return X, y_m, E, y_h


class MinMaxNormalizer(TransformerMixin, BaseEstimator):
    """Per-column min-max scaling to [0, 1]; zero-range columns map to 0.0."""

    def fit(self, X, y=None):
        X = check_matrix(X)
        self.data_min_ = X.min(axis=0)
        self.data_range_ = X.max(axis=0) - self.data_min_
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "data_min_")
        X = check_matrix(X, self.n_features_in_)
        safe = np.where(self.data_range_ > 0, self.data_range_, 1.0)
        out = (X - self.data_min_) / safe
        out[:, self.data_range_ == 0] = 0.0
        return out

    def to_dict(self):
        return {"min": self.data_min_.tolist(), "range": self.data_range_.tolist()}

    @classmethod
    def from_dict(cls, d):
        obj = cls()
        obj.data_min_ = np.asarray(d["min"], dtype=np.float64)
        obj.data_range_ = np.asarray(d["range"], dtype=np.float64)
        obj.n_features_in_ = obj.data_min_.shape[0]
        return obj


@dataclass(frozen=True)
class Dataset:
    """An immutable table of task instances sharing feature dimension ``n``.

    Rows are stored column-wise as arrays; ``instances`` materializes the
    per-row :class:`TaskInstance` view.
    """

    ids: tuple
    X: np.ndarray
    y: np.ndarray
    groups: tuple
    group_vocab: tuple
    task_kind: str = "synthetic"
    feature_names: tuple = ()
    split_seed: int = 0
    normalizer: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = check_matrix(self.X, name="features").copy()
        y = check_labels(self.y, "labels").copy()
        ids = tuple(str(i) for i in self.ids)
        groups = tuple(str(g) for g in self.groups)
        if not (len(ids) == X.shape[0] == y.shape[0] == len(groups)):
            raise ContractError("ids, features, labels and groups must have equal length")
        if len(set(ids)) != len(ids):
            raise ContractError("instance ids must be unique")
        vocab = tuple(self.group_vocab)
        unknown = sorted(set(groups) - set(vocab))
        if unknown:
            raise VocabularyError(f"group {unknown[0]!r} not in vocabulary {list(vocab)}")
        if self.task_kind not in TASK_KINDS:
            raise ContractError(f"unknown task_kind {self.task_kind!r}")
        X.setflags(write=False)
        y.setflags(write=False)
        names = tuple(self.feature_names) or tuple(f"f{i}" for i in range(X.shape[1]))
        if len(names) != X.shape[1]:
            raise ContractError("feature_names length must equal n")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_vocab", vocab)
        object.__setattr__(self, "feature_names", names)

    @property
    def n(self):
        return self.X.shape[1]

    def __len__(self):
        return self.X.shape[0]

    @property
    def instances(self):
        return [self.instance(i) for i in range(len(self))]

    def instance(self, i):
        return TaskInstance(self.ids[i], self.X[i], int(self.y[i]), self.groups[i], self.task_kind)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return replace(
            self,
            ids=tuple(self.ids[i] for i in indices),
            X=self.X[indices],
            y=self.y[indices],
            groups=tuple(self.groups[i] for i in indices),
        )

    def group_array(self):
        return np.asarray(self.groups)

    def to_dict(self):
        return {
            "format": DATASET_FORMAT,
            "task_kind": self.task_kind,
            "n": self.n,
            "feature_names": list(self.feature_names),
            "group_vocab": list(self.group_vocab),
            "split_seed": self.split_seed,
            "normalizer": self.normalizer,
            "meta": self.meta,
            "ids": list(self.ids),
            "groups": list(self.groups),
            "labels": self.y.tolist(),
            "features": self.X.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != DATASET_FORMAT:
            raise SchemaError(f"unsupported dataset format {d.get('format')!r}")
        X = np.asarray(d["features"], dtype=np.float64).reshape(len(d["ids"]), d["n"])
        return cls(
            ids=tuple(d["ids"]),
            X=X,
            y=np.asarray(d["labels"], dtype=np.int64),
            groups=tuple(d["groups"]),
            group_vocab=tuple(d["group_vocab"]),
            task_kind=d["task_kind"],
            feature_names=tuple(d["feature_names"]),
            split_seed=d["split_seed"],
            normalizer=d.get("normalizer", {}),
            meta=d.get("meta", {}),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class CsvSchema:
    """Column roles for :func:`load_csv`.

    ``label_map`` must be given whenever the raw label column is not already
    encoded as -1/+1 (e.g. ``{"0": -1, "1": 1}``); nothing is remapped implicitly.
    """

    feature_columns: list
    label_column: str
    group_column: str
    categorical_columns: list = field(default_factory=list)
    id_column: str = None
    label_map: dict = None
    group_vocab: list = None
    task_kind: str = "synthetic"

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(**d)
        except TypeError as exc:
            raise SchemaError(f"bad csv schema: {exc}") from None

    def vocabulary(self):
        if self.group_vocab:
            return tuple(self.group_vocab)
        if self.task_kind in GROUP_VOCAB:
            return GROUP_VOCAB[self.task_kind]
        raise SchemaError("group_vocab is required for synthetic task kinds")


def _parse_label(raw, label_map, row):
    if label_map is not None:
        if raw not in label_map:
            raise ParseError(f"row {row}: label {raw!r} missing from label_map")
        return check_label(label_map[raw])
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(f"row {row}: label {raw!r} is not numeric; supply label_map") from None
    if value not in (-1.0, 1.0):
        raise ParseError(f"row {row}: label {raw!r} is not -1/+1; supply label_map to remap it")
    return int(value)


def load_csv(path, schema):
    """Read a headed CSV into a normalized :class:`Dataset`.

    Categorical feature columns are one-hot encoded (sorted categories), then
    every encoded column is min-max scaled; the fitted parameters are stored
    in ``Dataset.normalizer`` for reuse on later data.
    """
    if isinstance(schema, dict):
        schema = CsvSchema.from_dict(schema)
    vocab = schema.vocabulary()
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        needed = list(schema.feature_columns) + [schema.label_column, schema.group_column]
        if schema.id_column:
            needed.append(schema.id_column)
        for col in needed:
            if col not in header:
                raise SchemaError(f"missing column {col!r} in {path}")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path} has no data rows")

    categorical = set(schema.categorical_columns)
    categories = {c: sorted({r[c] for r in rows}) for c in schema.feature_columns if c in categorical}
    names = []
    for col in schema.feature_columns:
        if col in categorical:
            names.extend(f"{col}={v}" for v in categories[col])
        else:
            names.append(col)

    raw = np.zeros((len(rows), len(names)))
    labels, groups, ids = [], [], []
    for i, r in enumerate(rows):
        j = 0
        for col in schema.feature_columns:
            if col in categorical:
                k = categories[col].index(r[col])
                raw[i, j + k] = 1.0
                j += len(categories[col])
                continue
            try:
                value = float(r[col])
            except ValueError:
                raise ParseError(f"row {i}: non-numeric value {r[col]!r} in column {col!r}") from None
            if not math.isfinite(value):
                raise ParseError(f"row {i}: non-finite value in column {col!r}")
            raw[i, j] = value
            j += 1
        labels.append(_parse_label(r[schema.label_column], schema.label_map, i))
        group = r[schema.group_column]
        if group not in vocab:
            raise VocabularyError(f"row {i}: group {group!r} not in vocabulary {list(vocab)}")
        groups.append(group)
        ids.append(r[schema.id_column] if schema.id_column else str(i))

    scaler = MinMaxNormalizer().fit(raw)
    normalizer = {"feature_names": names, "categories": categories, **scaler.to_dict()}
    return Dataset(
        ids=tuple(ids),
        X=scaler.transform(raw),
        y=np.asarray(labels),
        groups=tuple(groups),
        group_vocab=vocab,
        task_kind=schema.task_kind,
        feature_names=tuple(names),
        normalizer=normalizer,
    )


def _allocate(count, fractions):
    exact = [count * f for f in fractions]
    sizes = [math.floor(e) for e in exact]
    remainder = count - sum(sizes)
    order = sorted(range(len(fractions)), key=lambda k: (-(exact[k] - sizes[k]), k))
    for k in order[:remainder]:
        sizes[k] += 1
    return sizes


def split(dataset, fractions=(0.6, 0.2, 0.2), seed=0):
    """Stratified (by group) train/calibration/eval partition.

    Within each group the rows are shuffled with a seed-derived generator and
    cut by largest-remainder allocation, so every split holds its share of
    each group to within one instance.
    """
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ContractError("fractions must be three positive numbers")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ContractError(f"fractions must sum to 1, got {sum(fractions)!r}")
    groups = dataset.group_array()
    parts = [[], [], []]
    for g in dataset.group_vocab:
        members = np.flatnonzero(groups == g)
        if members.size == 0:
            continue
        members = members[derive_rng(seed, "split", g).permutation(members.size)]
        sizes = _allocate(members.size, fractions)
        if min(sizes) == 0:
            raise StratificationError(
                f"group {g!r} has {members.size} instances; some split would receive none"
            )
        start = 0
        for k, size in enumerate(sizes):
            parts[k].extend(members[start:start + size].tolist())
            start += size
    return tuple(replace(dataset.subset(sorted(p)), split_seed=seed) for p in parts)
