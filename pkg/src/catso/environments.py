"""Classification datasets replayed as budgeted-reveal bandit environments.

Every event carries a full feature row and a label. The policy sees the
observed features for free, may reveal up to ``budget`` feature groups
through a :class:`RevealSession`, and then commits to one arm; the reward is
1 when the arm equals the label.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    BudgetError,
    MissingFileError,
    NonNumericCellError,
    RaggedRowError,
    SchemaError,
    SessionStateError,
    UnknownLabelError,
)
from .feature_attention import FeatureGroupSchema

# salts keep the per-purpose generators derived from one seed independent
_SPLIT, _NONSTATIONARY, _SYNTH = 11, 13, 17


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5 + 1e-9))


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    schema: FeatureGroupSchema
    name: str = "dataset"
    class_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise SchemaError("features must be T x N with one label per row")
        if self.schema.n_features != self.features.shape[1]:
            raise SchemaError("schema does not match the feature count")
        if not self.class_names:
            k = int(self.labels.max()) + 1 if self.labels.size else 0
            object.__setattr__(self, "class_names", tuple(str(i) for i in range(k)))
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def n_events(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def with_schema(self, schema: FeatureGroupSchema) -> "LabeledDataset":
        return replace(self, schema=schema)

    def take(self, rows: Sequence[int]) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=np.intp)
        return replace(self, features=self.features[rows].copy(), labels=self.labels[rows].copy())


@dataclass
class DatasetSpec:
    """Optional expectations checked while loading a CSV."""

    n_features: int | None = None
    n_classes: int | None = None
    labels: Sequence[str] | None = None
    groups_path: str | Path | None = None


def load_csv(path, label_column: str, schema_spec: DatasetSpec | None = None, name: str | None = None) -> LabeledDataset:
    """Read a headed CSV, min-max scale every feature column to [0, 1].

    Constant columns map to 0. Labels are taken verbatim as strings; classes
    are ordered numerically when every label parses as a number, otherwise
    lexically, unless ``schema_spec.labels`` fixes the order.
    """
    path = Path(path)
    spec = schema_spec or DatasetSpec()
    if not path.is_file():
        raise MissingFileError(f"no such data file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise RaggedRowError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise SchemaError(f"{path}: no label column {label_column!r}")
        li = header.index(label_column)
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, 2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise RaggedRowError(f"{path}:{lineno}: expected {len(header)} cells, found {len(row)}")
            raw_labels.append(row[li].strip())
            cells = row[:li] + row[li + 1:]
            try:
                values = [float(c) for c in cells]
            except ValueError:
                bad = next(c for c in cells if not _is_float(c))
                raise NonNumericCellError(f"{path}:{lineno}: non-numeric cell {bad!r}") from None
            if not all(math.isfinite(v) for v in values):
                raise NonNumericCellError(f"{path}:{lineno}: missing or infinite value")
            rows.append(values)

    if not rows:
        raise RaggedRowError(f"{path}: no data rows")
    X = np.asarray(rows, dtype=np.float64)
    lo, hi = X.min(axis=0), X.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    X = np.where(hi > lo, (X - lo) / span, 0.0)

    if spec.labels is not None:
        classes = [str(c) for c in spec.labels]
        unknown = sorted(set(raw_labels) - set(classes))
        if unknown:
            raise UnknownLabelError(f"{path}: labels outside the declared set: {unknown[:5]}")
    else:
        if any(not lab for lab in raw_labels):
            raise UnknownLabelError(f"{path}: empty label cell")
        classes = sorted(set(raw_labels), key=_label_key)
    index = {c: i for i, c in enumerate(classes)}
    y = np.array([index[lab] for lab in raw_labels], dtype=np.intp)
    if len(classes) < 2:
        raise UnknownLabelError(f"{path}: need at least two classes")

    if spec.n_features is not None and X.shape[1] != spec.n_features:
        raise SchemaError(f"{path}: expected {spec.n_features} features, found {X.shape[1]}")
    if spec.n_classes is not None and len(classes) != spec.n_classes:
        raise SchemaError(f"{path}: expected {spec.n_classes} classes, found {len(classes)}")
    if spec.groups_path is not None:
        gp = Path(spec.groups_path)
        if not gp.is_file():
            raise MissingFileError(f"no such schema file: {gp}")
        schema = FeatureGroupSchema.from_text(gp.read_text(), X.shape[1])
    else:
        schema = FeatureGroupSchema.singletons(X.shape[1])
    return LabeledDataset(X, y, schema, name or path.stem, tuple(classes))


def _is_float(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _label_key(label: str):
    try:
        return (0, float(label), label)
    except ValueError:
        return (1, 0.0, label)


def write_csv(dataset: LabeledDataset, path, label_column: str = "label") -> Path:
    """Write features plus label column; also ``<stem>.groups`` with the schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(dataset.n_features)] + [label_column])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [dataset.class_names[lab]])
    path.with_suffix(".groups").write_text(dataset.schema.to_text())
    return path


def split_known(dataset: LabeledDataset, fraction: float, seed: int) -> FeatureGroupSchema:
    """Pick ``round(fraction * N)`` free features; the rest become singleton groups."""
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"known fraction must lie in [0, 1), got {fraction}")
    n = dataset.n_features
    rng = np.random.default_rng([seed, _SPLIT])
    observed = rng.choice(n, size=round_half_up(fraction * n), replace=False)
    return FeatureGroupSchema.singletons(n, observed.tolist())


def make_nonstationary(dataset: LabeledDataset, seed: int) -> LabeledDataset:
    """Drift the unknown-feature/label relation away from the observed features.

    A shuffled copy moves each event's (unknown features, label) pair to a
    random other event while observed features stay put. Event ``t`` of ``T``
    (1-based) is then swapped for its shuffled counterpart with probability
    ``t / T``.
    """
    rng = np.random.default_rng([seed, _NONSTATIONARY])
    T = dataset.n_events
    perm = rng.permutation(T)
    replace_mask = rng.random(T) < np.arange(1, T + 1) / T
    unknown = np.setdiff1d(np.arange(dataset.n_features), dataset.schema.observed)
    X = dataset.features.copy()
    y = dataset.labels.copy()
    rows = np.flatnonzero(replace_mask)
    X[np.ix_(rows, unknown)] = dataset.features[np.ix_(perm[rows], unknown)]
    y[rows] = dataset.labels[perm[rows]]
    return replace(dataset, features=X, labels=y, name=dataset.name)


def synth_skills(
    n_events: int,
    n_skills: int,
    group_sizes: Sequence[int],
    query_dim: int,
    seed: int,
    topics_per_skill: int = 3,
    query_noise: float = 0.5,
    fallback_rate: float = 0.8,
) -> LabeledDataset:
    """Synthetic skill-orchestration data with one feature group per skill.

    The label is the correct skill. Query features (observed) are noisy
    samples around a per-(skill, topic) centre, so they only partly identify
    the skill. Each skill's group holds a confidence value that is high when
    that skill is correct, followed by a one-hot intent block of
    ``size - 1`` entries. The correct skill answers with the intent tied to
    the query topic; any other skill answers with its fallback intent (entry
    0) with probability ``fallback_rate`` and a random intent otherwise.
    """
    group_sizes = [int(s) for s in group_sizes]
    if n_skills < 2 or len(group_sizes) != n_skills or any(s < 1 for s in group_sizes):
        raise ValueError("need >= 2 skills and one positive group size per skill")
    if query_dim < 1 or n_events < 1:
        raise ValueError("query_dim and n_events must be positive")
    rng = np.random.default_rng([seed, _SYNTH])
    n = query_dim + sum(group_sizes)
    centres = rng.random((n_skills, topics_per_skill, query_dim))
    labels = rng.integers(0, n_skills, n_events)
    topics = rng.integers(0, topics_per_skill, n_events)
    X = np.zeros((n_events, n))
    X[:, :query_dim] = np.clip(
        centres[labels, topics] + query_noise * rng.standard_normal((n_events, query_dim)), 0.0, 1.0
    )
    groups, start = [], query_dim
    for g, size in enumerate(group_sizes):
        groups.append(tuple(range(start, start + size)))
        correct = labels == g
        conf = np.where(correct, rng.normal(0.7, 0.15, n_events), rng.normal(0.3, 0.15, n_events))
        X[:, start] = np.clip(conf, 0.0, 1.0)
        n_intents = size - 1
        if n_intents:
            topic_intent = rng.integers(min(1, n_intents - 1), n_intents, topics_per_skill)
            stray = np.where(rng.random(n_events) < fallback_rate, 0, rng.integers(0, n_intents, n_events))
            intent = np.where(correct, topic_intent[topics], stray)
            X[np.arange(n_events), start + 1 + intent] = 1.0
        start += size
    schema = FeatureGroupSchema(
        n, tuple(range(query_dim)), tuple(groups), tuple(f"skill{g + 1}" for g in range(n_skills))
    )
    names = tuple(f"skill{g + 1}" for g in range(n_skills))
    return LabeledDataset(X, labels.astype(np.intp), schema, "synth_skills", names)


class RevealSession:
    """One event's budget-enforced view of the context.

    Observed features are free. Each unknown group may be revealed once
    counted against ``budget``; repeating a reveal returns the cached values.
    ``commit_arm`` returns the reward and closes the session.
    """

    def __init__(self, t: int, row: np.ndarray, label: int, schema: FeatureGroupSchema, budget: int):
        if budget < 0 or budget > schema.n_groups:
            raise BudgetError(f"budget {budget} outside [0, {schema.n_groups}]")
        self.t = t
        self.schema = schema
        self.budget = budget
        self._row = row
        self._label = int(label)
        self._revealed: dict[int, np.ndarray] = {}
        self._committed = False
        obs = np.asarray(schema.observed, dtype=np.intp)
        self._observed = row[obs].copy()
        self._observed.setflags(write=False)

    @property
    def observed_indices(self) -> tuple[int, ...]:
        return self.schema.observed

    @property
    def observed_values(self) -> np.ndarray:
        return self._observed

    @property
    def revealed(self) -> tuple[int, ...]:
        return tuple(self._revealed)

    @property
    def remaining(self) -> int:
        return self.budget - len(self._revealed)

    @property
    def committed(self) -> bool:
        return self._committed

    def reveal(self, group: int) -> np.ndarray:
        if self._committed:
            raise SessionStateError("reveal after the arm was committed")
        if not 0 <= group < self.schema.n_groups:
            raise IndexError(f"unknown group index {group}")
        if group in self._revealed:
            return self._revealed[group]
        if len(self._revealed) >= self.budget:
            raise BudgetError(f"event {self.t}: reveal budget of {self.budget} groups exhausted")
        values = self._row[np.asarray(self.schema.groups[group])].copy()
        values.setflags(write=False)
        self._revealed[group] = values
        return values

    def commit_arm(self, k: int) -> int:
        if self._committed:
            raise SessionStateError("arm already committed for this event")
        k = int(k)
        if k < 0:
            raise IndexError(f"invalid arm {k}")
        self._committed = True
        return int(k == self._label)


def next_session(dataset: LabeledDataset, order: Sequence[int] | None, t: int, budget: int) -> RevealSession:
    i = int(order[t]) if order is not None else t
    return RevealSession(t, dataset.features[i], dataset.labels[i], dataset.schema, budget)
