"""Datasets, preprocessing, cross-validation splits and synthetic benchmarks.

A :class:`Dataset` is a time-ordered table. Every row is one forecast sample
with a single ground truth shared by all leadtimes. What a member sees for
leadtime ``t`` is the row's *frame*: the static feature columns, the value
of each leadtime feature at ``t``, and (for persistence-style inputs) the
targets observed at issue time, ``horizon(t)`` rows earlier. Lags and
horizons are counted in rows, so the series is assumed regularly sampled.
"""

import csv
import json
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DatasetNotFound,
    EmptyFitSet,
    LeadtimeOutOfRange,
    NonPositiveMax,
    ParseError,
    SchemaMismatch,
    ShiftTooLarge,
    TimestampOrderError,
    TooFewGroups,
    TooFewSamples,
    TransformError,
)

ISSUE_SUFFIX = "@issue"
MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass(frozen=True)
class LeadtimeFrame:
    """Leadtimes ``t = 0..K`` look ``k_min + t * delta`` rows ahead."""

    k_min: int
    k_max: int
    delta: int = 1

    def __post_init__(self):
        if self.delta < 1 or self.k_max < self.k_min or self.k_min < 0:
            raise ConfigError(f"invalid leadtime frame {self}")
        if (self.k_max - self.k_min) % self.delta:
            raise ConfigError(f"k_max - k_min must be a multiple of delta in {self}")

    @property
    def n_leadtimes(self):
        return (self.k_max - self.k_min) // self.delta + 1

    def horizon(self, t):
        return self.k_min + t * self.delta


@dataclass(frozen=True)
class FeatureTransform:
    """Per-column standardization statistics."""

    names: tuple
    mean: tuple
    std: tuple

    def to_dict(self):
        return {"names": list(self.names), "mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["names"]), tuple(d["mean"]), tuple(d["std"]))


@dataclass(frozen=True, eq=False)
class Dataset:
    features: np.ndarray  # N x F
    targets: np.ndarray  # N x M (one-hot for classification)
    feature_names: tuple = ()
    target_names: tuple = ()
    timestamps: np.ndarray | None = None
    sample_ids: np.ndarray | None = None
    group_ids: np.ndarray | None = None
    leadtime_features: np.ndarray | None = None  # N x T x G
    leadtime_feature_names: tuple = ()
    frame: LeadtimeFrame | None = None
    persistence: bool = False
    task: str = "regression"
    classes: tuple = ()
    aux: dict = field(default_factory=dict)
    feature_transform: FeatureTransform | None = None
    target_scale: float | None = None
    dropped_rows: int = 0

    def __post_init__(self):
        n = len(self.targets)
        if self.features.shape[0] != n:
            raise SchemaMismatch("features and targets differ in length")
        if self.timestamps is None:
            object.__setattr__(self, "timestamps", np.arange(n, dtype=np.float64))
        if self.sample_ids is None:
            object.__setattr__(self, "sample_ids", np.array([str(i) for i in range(n)], dtype=object))
        if self.persistence and self.frame is None:
            raise ConfigError("persistence inputs need a leadtime frame")
        if self.leadtime_features is not None and self.leadtime_features.shape[1] != self.n_leadtimes:
            raise SchemaMismatch(
                f"leadtime features cover {self.leadtime_features.shape[1]} leadtimes, "
                f"frame has {self.n_leadtimes}"
            )

    # -- shape ---------------------------------------------------------------
    @property
    def n_samples(self):
        return len(self.targets)

    @property
    def n_targets(self):
        return self.targets.shape[1]

    @property
    def n_leadtimes(self):
        return self.frame.n_leadtimes if self.frame is not None else 1

    @property
    def labels(self):
        return np.argmax(self.targets, axis=1)

    @property
    def issue_columns(self):
        if not self.persistence:
            return []
        return [f"{name}{ISSUE_SUFFIX}" for name in self.target_names]

    @property
    def input_columns(self):
        """Frame columns excluding issue-time targets."""
        return list(self.feature_names) + list(self.leadtime_feature_names)

    @property
    def frame_columns(self):
        return self.input_columns + self.issue_columns

    def first_valid_row(self, max_lag=0):
        """First row whose frames exist at every leadtime for lags up to ``max_lag``."""
        history = self.frame.horizon(self.n_leadtimes - 1) if self.persistence else 0
        return history + int(max_lag)

    def valid_rows(self, max_lag=0):
        return np.arange(min(self.first_valid_row(max_lag), self.n_samples), self.n_samples)

    # -- frames --------------------------------------------------------------
    def inputs(self, rows, t, columns=None):
        """Member input matrix for ``rows`` at leadtime ``t``."""
        rows = np.asarray(rows, dtype=np.int64)
        if not 0 <= t < self.n_leadtimes:
            raise LeadtimeOutOfRange(f"leadtime {t} outside 0..{self.n_leadtimes - 1}")
        columns = self.frame_columns if columns is None else columns
        out = np.empty((len(rows), len(columns)), dtype=np.float64)
        if len(rows) and rows.min() < 0:
            raise TooFewSamples("frame requested before the start of the series")
        for c, name in enumerate(columns):
            out[:, c] = self._column(name, rows, t)
        return out

    def _column(self, name, rows, t):
        if name in self.feature_names:
            return self.features[rows, self.feature_names.index(name)]
        if name in self.leadtime_feature_names:
            return self.leadtime_features[rows, t, self.leadtime_feature_names.index(name)]
        if name.endswith(ISSUE_SUFFIX) and self.persistence:
            target = name[: -len(ISSUE_SUFFIX)]
            if target in self.target_names:
                src = rows - self.frame.horizon(t)
                if len(src) and src.min() < 0:
                    raise TooFewSamples(f"issue-time target for {name} lies before the series start")
                return self.targets[src, self.target_names.index(target)]
        raise SchemaMismatch(f"unknown frame column {name!r}")

    def select(self, rows):
        """New dataset holding only ``rows`` (in the given order)."""
        rows = np.asarray(rows, dtype=np.int64)
        return replace(
            self,
            features=self.features[rows],
            targets=self.targets[rows],
            timestamps=self.timestamps[rows],
            sample_ids=self.sample_ids[rows],
            group_ids=None if self.group_ids is None else self.group_ids[rows],
            leadtime_features=None if self.leadtime_features is None else self.leadtime_features[rows],
            aux={k: v[rows] for k, v in self.aux.items()},
        )


# -- schema & CSV ------------------------------------------------------------


@dataclass
class Schema:
    """Column roles of a dataset CSV, stored as a JSON document."""

    features: list = field(default_factory=list)
    targets: list = field(default_factory=list)
    timestamp: str | None = None
    id: str | None = None
    group: str | None = None
    leadtime_features: dict = field(default_factory=dict)
    leadtime_frame: dict | None = None
    persistence: bool = False
    target_max: float | None = None
    task: str = "regression"
    label: str | None = None
    classes: list = field(default_factory=list)
    aux: list = field(default_factory=list)

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown schema keys: {sorted(unknown)}")
        s = cls(**d)
        if s.task not in ("regression", "classification"):
            raise ConfigError(f"task must be regression or classification, got {s.task!r}")
        if s.task == "classification":
            if not s.label or not s.classes:
                raise ConfigError("classification schema needs 'label' and 'classes'")
        elif not s.targets:
            raise ConfigError("regression schema needs at least one target column")
        return s

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"schema not found: {path}")
        try:
            return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def frame_obj(self):
        if self.leadtime_frame is None:
            return None
        f = self.leadtime_frame
        return LeadtimeFrame(int(f["k_min"]), int(f["k_max"]), int(f.get("delta", 1)))


def _parse_timestamp(text):
    try:
        return float(int(text))
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    ts = datetime.fromisoformat(text.replace("Z", "+00:00"))
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.timestamp()


def load_csv(path, schema):
    """Parse a dataset CSV according to ``schema`` (a :class:`Schema` or path).

    Rows with missing values are dropped and counted in ``dropped_rows``;
    malformed cells raise :class:`ParseError` naming line and column.
    """
    path = Path(path)
    if not path.exists():
        raise DatasetNotFound(f"dataset not found: {path}")
    if not isinstance(schema, Schema):
        schema = Schema.load(schema)
    frame = schema.frame_obj()
    lt_names = list(schema.leadtime_features)
    T = frame.n_leadtimes if frame else 1
    for name, cols in schema.leadtime_features.items():
        if len(cols) != T:
            raise SchemaMismatch(f"leadtime feature {name!r} lists {len(cols)} columns, frame has {T}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        pos = {h: i for i, h in enumerate(header)}
        numeric = list(schema.features) + [c for cols in schema.leadtime_features.values() for c in cols]
        numeric += list(schema.aux)
        if schema.task == "regression":
            numeric += list(schema.targets)
        required = numeric + [c for c in (schema.timestamp, schema.id, schema.group, schema.label) if c]
        absent = [c for c in required if c not in pos]
        if absent:
            raise SchemaMismatch(f"{path}: columns missing from header: {absent}")
        num_vals, ts_vals, ids, groups, labels = [], [], [], [], []
        dropped = 0
        class_index = {str(c): i for i, c in enumerate(schema.classes)}
        for line_no, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            cells = [row[pos[c]].strip() for c in required]
            if any(c.lower() in MISSING_TOKENS for c in cells):
                dropped += 1
                continue
            vals = []
            for c in numeric:
                text = row[pos[c]].strip()
                try:
                    v = float(text)
                except ValueError:
                    raise ParseError(f"{path}:{line_no}: column {c!r}: {text!r} is not a number") from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}:{line_no}: column {c!r}: non-finite value {text!r}")
                vals.append(v)
            num_vals.append(vals)
            if schema.timestamp:
                text = row[pos[schema.timestamp]].strip()
                try:
                    ts_vals.append(_parse_timestamp(text))
                except ValueError:
                    raise ParseError(f"{path}:{line_no}: column {schema.timestamp!r}: bad timestamp {text!r}") from None
            if schema.id:
                ids.append(row[pos[schema.id]].strip())
            if schema.group:
                groups.append(row[pos[schema.group]].strip())
            if schema.label:
                text = row[pos[schema.label]].strip()
                if text not in class_index:
                    raise ParseError(f"{path}:{line_no}: label {text!r} not among classes {list(schema.classes)}")
                labels.append(class_index[text])
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} rows with missing values", stacklevel=2)
    n = len(num_vals)
    if n == 0:
        raise ParseError(f"{path}: no data rows")
    arr = np.array(num_vals, dtype=np.float64).reshape(n, len(numeric))
    F = len(schema.features)
    features = arr[:, :F]
    col = F
    lt = None
    if lt_names:
        lt = np.empty((n, T, len(lt_names)))
        for g in range(len(lt_names)):
            lt[:, :, g] = arr[:, col:col + T]
            col += T
    aux = {name: arr[:, col + i].copy() for i, name in enumerate(schema.aux)}
    col += len(schema.aux)
    if schema.task == "regression":
        targets = arr[:, col:col + len(schema.targets)]
        target_names = tuple(schema.targets)
    else:
        targets = np.eye(len(schema.classes))[np.array(labels, dtype=int)]
        target_names = tuple(str(c) for c in schema.classes)
    timestamps = np.array(ts_vals) if schema.timestamp else None
    if timestamps is not None and np.any(np.diff(timestamps) < 0):
        bad = int(np.argmax(np.diff(timestamps) < 0)) + 1
        raise TimestampOrderError(f"{path}: timestamps decrease at data row {bad + 1}")
    ds = Dataset(
        features=np.ascontiguousarray(features),
        targets=np.ascontiguousarray(targets),
        feature_names=tuple(schema.features),
        target_names=target_names,
        timestamps=timestamps,
        sample_ids=np.array(ids, dtype=object) if schema.id else None,
        group_ids=np.array(groups, dtype=object) if schema.group else None,
        leadtime_features=lt,
        leadtime_feature_names=tuple(lt_names),
        frame=frame,
        persistence=bool(schema.persistence),
        task=schema.task,
        classes=tuple(str(c) for c in schema.classes),
        aux=aux,
        dropped_rows=dropped,
    )
    if schema.id and len(set(ds.sample_ids)) != n:
        raise ParseError(f"{path}: sample ids are not unique")
    return ds


def write_csv(ds, path, schema_path=None, schema_extra=None):
    """Write ``ds`` (raw values) as CSV; optionally also its schema JSON."""
    T = ds.n_leadtimes
    header = ["id", "timestamp"] + list(ds.feature_names)
    lt_cols = {name: [f"{name}_t{t}" for t in range(T)] for name in ds.leadtime_feature_names}
    for cols in lt_cols.values():
        header += cols
    header += list(ds.aux)
    if ds.group_ids is not None:
        header.append("group")
    if ds.task == "regression":
        header += list(ds.target_names)
    else:
        header.append("label")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n in range(ds.n_samples):
            row = [ds.sample_ids[n], _fmt_ts(ds.timestamps[n])]
            row += [repr(float(v)) for v in ds.features[n]]
            if ds.leadtime_features is not None:
                for g in range(len(ds.leadtime_feature_names)):
                    row += [repr(float(v)) for v in ds.leadtime_features[n, :, g]]
            row += [repr(float(ds.aux[k][n])) for k in ds.aux]
            if ds.group_ids is not None:
                row.append(ds.group_ids[n])
            if ds.task == "regression":
                row += [repr(float(v)) for v in ds.targets[n]]
            else:
                row.append(ds.classes[int(np.argmax(ds.targets[n]))])
            w.writerow(row)
    schema = Schema(
        features=list(ds.feature_names),
        targets=list(ds.target_names) if ds.task == "regression" else [],
        timestamp="timestamp",
        id="id",
        group="group" if ds.group_ids is not None else None,
        leadtime_features=lt_cols,
        leadtime_frame=None if ds.frame is None else
        {"k_min": ds.frame.k_min, "k_max": ds.frame.k_max, "delta": ds.frame.delta},
        persistence=ds.persistence,
        task=ds.task,
        label="label" if ds.task == "classification" else None,
        classes=list(ds.classes),
        aux=list(ds.aux),
        **(schema_extra or {}),
    )
    if schema_path is not None:
        schema.dump(schema_path)
    return schema


def _fmt_ts(v):
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# -- preprocessing -----------------------------------------------------------


def standardize(ds, fit_on=None):
    """Standardize static and leadtime features with statistics of ``fit_on`` rows.

    Leadtime features pool all leadtimes of the fit rows. Constant columns
    keep a unit scale and trigger a warning. Returns ``(dataset, transform)``.
    """
    if ds.feature_transform is not None:
        raise TransformError("dataset is already standardized; use apply_transform to reuse a transform")
    rows = np.arange(ds.n_samples) if fit_on is None else np.asarray(fit_on, dtype=np.int64)
    if len(rows) == 0:
        raise EmptyFitSet("standardization needs at least one fit row")
    names, means, stds = [], [], []
    for i, name in enumerate(ds.feature_names):
        col = ds.features[rows, i]
        names.append(name)
        means.append(float(col.mean()))
        stds.append(float(col.std()))
    for g, name in enumerate(ds.leadtime_feature_names):
        col = ds.leadtime_features[rows, :, g]
        names.append(name)
        means.append(float(col.mean()))
        stds.append(float(col.std()))
    flat = [n for n, s in zip(names, stds) if not s > 0]
    if flat:
        warnings.warn(f"constant features left unscaled: {flat}", stacklevel=2)
    stds = [s if s > 0 else 1.0 for s in stds]
    transform = FeatureTransform(tuple(names), tuple(means), tuple(stds))
    return _apply(ds, transform), transform


def apply_transform(ds, transform):
    """Apply a stored standardization. Reapplying the transform a dataset
    already carries is a no-op; applying a different one is an error."""
    if ds.feature_transform is not None:
        if ds.feature_transform == transform:
            return ds
        raise TransformError("dataset already carries a different feature transform")
    return _apply(ds, transform)


def _apply(ds, transform):
    lookup = {n: (m, s) for n, m, s in zip(transform.names, transform.mean, transform.std)}
    missing = [n for n in ds.input_columns if n not in lookup]
    if missing:
        raise SchemaMismatch(f"transform lacks statistics for {missing}")
    feats = ds.features.copy()
    for i, name in enumerate(ds.feature_names):
        m, s = lookup[name]
        feats[:, i] = (feats[:, i] - m) / s
    lt = None
    if ds.leadtime_features is not None:
        lt = ds.leadtime_features.copy()
        for g, name in enumerate(ds.leadtime_feature_names):
            m, s = lookup[name]
            lt[:, :, g] = (lt[:, :, g] - m) / s
    return replace(ds, features=feats, leadtime_features=lt, feature_transform=transform)


def normalize_target_max(ds, max_value):
    """Divide targets by ``max_value`` (e.g. nominal capacity)."""
    max_value = float(max_value)
    if not max_value > 0:
        raise NonPositiveMax(f"target max must be positive, got {max_value}")
    if ds.target_scale is not None:
        raise TransformError("targets are already normalized")
    if ds.task == "classification":
        raise TransformError("classification targets are not rescaled")
    return replace(ds, targets=ds.targets / max_value, target_scale=max_value)


def training_target_max(ds, rows):
    """Largest absolute target over ``rows``; never look at test rows."""
    return float(np.max(np.abs(ds.targets[np.asarray(rows)])))


def denormalize_targets(values, ds):
    return np.asarray(values) * (ds.target_scale or 1.0)


def lag_features(ds, columns, shifts):
    """Add copies of static feature ``columns`` shifted by each row offset.

    The column for shift ``s`` at row ``n`` holds the value from row
    ``n + s``. Rows without a source are dropped. Returns
    ``(dataset, n_dropped)``.
    """
    shifts = sorted({int(s) for s in shifts} - {0})
    if not shifts:
        return ds, 0
    n = ds.n_samples
    if max(abs(s) for s in shifts) >= n:
        raise ShiftTooLarge(f"shift magnitude must be below the {n} available rows")
    for c in columns:
        if c not in ds.feature_names:
            raise SchemaMismatch(f"cannot lag unknown static feature {c!r}")
    lo = max(0, -min(shifts))
    hi = n - max(0, max(shifts))
    keep = np.arange(lo, hi)
    new_cols, new_names = [], []
    for c in columns:
        src = ds.features[:, ds.feature_names.index(c)]
        for s in shifts:
            new_cols.append(src[keep + s])
            new_names.append(f"{c}{s:+d}")
    base = ds.select(keep)
    feats = np.column_stack([base.features] + new_cols)
    out = replace(base, features=feats, feature_names=tuple(ds.feature_names) + tuple(new_names))
    return out, n - len(keep)


# -- splits --------------------------------------------------------------------


@dataclass(frozen=True)
class SplitPlan:
    """Cross-validation layout: contiguous unshuffled test blocks, the rest
    split into base-learner and ensemble sets."""

    folds: int = 10
    base_fraction: float = 0.7
    shuffle_train: bool = True
    group_key: bool = False

    def __post_init__(self):
        if self.folds < 2:
            raise ConfigError("need at least 2 folds")
        if not 0 < self.base_fraction < 1:
            raise ConfigError("base_fraction must lie strictly between 0 and 1")

    @property
    def ensemble_fraction(self):
        return 1.0 - self.base_fraction

    @property
    def test_fraction(self):
        return 1.0 / self.folds


@dataclass(frozen=True)
class Split:
    base: np.ndarray
    ensemble: np.ndarray
    test: np.ndarray


def _split_train(train, plan, rng):
    order = rng.permutation(len(train)) if plan.shuffle_train else np.arange(len(train))
    n_base = int(round(plan.base_fraction * len(train)))
    n_base = min(max(n_base, 1), len(train) - 1)
    return order[:n_base], order[n_base:]


def kfold_splits(ds, plan=SplitPlan(), rows=None, seed=0):
    """Deterministic (base, ensemble, test) row triples for every fold."""
    rows = np.arange(ds.n_samples) if rows is None else np.asarray(rows, dtype=np.int64)
    splits = []
    if plan.group_key:
        if ds.group_ids is None:
            raise ConfigError("group split requested but the dataset has no group column")
        gid = ds.group_ids[rows]
        groups = list(dict.fromkeys(gid))
        if len(groups) < plan.folds or len(groups) < 3:
            raise TooFewGroups(f"{len(groups)} groups cannot fill {plan.folds} folds")
        blocks = np.array_split(np.arange(len(groups)), plan.folds)
        for f, block in enumerate(blocks):
            rng = np.random.default_rng([seed, f])
            test_g = {groups[i] for i in block}
            train_g = np.array([i for i in range(len(groups)) if groups[i] not in test_g])
            if len(train_g) < 2:
                raise TooFewGroups("need at least two training groups per fold")
            b, e = _split_train(train_g, plan, rng)
            base_g = {groups[i] for i in train_g[b]}
            ens_g = {groups[i] for i in train_g[e]}
            splits.append(Split(
                base=rows[np.isin(gid, list(base_g))],
                ensemble=rows[np.isin(gid, list(ens_g))],
                test=rows[np.isin(gid, list(test_g))],
            ))
        return splits
    if len(rows) < 3 * plan.folds:
        raise TooFewSamples(f"{len(rows)} rows are too few for {plan.folds} folds")
    for f, test_idx in enumerate(np.array_split(np.arange(len(rows)), plan.folds)):
        rng = np.random.default_rng([seed, f])
        train = np.setdiff1d(np.arange(len(rows)), test_idx)
        b, e = _split_train(train, plan, rng)
        splits.append(Split(
            base=rows[np.sort(train[b])],
            ensemble=rows[np.sort(train[e])],
            test=rows[test_idx],
        ))
    return splits


def train_split(ds, plan=SplitPlan(), rows=None, seed=0):
    """Single base/ensemble split over ``rows`` (no test block)."""
    rows = np.arange(ds.n_samples) if rows is None else np.asarray(rows, dtype=np.int64)
    if len(rows) < 2:
        raise TooFewSamples("need at least two rows to split")
    b, e = _split_train(np.arange(len(rows)), plan, np.random.default_rng([seed, 0]))
    return rows[np.sort(b)], rows[np.sort(e)]


# -- synthetic data ----------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    """Regime benchmark: ``x0`` picks the regime; regime 0 is linear in
    (x1, x2), regime 1 a smooth bump surface suited to nearest neighbours.
    Members only see forecasts of x1, x2 whose noise grows with leadtime.
    """

    n: int = 5000
    n_leadtimes: int = 5
    regime_fractions: tuple = (0.5, 0.5)
    feature_noise: tuple = (0.02, 0.2)  # sd at leadtime 0 and K
    target_noise: float = 0.05
    seed: int = 0


REGIME_FUNCTIONS = (
    lambda x1, x2: 0.5 + 0.8 * x1 - 0.6 * x2,
    lambda x1, x2: 0.5 + 0.5 * np.cos(np.pi * x1) * np.cos(np.pi * x2),
)


def noise_schedule(config):
    return np.linspace(config.feature_noise[0], config.feature_noise[1], config.n_leadtimes)


def synth_regime_dataset(config=SynthConfig()):
    """Seeded regime dataset; regime labels are in ``aux['regime']``."""
    fr = np.asarray(config.regime_fractions, dtype=np.float64)
    if len(fr) > len(REGIME_FUNCTIONS) or not np.isclose(fr.sum(), 1.0) or np.any(fr <= 0):
        raise ConfigError("regime_fractions must be positive, sum to 1, and list at most 2 regimes")
    rng = np.random.default_rng(config.seed)
    n = config.n
    counts = np.floor(fr * n).astype(int)
    counts[-1] = n - counts[:-1].sum()
    edges = np.concatenate([[0.0], np.cumsum(fr)])
    edges[-1] = 1.0
    regime = np.repeat(np.arange(len(fr)), counts)
    rng.shuffle(regime)
    u = edges[regime] + rng.uniform(0.0, 1.0, n) * (edges[regime + 1] - edges[regime])
    x0 = 2.0 * u - 1.0
    x1 = rng.uniform(-1.0, 1.0, n)
    x2 = rng.uniform(-1.0, 1.0, n)
    y = np.empty(n)
    for r in range(len(fr)):
        sel = regime == r
        y[sel] = REGIME_FUNCTIONS[r](x1[sel], x2[sel])
    y += rng.normal(0.0, config.target_noise, n)
    sd = noise_schedule(config)
    T = config.n_leadtimes
    lt = np.empty((n, T, 2))
    lt[:, :, 0] = x1[:, None] + rng.normal(0.0, 1.0, (n, T)) * sd
    lt[:, :, 1] = x2[:, None] + rng.normal(0.0, 1.0, (n, T)) * sd
    return Dataset(
        features=x0[:, None],
        targets=y[:, None],
        feature_names=("x0",),
        target_names=("y",),
        timestamps=np.arange(n, dtype=np.float64),
        sample_ids=np.array([f"s{i}" for i in range(n)], dtype=object),
        leadtime_features=lt,
        leadtime_feature_names=("x1", "x2"),
        frame=LeadtimeFrame(1, T, 1),
        aux={"regime": regime.astype(np.float64), "x1_true": x1, "x2_true": x2},
    )


def regime_of(x0, fractions):
    """Recover the regime label from the raw x0 feature."""
    edges = np.cumsum(np.asarray(fractions, dtype=np.float64))[:-1]
    return np.searchsorted(edges, (np.asarray(x0) + 1.0) / 2.0, side="right")


def synth_random_walk_dataset(seed=0, n=3000, frame=LeadtimeFrame(1, 5, 1),
                              step_sd=0.3, exog_coef=0.3):
    """Random walk plus a small exogenous term, with issue-time targets.

    ``y[n] = walk[n] + exog_coef * x[n]``; the exogenous ``x`` is known at
    target time, so a model on ``x`` alone is flat over leadtimes while
    persistence degrades with the horizon.
    """
    rng = np.random.default_rng(seed)
    walk = np.cumsum(rng.normal(0.0, step_sd, n))
    x = rng.normal(0.0, 1.0, n)
    y = walk + exog_coef * x
    return Dataset(
        features=x[:, None],
        targets=y[:, None],
        feature_names=("x",),
        target_names=("y",),
        sample_ids=np.array([f"s{i}" for i in range(n)], dtype=object),
        frame=frame,
        persistence=True,
    )
