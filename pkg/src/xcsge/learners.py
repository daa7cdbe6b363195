"""Built-in ensemble members.

Ridge regression, k-nearest neighbours and persistence work on plain feature
matrices; :class:`LearnerMember` adapts them to the ensemble member protocol
(``predict(ds, rows, t)``) by pulling leadtime frames from a dataset.
:class:`PrecomputedMember` serves predictions produced by external models.
"""

import csv
import math

import numpy as np

from . import kernels
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    IncompleteCoverage,
    MissingPrediction,
    ParseError,
    SingularSystem,
)

PROBA_TOLERANCE = 1e-6


class RidgeModel:
    """Affine model ``X @ coef + intercept`` (coef is F x M)."""

    kind = "ridge"

    def __init__(self, coef, intercept, lam):
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = np.asarray(intercept, dtype=np.float64)
        self.lam = float(lam)

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.coef.shape[0]:
            raise DimensionMismatch(f"ridge expects {self.coef.shape[0]} features, got {X.shape[-1]}")
        return X @ self.coef + self.intercept

    def state(self):
        return {"lam": self.lam}, {"coef": self.coef, "intercept": self.intercept}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["coef"], arrays["intercept"], meta["lam"])


def ridge_fit(features, targets, lam=1.0):
    """Closed-form ridge regression with an unpenalized intercept.

    Minimizes ``||X b + c - y||^2 + lam ||b||^2`` per target dimension by
    centering, then solving the normal equations with a Cholesky factor.
    """
    X = np.asarray(features, dtype=np.float64)
    Y = np.asarray(targets, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[:, None]
    if X.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise DimensionMismatch(f"features {X.shape} and targets {Y.shape} do not line up")
    if X.shape[0] == 0:
        raise EmptyDataset("ridge needs at least one sample")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    x_mean = X.mean(axis=0)
    y_mean = Y.mean(axis=0)
    Xc = X - x_mean
    Yc = Y - y_mean
    if lam == 0 and np.linalg.matrix_rank(Xc) < X.shape[1]:
        raise SingularSystem("rank-deficient design with lambda = 0")
    A = Xc.T @ Xc + lam * np.eye(X.shape[1])
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    coef = np.linalg.solve(L.T, np.linalg.solve(L, Xc.T @ Yc))
    return RidgeModel(coef, y_mean - x_mean @ coef, lam)


class KnnModel:
    """k-nearest-neighbour regressor or classifier.

    In classify mode the stored targets are one-hot rows, so the neighbour
    mean is the class-frequency vector of the k neighbours.
    """

    kind = "knn"

    def __init__(self, X, Y, k, mode="regress"):
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.Y = np.ascontiguousarray(Y, dtype=np.float64)
        self.k = int(k)
        self.mode = mode
        if not 1 <= self.k <= len(self.X):
            raise ValueError(f"k={self.k} must lie in 1..{len(self.X)}")

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.X.shape[1]:
            raise DimensionMismatch(f"knn expects {self.X.shape[1]} features, got {X.shape[-1]}")
        return kernels.knn_mean(self.X, self.Y, X, self.k)

    def state(self):
        return {"k": self.k, "mode": self.mode}, {"X": self.X, "Y": self.Y}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(arrays["X"], arrays["Y"], meta["k"], meta["mode"])


def knn_fit(features, targets, k=5, mode="regress", n_classes=None):
    """Store the reference set; ``targets`` are labels when classifying."""
    targets = np.asarray(targets)
    if mode == "classify":
        if targets.ndim == 1:
            labels = targets.astype(int)
            n_classes = n_classes or int(labels.max()) + 1
            targets = np.eye(n_classes)[labels]
    elif targets.ndim == 1:
        targets = targets[:, None]
    return KnnModel(features, targets, k, mode)


class PersistenceModel:
    """Echoes the designated last-observed-target columns."""

    kind = "persistence"

    def __init__(self, columns):
        self.columns = [int(c) for c in columns]

    def predict(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X[:, self.columns].copy()

    def state(self):
        return {"columns": self.columns}, {}

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(meta["columns"])


LEARNERS = {cls.kind: cls for cls in (RidgeModel, KnnModel, PersistenceModel)}


class LearnerMember:
    """Ensemble member backed by a fitted learner reading dataset frames.

    ``columns`` names the frame columns the learner consumes, in order.
    """

    lag = 0

    def __init__(self, id, model, columns):
        self.id = id
        self.model = model
        self.columns = list(columns)

    def predict(self, ds, rows, t):
        return self.model.predict(ds.inputs(rows, t, self.columns))

    def state(self):
        meta, arrays = self.model.state()
        return {"type": "learner", "id": self.id, "kind": self.model.kind,
                "columns": self.columns, "model": meta}, arrays

    @classmethod
    def from_state(cls, meta, arrays):
        model = LEARNERS[meta["kind"]].from_state(meta["model"], arrays)
        return cls(meta["id"], model, meta["columns"])


def stacked_frames(ds, rows, columns):
    """Frames of every leadtime stacked row-wise with matching targets."""
    T = ds.n_leadtimes
    X = np.concatenate([ds.inputs(rows, t, columns) for t in range(T)])
    Y = np.concatenate([ds.targets[rows]] * T)
    return X, Y


def fit_member(kind, ds, rows, id=None, columns=None, **params):
    """Fit a built-in learner on ``rows`` of ``ds`` (all leadtimes pooled).

    ``kind`` is ``"ridge"`` (param ``lam``), ``"knn"`` (param ``k``) or
    ``"persistence"``. ``columns`` defaults to every non-issue frame column
    for ridge/knn and to the issue-time target columns for persistence.
    """
    rows = np.asarray(rows)
    id = id or kind
    if kind == "persistence":
        issue = ds.issue_columns
        if not issue:
            raise ParseError("persistence needs a leadtime frame with issue-time target columns")
        names = list(columns) if columns else issue
        return LearnerMember(id, PersistenceModel(range(len(names))), names)
    names = list(columns) if columns else ds.input_columns
    X, Y = stacked_frames(ds, rows, names)
    if kind == "ridge":
        model = ridge_fit(X, Y, params.get("lam", 1.0))
    elif kind == "knn":
        mode = "classify" if ds.task == "classification" else "regress"
        model = KnnModel(X, Y, min(int(params.get("k", 5)), len(X)), mode)
    else:
        raise ValueError(f"unknown learner kind {kind!r}")
    return LearnerMember(id, model, names)


class PrecomputedMember:
    """Member answering from a table of (sample_id, leadtime) -> prediction.

    Stored values are in original target units; ``scale`` divides them so
    they line up with max-normalized targets.
    """

    lag = 0

    def __init__(self, id, sample_ids, leadtimes, values, scale=1.0):
        self.id = id
        self.scale = float(scale)
        self.sample_ids = [str(s) for s in sample_ids]
        self.leadtimes = np.asarray(leadtimes, dtype=np.int64)
        self.values = np.ascontiguousarray(values, dtype=np.float64)
        self._index = {(s, int(t)): i for i, (s, t) in enumerate(zip(self.sample_ids, self.leadtimes))}

    @property
    def n_outputs(self):
        return self.values.shape[1]

    def lookup(self, sample_ids, t):
        idx = []
        for s in sample_ids:
            i = self._index.get((str(s), int(t)))
            if i is None:
                raise MissingPrediction(f"member {self.id!r} has no prediction for ({s}, {t})")
            idx.append(i)
        return self.values[idx] / self.scale if self.scale != 1.0 else self.values[idx]

    def predict(self, ds, rows, t):
        return self.lookup(ds.sample_ids[np.asarray(rows)], t)

    def missing(self, sample_ids, leadtimes):
        return [(str(s), int(t)) for s in sample_ids for t in leadtimes
                if (str(s), int(t)) not in self._index]

    def state(self):
        return ({"type": "precomputed", "id": self.id, "sample_ids": self.sample_ids,
                 "scale": self.scale},
                {"leadtimes": self.leadtimes, "values": self.values})

    @classmethod
    def from_state(cls, meta, arrays):
        return cls(meta["id"], meta["sample_ids"], arrays["leadtimes"], arrays["values"],
                   meta.get("scale", 1.0))


def load_precomputed(path, id=None, sample_ids=None, leadtimes=None, proba=False):
    """Read a precomputed-prediction CSV.

    The header is ``sample_id,leadtime,p_0,...,p_{M-1}``, one row per
    (sample, leadtime). With ``sample_ids``/``leadtimes`` given, every pair
    must be present. With ``proba`` each row must sum to one within 1e-6.
    """
    ids, lts, vals = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        n_out = len(header) - 2
        expected = ["sample_id", "leadtime"] + [f"p_{m}" for m in range(n_out)]
        if n_out < 1 or header != expected:
            raise ParseError(f"{path}: header must be sample_id,leadtime,p_0,...; got {','.join(header)}")
        seen = set()
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            try:
                t = int(row[1])
            except ValueError:
                raise ParseError(f"{path}:{line_no}: leadtime {row[1]!r} is not an integer") from None
            try:
                v = [float(x) for x in row[2:]]
            except ValueError:
                raise ParseError(f"{path}:{line_no}: non-numeric prediction value") from None
            if not all(math.isfinite(x) for x in v):
                raise ParseError(f"{path}:{line_no}: non-finite prediction value")
            if proba and (min(v) < 0 or abs(sum(v) - 1.0) > PROBA_TOLERANCE):
                raise ParseError(f"{path}:{line_no}: probabilities sum to {sum(v)!r}, not 1")
            key = (row[0].strip(), t)
            if key in seen:
                raise ParseError(f"{path}:{line_no}: duplicate row for {key}")
            seen.add(key)
            ids.append(key[0])
            lts.append(t)
            vals.append(v)
    if not vals:
        raise ParseError(f"{path}: no prediction rows")
    member = PrecomputedMember(id or str(path), ids, lts, np.array(vals))
    if sample_ids is not None:
        missing = member.missing(sample_ids, leadtimes if leadtimes is not None else [0])
        if missing:
            raise IncompleteCoverage(missing)
    return member
