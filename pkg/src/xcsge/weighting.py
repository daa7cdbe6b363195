"""Global, local and time-dependent error estimates and their gate weights."""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .errors import (
    ConfigError,
    DimensionMismatch,
    EmptyDataset,
    InsufficientSamples,
    LeadtimeOutOfRange,
    ShapeMismatch,
)
from .softgate import DEFAULT_EPSILON, gate_columns, soft_gate

PROBA_CLIP = 1e-15


@dataclass(frozen=True)
class ScoreFunction:
    """Per-sample, per-dimension error; lower is better.

    ``evaluate`` broadcasts over leading axes and returns an array of the
    same shape as its inputs with nonnegative entries.
    """

    name: str
    evaluate: Callable[[np.ndarray, np.ndarray], np.ndarray]
    lower_is_better: bool = True


def _squared(pred, truth):
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(truth, dtype=np.float64)
    return diff * diff


def _logloss(pred, truth):
    # per class dimension: -y_m log p_m, summing to the categorical log loss
    p = np.clip(np.asarray(pred, dtype=np.float64), PROBA_CLIP, 1.0 - PROBA_CLIP)
    y = np.asarray(truth, dtype=np.float64)
    return -y * np.log(p)


SQUARED_ERROR = ScoreFunction("squared", _squared)
LOG_LOSS = ScoreFunction("logloss", _logloss)

_SCORES = {s.name: s for s in (SQUARED_ERROR, LOG_LOSS)}


def register_score(score):
    """Make a custom :class:`ScoreFunction` available by name."""
    if not score.lower_is_better:
        raise ConfigError(f"score {score.name!r} must be lower-is-better to drive the gate")
    _SCORES[score.name] = score
    return score


def get_score(score):
    if isinstance(score, ScoreFunction):
        return score
    try:
        return _SCORES[score]
    except KeyError:
        raise ConfigError(f"unknown score function {score!r}; known: {sorted(_SCORES)}") from None


def _check_predictions(predictions, truths):
    P = np.asarray(predictions, dtype=np.float64)
    Y = np.asarray(truths, dtype=np.float64)
    if P.ndim != 4:
        raise ShapeMismatch(f"predictions must be N x J x T x M, got shape {P.shape}")
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.shape[0] != P.shape[0]:
        raise ShapeMismatch(f"{P.shape[0]} prediction samples but {Y.shape[0]} truths")
    if Y.shape[1] != P.shape[3]:
        raise ShapeMismatch(f"predictions have {P.shape[3]} target dimensions, truths {Y.shape[1]}")
    return P, Y


def per_sample_errors(predictions, truths, score=SQUARED_ERROR):
    """Per-sample error of every member, summed over all leadtimes.

    Parameters
    ----------
    predictions : array_like, shape (N, J, T, M)
    truths : array_like, shape (N, M)
    score : ScoreFunction or str

    Returns
    -------
    ndarray, shape (N, J, M)
    """
    P, Y = _check_predictions(predictions, truths)
    score = get_score(score)
    e = np.zeros((P.shape[0], P.shape[1], P.shape[3]))
    for t in range(P.shape[2]):
        e += score.evaluate(P[:, :, t, :], Y[:, None, :])
    return e


def global_error_scores(sample_errors):
    """Mean error per member and dimension over all samples (J x M)."""
    E = np.asarray(sample_errors, dtype=np.float64)
    if E.ndim != 3:
        raise ShapeMismatch(f"sample errors must be N x J x M, got shape {E.shape}")
    if E.shape[0] == 0:
        raise EmptyDataset("cannot compute global error scores from zero samples")
    return E.mean(axis=0)


def global_weights(R, eta_global, epsilon=DEFAULT_EPSILON):
    return soft_gate(R, eta_global, epsilon)


# -- local error models ------------------------------------------------------


class KnnErrorModel:
    """k-nearest-neighbour regressor from features to a member's error.

    Euclidean distance on the given (already standardized) features,
    unweighted neighbour mean. Several members fitted on the same feature
    matrix share ``X`` so their queries can be answered with one search.
    """

    kind = "knn"

    def __init__(self, X, errors, k):
        self.X = X
        self.errors = np.ascontiguousarray(errors, dtype=np.float64)
        self.k = int(k)

    @property
    def n_features(self):
        return self.X.shape[1]

    def predict(self, X, exclude_self=False):
        return kernels.knn_mean(self.X, self.errors, X, self.k, exclude_self)


class RidgeErrorModel:
    """Linear alternative to the k-NN error model."""

    kind = "ridge"

    def __init__(self, model):
        self.model = model

    @property
    def n_features(self):
        return self.model.coef.shape[0]

    def predict(self, X, exclude_self=False):
        return self.model.predict(X)


class CustomErrorModel:
    """Wraps any fitted object exposing ``predict(X) -> (N, M)``."""

    kind = "custom"

    def __init__(self, model, n_features):
        self.model = model
        self._n_features = n_features

    @property
    def n_features(self):
        return self._n_features

    def predict(self, X, exclude_self=False):
        return np.asarray(self.model.predict(X), dtype=np.float64).reshape(len(X), -1)


@dataclass
class LocalModelSpec:
    """How local error models are built.

    ``kind`` is ``"knn"`` (default), ``"ridge"`` or ``"custom"``; a custom
    spec supplies ``factory(X, errors) -> fitted object with predict``.
    ``k`` may be a single value or a grid searched jointly with eta.
    ``columns`` names the frame columns used as local features (all when
    None).
    """

    kind: str = "knn"
    k: tuple = (9,)
    lam: float = 1.0
    columns: tuple | None = None
    factory: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        if isinstance(self.k, (int, np.integer)):
            self.k = (int(self.k),)
        self.k = tuple(int(v) for v in self.k)
        if self.kind not in ("knn", "ridge", "custom"):
            raise ConfigError(f"unknown local model kind {self.kind!r}")
        if self.kind == "custom" and self.factory is None:
            raise ConfigError("custom local model needs a factory")
        if self.kind == "knn" and (not self.k or min(self.k) < 1):
            raise ConfigError("knn local model needs k >= 1")


def fit_local_error_models(features, per_sample_leadtime_errors, spec=None, k=None):
    """Fit one error model per member.

    Parameters
    ----------
    features : array_like, shape (N, F)
    per_sample_leadtime_errors : array_like, shape (N, J, M)
    spec : LocalModelSpec, optional
    k : int, optional
        Neighbour count overriding ``spec.k`` for the knn kind.
    """
    spec = spec or LocalModelSpec()
    X = np.ascontiguousarray(features, dtype=np.float64)
    E = np.asarray(per_sample_leadtime_errors, dtype=np.float64)
    if X.ndim != 2 or E.ndim != 3 or X.shape[0] != E.shape[0]:
        raise ShapeMismatch(f"features {X.shape} and errors {E.shape} do not line up")
    n, J, _ = E.shape
    if spec.kind == "knn":
        k = spec.k[0] if k is None else int(k)
        if n < k:
            raise InsufficientSamples(f"knn({k}) local model needs at least {k} samples, got {n}")
        return [KnnErrorModel(X, E[:, j, :], k) for j in range(J)]
    if spec.kind == "ridge":
        from .learners import ridge_fit

        return [RidgeErrorModel(ridge_fit(X, E[:, j, :], spec.lam)) for j in range(J)]
    return [CustomErrorModel(spec.factory(X, E[:, j, :]), X.shape[1]) for j in range(J)]


def local_error_estimates(models, X, exclude_self=False):
    """Clamped error estimates of every member at every query row (N x J x M).

    ``exclude_self`` gives leave-one-out estimates for the knn kind when ``X``
    is the training feature matrix.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    for m in models:
        if m.n_features != X.shape[1]:
            raise DimensionMismatch(
                f"local model expects {m.n_features} features, query has {X.shape[1]}"
            )
    first = models[0]
    shared = isinstance(first, KnnErrorModel) and all(
        isinstance(m, KnnErrorModel) and m.X is first.X and m.k == first.k for m in models
    )
    if shared:
        J, M = len(models), first.errors.shape[1]
        stacked = np.concatenate([m.errors for m in models], axis=1)
        q = kernels.knn_mean(first.X, stacked, X, first.k, exclude_self).reshape(len(X), J, M)
    else:
        q = np.stack([m.predict(X, exclude_self) for m in models], axis=1)
    return np.maximum(q, 0.0)


def local_weights(x, models, eta_local, epsilon=DEFAULT_EPSILON):
    """Local gate weights (J x M) for one feature vector."""
    q = local_error_estimates(models, np.asarray(x, dtype=np.float64)[None, :])[0]
    return gate_columns(q, float(eta_local), epsilon)


# -- time-dependent weighting ----------------------------------------------


@dataclass(frozen=True)
class LeadtimeErrorProfile:
    """Mean error per member, leadtime and dimension, plus its per-member
    share of the total over leadtimes (uniform for a perfect member)."""

    values: np.ndarray  # J x T x M
    relative: np.ndarray  # J x T x M, sums to 1 over T

    @property
    def n_leadtimes(self):
        return self.values.shape[1]


def leadtime_error_scores(predictions, truths, score=SQUARED_ERROR):
    P, Y = _check_predictions(predictions, truths)
    if P.shape[0] == 0:
        raise EmptyDataset("cannot compute leadtime error scores from zero samples")
    score = get_score(score)
    values = score.evaluate(P, Y[:, None, None, :]).mean(axis=0)
    total = values.sum(axis=1, keepdims=True)
    # a member with zero total error gets a uniform profile
    flat = ~(total > 0)
    relative = np.where(flat, 1.0 / values.shape[1], values / np.where(flat, 1.0, total))
    return LeadtimeErrorProfile(values, relative)


def time_weight_tensor(profile, eta_time, epsilon=DEFAULT_EPSILON):
    """Time weights for every leadtime at once (J x T x M)."""
    return gate_columns(profile.relative, float(eta_time), epsilon)


def time_weights(profile, t, eta_time, epsilon=DEFAULT_EPSILON):
    """Time gate weights (J x M) at leadtime ``t``."""
    T = profile.n_leadtimes
    if not 0 <= t < T:
        raise LeadtimeOutOfRange(f"leadtime {t} outside 0..{T - 1}")
    return soft_gate(profile.relative[:, t, :], eta_time, epsilon)
