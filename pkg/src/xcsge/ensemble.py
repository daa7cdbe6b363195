"""Weight fusion, eta search, fitting and persistence of the soft gating ensemble.

Members follow a small protocol: an ``id``, a ``lag`` and
``predict(ds, rows, t) -> (len(rows), M)``. The fitted :class:`XcsgeModel`
combines, per prediction, the global gate of each member's mean training
error, the local gate of its estimated error at the query, and the time
gate of its relative error at the leadtime; the product is renormalized per
target dimension.
"""

import io
import itertools
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (
    AllMembersMasked,
    ConfigError,
    DimensionMismatch,
    EmptyGrid,
    InsufficientSamples,
    InvalidLagCount,
    LeadtimeOutOfRange,
    ShapeMismatch,
    ZeroColumn,
)
from .learners import LearnerMember, PrecomputedMember
from .softgate import DEFAULT_EPSILON, ETA_MAX, gate_columns
from .weighting import (
    CustomErrorModel,
    KnnErrorModel,
    LeadtimeErrorProfile,
    LocalModelSpec,
    RidgeErrorModel,
    fit_local_error_models,
    get_score,
    global_error_scores,
    leadtime_error_scores,
    local_error_estimates,
    per_sample_errors,
)

FORMAT_VERSION = 1
DEFAULT_ETA_GRID = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class EtaTriple:
    eta_global: float = 0.0
    eta_local: float = 0.0
    eta_time: float = 0.0

    def __post_init__(self):
        for v in self.as_tuple():
            if not (np.isfinite(v) and v >= 0):
                raise ConfigError(f"eta values must be finite and >= 0, got {self}")

    def as_tuple(self):
        return (self.eta_global, self.eta_local, self.eta_time)

    @property
    def total(self):
        return sum(self.as_tuple())


class LaggedMember:
    """A member answering from the frame ``lag`` rows earlier."""

    def __init__(self, base, lag):
        self.base = base
        self.lag = int(lag)
        self.id = base.id if self.lag == 0 else f"{base.id}@lag{self.lag}"

    def predict(self, ds, rows, t):
        return self.base.predict(ds, np.asarray(rows) - self.lag, t)


def expand_time_lagged(members, lag_count):
    """Every member in ``lag_count`` variants lagged 0..lag_count-1 rows."""
    if int(lag_count) != lag_count or lag_count < 1:
        raise InvalidLagCount(f"lag count must be a positive integer, got {lag_count!r}")
    out = []
    for m in members:
        base = m.base if isinstance(m, LaggedMember) else m
        offset = m.lag if isinstance(m, LaggedMember) else 0
        out.extend(LaggedMember(base, offset + lag) for lag in range(int(lag_count)))
    return out


def max_member_lag(members):
    return max((getattr(m, "lag", 0) for m in members), default=0)


def member_predictions(members, ds, rows):
    """Prediction tensor (N, J, T, M) of ``members`` on ``rows``."""
    rows = np.asarray(rows, dtype=np.int64)
    T = ds.n_leadtimes
    first = members[0].predict(ds, rows, 0)
    P = np.empty((len(rows), len(members), T, first.shape[1]))
    for j, m in enumerate(members):
        for t in range(T):
            p = first if (j == 0 and t == 0) else m.predict(ds, rows, t)
            if p.shape != first.shape:
                raise DimensionMismatch(f"member {m.id!r} returned shape {p.shape}, expected {first.shape}")
            P[:, j, t, :] = p
    return P


def combine_weights(wg, wl, wk, mask=None):
    """Hadamard product of the three weight matrices, masked and renormalized.

    A column that collapses to zero falls back to uniform weights over the
    unmasked members.
    """
    wg, wl, wk = (np.asarray(w, dtype=np.float64) for w in (wg, wl, wk))
    if not wg.shape == wl.shape == wk.shape:
        raise ShapeMismatch(f"weight shapes differ: {wg.shape}, {wl.shape}, {wk.shape}")
    keep = np.ones(wg.shape[0], dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not keep.any():
        raise AllMembersMasked("at least one member must stay unmasked")
    wbar = wg * wl * wk * keep[:, None]
    col = wbar.sum(axis=0)
    zero = ~(col > 0)
    if np.any(zero):
        wbar[:, zero] = keep[:, None] / keep.sum()
        col = wbar.sum(axis=0)
    return wbar / col


def fused_predict(P, R, Q, relative, eta, epsilon=DEFAULT_EPSILON, mask=None,
                  renormalize=False, explain=False):
    """Ensemble output (N, T, M) from precomputed member state.

    Masked members are left out before gating, so every weight is recomputed
    over the remaining members only. With ``explain`` the effective weights
    (N, T, J, M) are returned as well, zero for masked members.
    """
    J = P.shape[1]
    keep = np.ones(J, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    if not keep.any():
        raise AllMembersMasked("at least one member must stay unmasked")
    sub = np.flatnonzero(keep)
    if len(sub) < J:
        P, R, Q, relative = P[:, sub], R[sub], Q[:, sub], relative[sub]
    wg = gate_columns(R, eta.eta_global, epsilon)
    wk = gate_columns(relative, eta.eta_time, epsilon)
    out, w = kernels.fuse(P, wg, wk, Q, float(eta.eta_local), float(epsilon), explain)
    if not np.all(np.isfinite(out)):
        raise ZeroColumn("ensemble output is not finite")
    if renormalize:
        s = out.sum(axis=-1, keepdims=True)
        out = np.where(s > 0, out / np.where(s > 0, s, 1.0), out)
    if explain and len(sub) < J:
        full = np.zeros(w.shape[:2] + (J,) + w.shape[3:])
        full[:, :, sub, :] = w
        w = full
    return out, w


def eta_objective(eta, P, Y, R, Q, relative, score="squared", c=0.0,
                  epsilon=DEFAULT_EPSILON, mask=None, renormalize=False):
    """Summed score of the ensemble over samples and leadtimes plus ``c * sum(eta)``."""
    out, _ = fused_predict(P, R, Q, relative, eta, epsilon, mask, renormalize)
    data = get_score(score).evaluate(out, np.asarray(Y)[:, None, :]).sum()
    return float(data + c * eta.total)


def eta_candidates(grid):
    """Grid points ordered so that ties resolve toward the smallest eta sum."""
    if isinstance(grid, dict):
        axes = [sorted(set(grid[k])) for k in ("global", "local", "time")]
    else:
        axes = [sorted(set(grid))] * 3
    if any(len(a) == 0 for a in axes):
        raise EmptyGrid("eta grid has an empty axis")
    pts = [EtaTriple(*p) for p in itertools.product(*axes)]
    return sorted(pts, key=lambda e: (e.total,) + e.as_tuple())


def optimize_eta(P, Y, R, Q, relative, grid=DEFAULT_ETA_GRID, c=0.0, score="squared",
                 epsilon=DEFAULT_EPSILON, mask=None, renormalize=False, refine=False):
    """Exhaustive grid search for the eta triple, optionally refined by
    bounded coordinate descent. Returns ``(eta, objective)``."""
    best, best_val = None, np.inf
    for eta in eta_candidates(grid):
        val = eta_objective(eta, P, Y, R, Q, relative, score, c, epsilon, mask, renormalize)
        if val < best_val:
            best, best_val = eta, val
    if best is None:
        raise EmptyGrid("no finite objective on the eta grid")
    if refine:
        best, best_val = _coordinate_descent(best, best_val, P, Y, R, Q, relative,
                                             score, c, epsilon, mask, renormalize)
    return best, best_val


def _coordinate_descent(eta, val, P, Y, R, Q, relative, score, c, epsilon, mask, renormalize,
                        sweeps=3):
    from scipy.optimize import minimize_scalar

    x = list(eta.as_tuple())
    for _ in range(sweeps):
        improved = False
        for axis in range(3):
            def f(v, axis=axis):
                y = list(x)
                y[axis] = v
                return eta_objective(EtaTriple(*y), P, Y, R, Q, relative, score, c,
                                     epsilon, mask, renormalize)

            res = minimize_scalar(f, bounds=(0.0, ETA_MAX), method="bounded",
                                  options={"xatol": 1e-3})
            if res.fun < val:
                x[axis], val, improved = float(res.x), float(res.fun), True
        if not improved:
            break
    return EtaTriple(*x), val


@dataclass
class EnsembleConfig:
    """Fitting options.

    ``eta_grid`` is one per-axis grid or a dict with ``global``/``local``/
    ``time`` grids; ``eta`` fixes the triple and skips the search.
    """

    eta_grid: object = DEFAULT_ETA_GRID
    eta: EtaTriple | None = None
    c: float = 0.0
    epsilon: float = DEFAULT_EPSILON
    local: LocalModelSpec = field(default_factory=LocalModelSpec)
    score: str = "squared"
    renormalize_proba: bool = True
    refine: bool = False


@dataclass(eq=False)
class XcsgeModel:
    members: list
    eta: EtaTriple
    global_R: np.ndarray  # J x M
    local_models: list
    profile: LeadtimeErrorProfile
    mask: np.ndarray
    score: str = "squared"
    task: str = "regression"
    renormalize_proba: bool = True
    epsilon: float = DEFAULT_EPSILON
    local_columns: list | None = None
    local_k: int | None = None
    objective: float = float("nan")
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        J = len(self.members)
        if not self.mask.any():
            raise AllMembersMasked("at least one member must stay unmasked")
        if not (self.global_R.shape[0] == len(self.local_models) == self.profile.values.shape[0]
                == len(self.mask) == J):
            raise ShapeMismatch("member count differs across the fitted state")

    @property
    def n_members(self):
        return len(self.members)

    @property
    def n_leadtimes(self):
        return self.profile.n_leadtimes

    @property
    def member_ids(self):
        return [m.id for m in self.members]

    @property
    def renormalize(self):
        return self.task == "classification" and self.renormalize_proba

    def local_features(self, ds, rows):
        return ds.inputs(rows, 0, self.local_columns)

    def predict(self, ds, rows=None, leadtimes=None, explain=False):
        """Ensemble predictions for ``rows`` of ``ds``.

        Returns ``(values, weights)`` with values (N, T', M) over the
        requested leadtimes and weights (N, T', J, M) when ``explain``.
        """
        rows = ds.valid_rows(max_member_lag(self.active_members)) if rows is None else np.asarray(rows)
        T = self.n_leadtimes
        if ds.n_leadtimes != T:
            raise DimensionMismatch(f"model has {T} leadtimes, dataset {ds.n_leadtimes}")
        leadtimes = list(range(T)) if leadtimes is None else [int(t) for t in np.atleast_1d(leadtimes)]
        for t in leadtimes:
            if not 0 <= t < T:
                raise LeadtimeOutOfRange(f"leadtime {t} outside 0..{T - 1}")
        sub = np.flatnonzero(self.mask)
        M = self.global_R.shape[1]
        P = np.zeros((len(rows), self.n_members, len(leadtimes), M))
        for j in sub:
            for i, t in enumerate(leadtimes):
                P[:, j, i, :] = self.members[j].predict(ds, rows, t)
        Q = local_error_estimates(self.local_models, self.local_features(ds, rows))
        return fused_predict(P, self.global_R, Q, self.profile.relative[:, leadtimes, :],
                             self.eta, self.epsilon, self.mask, self.renormalize, explain)

    def predict_one(self, member_preds, x, t):
        """Single prediction from member outputs (J, M) at local features ``x``.

        Returns ``(prediction (M,), weights (J, M))``.
        """
        T = self.n_leadtimes
        if not 0 <= t < T:
            raise LeadtimeOutOfRange(f"leadtime {t} outside 0..{T - 1}")
        P = np.asarray(member_preds, dtype=np.float64)[None, :, None, :]
        Q = local_error_estimates(self.local_models, np.asarray(x, dtype=np.float64)[None, :])
        out, w = fused_predict(P, self.global_R, Q, self.profile.relative[:, [t], :], self.eta,
                               self.epsilon, self.mask, self.renormalize, explain=True)
        return out[0, 0], w[0, 0]

    @property
    def active_members(self):
        return [m for m, keep in zip(self.members, self.mask) if keep]

    def global_weights(self):
        """Global weights over the unmasked members (zero for masked ones)."""
        w = np.zeros_like(self.global_R)
        w[self.mask] = gate_columns(self.global_R[self.mask], self.eta.eta_global, self.epsilon)
        return w

    def objective_on(self, ds, rows, eta=None, c=0.0):
        """Objective value of ``eta`` on validation ``rows``."""
        rows = np.asarray(rows)
        P = member_predictions(self.members, ds, rows)
        Q = local_error_estimates(self.local_models, self.local_features(ds, rows))
        return eta_objective(eta or self.eta, P, ds.targets[rows], self.global_R, Q,
                             self.profile.relative, self.score, c, self.epsilon, self.mask,
                             self.renormalize)

    def save(self, path):
        save_model(self, path)


def set_member_mask(model, mask):
    """Copy of ``model`` predicting with only the members where ``mask`` holds."""
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (model.n_members,):
        raise ShapeMismatch(f"mask must have {model.n_members} entries")
    if not mask.any():
        raise AllMembersMasked("at least one member must stay unmasked")
    return replace(model, mask=mask)


def fit(members, ds, rows, config=None, mask=None):
    """Fit the ensemble on the ensemble-split ``rows`` of ``ds``.

    Members must already be trained. The eta triple (and the neighbour count
    when several are configured) is chosen on the same rows, with
    leave-one-out local error estimates so a sample never sees its own
    error.
    """
    config = config or EnsembleConfig()
    rows = np.asarray(rows, dtype=np.int64)
    if len(members) == 0:
        raise ConfigError("the ensemble needs at least one member")
    if len(rows) == 0:
        raise InsufficientSamples("no ensemble rows to fit on")
    score = get_score(config.score)
    mask = np.ones(len(members), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    P = member_predictions(members, ds, rows)
    Y = ds.targets[rows]
    E = per_sample_errors(P, Y, score)
    R = global_error_scores(E)
    profile = leadtime_error_scores(P, Y, score)
    spec = config.local
    local_columns = list(spec.columns) if spec.columns else ds.frame_columns
    X_local = ds.inputs(rows, 0, local_columns)
    renormalize = ds.task == "classification" and config.renormalize_proba

    search = config.eta is None or len(spec.k) > 1
    if spec.kind == "knn":
        # leave-one-out estimates need k + 1 rows
        ks = [k for k in spec.k if k <= len(rows) - search]
        if not ks:
            raise InsufficientSamples(
                f"knn local model with k in {list(spec.k)} needs more than {len(rows)} samples")
    else:
        ks = [None]

    best = None
    for k in ks:
        models = fit_local_error_models(X_local, E, spec, k=k)
        if not search:
            eta, val = config.eta, float("nan")
        else:
            Q = local_error_estimates(models, X_local, exclude_self=spec.kind == "knn")
            if config.eta is not None:
                eta = config.eta
                val = eta_objective(eta, P, Y, R, Q, profile.relative, score, config.c,
                                    config.epsilon, mask, renormalize)
            else:
                eta, val = optimize_eta(P, Y, R, Q, profile.relative, config.eta_grid, config.c,
                                        score, config.epsilon, mask, renormalize, config.refine)
        if best is None or val < best[2]:
            best = (k, models, val, eta)
    k, models, val, eta = best
    return XcsgeModel(
        members=list(members),
        eta=eta,
        global_R=R,
        local_models=models,
        profile=profile,
        mask=mask,
        score=score.name,
        task=ds.task,
        renormalize_proba=config.renormalize_proba,
        epsilon=config.epsilon,
        local_columns=local_columns,
        local_k=k,
        objective=val,
    )


# -- persistence ---------------------------------------------------------------

_MEMBER_TYPES = {"learner": LearnerMember, "precomputed": PrecomputedMember}


def _f8(a):
    return np.ascontiguousarray(a, dtype="<f8")


def save_model(model, path):
    """Write ``model`` as a single ``.npz`` container.

    Entry ``meta`` holds UTF-8 JSON describing the model; every matrix is a
    little-endian float64 array. Base members are stored once and lagged
    variants reference them by index.
    """
    arrays = {}
    bases, base_index = [], {}
    member_refs = []
    for m in model.members:
        base, lag = (m.base, m.lag) if isinstance(m, LaggedMember) else (m, 0)
        if id(base) not in base_index:
            if not hasattr(base, "state"):
                raise ConfigError(f"member {base.id!r} cannot be serialized")
            meta, arrs = base.state()
            b = len(bases)
            base_index[id(base)] = b
            bases.append(meta)
            for name, a in arrs.items():
                arrays[f"base{b}/{name}"] = _f8(a) if a.dtype.kind == "f" else np.ascontiguousarray(a, "<i8")
        member_refs.append({"base": base_index[id(base)], "lag": lag, "lagged": isinstance(m, LaggedMember)})

    local_meta = []
    shared_X = None
    for j, lm in enumerate(model.local_models):
        if isinstance(lm, KnnErrorModel):
            if shared_X is None or lm.X is not shared_X:
                if shared_X is not None:
                    raise ConfigError("knn local models must share one reference set")
                shared_X = lm.X
                arrays["local/X"] = _f8(lm.X)
            arrays[f"local{j}/errors"] = _f8(lm.errors)
            local_meta.append({"kind": "knn", "k": lm.k})
        elif isinstance(lm, RidgeErrorModel):
            arrays[f"local{j}/coef"] = _f8(lm.model.coef)
            arrays[f"local{j}/intercept"] = _f8(lm.model.intercept)
            local_meta.append({"kind": "ridge", "lam": lm.model.lam})
        else:
            raise ConfigError("custom local error models cannot be serialized")

    arrays["global_R"] = _f8(model.global_R)
    arrays["profile/values"] = _f8(model.profile.values)
    arrays["profile/relative"] = _f8(model.profile.relative)
    arrays["mask"] = np.asarray(model.mask, dtype="u1")
    meta = {
        "format": "xcsge-model",
        "version": FORMAT_VERSION,
        "eta": list(model.eta.as_tuple()),
        "score": model.score,
        "task": model.task,
        "renormalize_proba": model.renormalize_proba,
        "epsilon": model.epsilon,
        "local_columns": model.local_columns,
        "local_k": model.local_k,
        "objective": None if not np.isfinite(model.objective) else model.objective,
        "bases": bases,
        "members": member_refs,
        "local_models": local_meta,
        "extra": model.extra,
    }
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype="u1")
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_model(path):
    from .learners import RidgeModel

    path = Path(path)
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    with np.load(path, allow_pickle=False) as z:
        arrays = {k: z[k] for k in z.files}
    meta = json.loads(arrays.pop("meta").tobytes().decode("utf-8"))
    if meta.get("format") != "xcsge-model" or meta.get("version") != FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported model format {meta.get('format')} v{meta.get('version')}")

    bases = []
    for b, bmeta in enumerate(meta["bases"]):
        prefix = f"base{b}/"
        arrs = {k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)}
        bases.append(_MEMBER_TYPES[bmeta["type"]].from_state(bmeta, arrs))
    members = [LaggedMember(bases[r["base"]], r["lag"]) if r["lagged"] else bases[r["base"]]
               for r in meta["members"]]
    local_models = []
    shared_X = arrays.get("local/X")
    for j, lm in enumerate(meta["local_models"]):
        if lm["kind"] == "knn":
            local_models.append(KnnErrorModel(shared_X, arrays[f"local{j}/errors"], lm["k"]))
        else:
            local_models.append(RidgeErrorModel(RidgeModel(
                arrays[f"local{j}/coef"], arrays[f"local{j}/intercept"], lm["lam"])))
    objective = meta["objective"]
    return XcsgeModel(
        members=members,
        eta=EtaTriple(*meta["eta"]),
        global_R=arrays["global_R"],
        local_models=local_models,
        profile=LeadtimeErrorProfile(arrays["profile/values"], arrays["profile/relative"]),
        mask=arrays["mask"].astype(bool),
        score=meta["score"],
        task=meta["task"],
        renormalize_proba=meta["renormalize_proba"],
        epsilon=meta["epsilon"],
        local_columns=meta["local_columns"],
        local_k=meta["local_k"],
        objective=float("nan") if objective is None else objective,
        extra=meta["extra"],
    )


__all__ = [
    "CustomErrorModel",
    "EnsembleConfig",
    "EtaTriple",
    "LaggedMember",
    "XcsgeModel",
    "combine_weights",
    "eta_candidates",
    "eta_objective",
    "expand_time_lagged",
    "fit",
    "fused_predict",
    "load_model",
    "member_predictions",
    "optimize_eta",
    "save_model",
    "set_member_mask",
]
