"""Experiment configuration and the train / cross-validation pipelines."""

import csv
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .data import (
    Schema,
    SplitPlan,
    apply_transform,
    kfold_splits,
    load_csv,
    normalize_target_max,
    standardize,
    train_split,
    training_target_max,
)
from .ensemble import (
    EnsembleConfig,
    EtaTriple,
    expand_time_lagged,
    fit,
    max_member_lag,
    member_predictions,
)
from .errors import ConfigError, DatasetNotFound, IncompleteCoverage, ZeroVariance
from .learners import PrecomputedMember, fit_member, load_precomputed
from .metrics import MetricReport, log_loss, macro_f1, r2, rmse
from .weighting import LocalModelSpec

MEMBER_KINDS = ("ridge", "knn", "persistence", "precomputed")


@dataclass
class ExperimentConfig:
    """Everything a train or crossval run needs; loaded from JSON.

    Relative paths resolve against the config file's directory.
    """

    dataset: dict = field(default_factory=lambda: {"csv": "data.csv", "schema": "schema.json"})
    split: dict = field(default_factory=lambda: {
        "folds": 10, "base_fraction": 0.7, "shuffle_train": True, "group_key": False})
    members: list = field(default_factory=lambda: [
        {"id": "ridge", "kind": "ridge", "lam": 1.0},
        {"id": "knn", "kind": "knn", "k": 10},
    ])
    eta_grid: list = field(default_factory=lambda: [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0])
    eta: list | None = None
    c: float = 0.0
    epsilon: float = 1e-9
    local_model: dict = field(default_factory=lambda: {"kind": "knn", "k": [9, 50, 100], "columns": None})
    score: str | None = None
    lags: int = 1
    masked_lags: list = field(default_factory=list)
    renormalize_proba: bool = True
    refine: bool = False
    standardize: bool = True
    normalize_target: bool = True
    reference_model: str | None = None
    seed: int | None = None
    threads: int | None = None
    out: str = "out"
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**d, base_dir=str(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self):
        d = asdict(self)
        d.pop("base_dir")
        return d

    def validate(self):
        if not self.members:
            raise ConfigError("config lists no members")
        ids = [m.get("id", m.get("kind")) for m in self.members]
        if len(set(ids)) != len(ids):
            raise ConfigError(f"member ids must be unique: {ids}")
        for m in self.members:
            if m.get("kind") not in MEMBER_KINDS:
                raise ConfigError(f"member kind must be one of {MEMBER_KINDS}, got {m.get('kind')!r}")
            if m["kind"] == "precomputed" and "path" not in m:
                raise ConfigError(f"precomputed member {m.get('id')!r} needs a path")
        if int(self.lags) < 1:
            raise ConfigError("lags must be >= 1")
        if self.eta is not None and len(self.eta) != 3:
            raise ConfigError("eta must list three values (global, local, time)")
        self.plan()

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def plan(self):
        return SplitPlan(**self.split)

    def ensemble_config(self, task):
        lm = dict(self.local_model)
        spec = LocalModelSpec(
            kind=lm.get("kind", "knn"),
            k=lm.get("k", 9),
            lam=lm.get("lam", 1.0),
            columns=tuple(lm["columns"]) if lm.get("columns") else None,
        )
        score = self.score or ("logloss" if task == "classification" else "squared")
        return EnsembleConfig(
            eta_grid=self.eta_grid,
            eta=EtaTriple(*self.eta) if self.eta is not None else None,
            c=float(self.c),
            epsilon=float(self.epsilon),
            local=spec,
            score=score,
            renormalize_proba=self.renormalize_proba,
            refine=self.refine,
        )


def resolve_threads(threads=None):
    if threads is None:
        threads = os.environ.get("XCSGE_THREADS") or 1
    try:
        threads = int(threads)
    except ValueError:
        raise ConfigError(f"thread count must be an integer, got {threads!r}") from None
    return max(1, threads)


def load_dataset(cfg):
    csv_path = cfg.resolve(cfg.dataset["csv"])
    schema_path = cfg.resolve(cfg.dataset["schema"])
    if not csv_path.exists():
        raise DatasetNotFound(f"dataset not found: {csv_path}")
    schema = Schema.load(schema_path)
    return load_csv(csv_path, schema), schema


def prepare(ds, schema, cfg, fit_rows):
    """Standardize features and normalize targets with training-row statistics."""
    transform = None
    if cfg.standardize:
        ds, transform = standardize(ds, fit_rows)
    if cfg.normalize_target and ds.task == "regression":
        scale = schema.target_max if schema.target_max else training_target_max(ds, fit_rows)
        if scale > 0:
            ds = normalize_target_max(ds, scale)
    return ds, transform


def _filter_rows(ds, rows, flt):
    if not flt:
        return rows
    name = flt["column"]
    vals = ds.aux[name][rows] if name in ds.aux else ds.inputs(rows, 0, [name])[:, 0]
    keep = np.ones(len(rows), dtype=bool)
    if "equals" in flt:
        keep &= vals == flt["equals"]
    if "min" in flt:
        keep &= vals >= flt["min"]
    if "max" in flt:
        keep &= vals < flt["max"]
    if not keep.any():
        raise ConfigError(f"train_filter {flt} leaves no rows")
    return rows[keep]


def load_precomputed_members(cfg, ds):
    """Precomputed members keyed by id, loaded once per run."""
    out = {}
    proba = ds.task == "classification"
    for spec in cfg.members:
        if spec["kind"] != "precomputed":
            continue
        m = load_precomputed(cfg.resolve(spec["path"]), id=spec.get("id"), proba=proba)
        if m.n_outputs != ds.n_targets:
            raise ConfigError(f"precomputed member {m.id!r} has {m.n_outputs} outputs, dataset {ds.n_targets}")
        out[m.id] = m
    return out


def build_members(cfg, ds, base_rows, precomputed):
    members = []
    for spec in cfg.members:
        kind = spec["kind"]
        mid = spec.get("id", kind)
        if kind == "precomputed":
            m = precomputed[mid]
            members.append(PrecomputedMember(m.id, m.sample_ids, m.leadtimes, m.values,
                                             scale=ds.target_scale or 1.0))
            continue
        rows = _filter_rows(ds, base_rows, spec.get("train_filter"))
        params = {k: v for k, v in spec.items() if k not in ("id", "kind", "columns", "train_filter")}
        members.append(fit_member(kind, ds, rows, id=mid, columns=spec.get("columns"), **params))
    if int(cfg.lags) > 1:
        members = expand_time_lagged(members, int(cfg.lags))
    return members


def member_mask(cfg, members):
    masked = set(int(v) for v in cfg.masked_lags)
    return np.array([getattr(m, "lag", 0) not in masked for m in members], dtype=bool)


def _required_lag(cfg):
    return int(cfg.lags) - 1


def _check_coverage(precomputed, ds, rows, lag):
    for m in precomputed.values():
        need = set()
        for l in range(lag + 1):
            need.update(ds.sample_ids[rows - l])
        missing = m.missing(sorted(need), range(ds.n_leadtimes))
        if missing:
            raise IncompleteCoverage(missing)


def evaluate_predictions(pred, truth, task):
    """Metric values of flattened (sample, leadtime) predictions."""
    if task == "classification":
        labels = np.argmax(truth, axis=1)
        return {"logloss": log_loss(pred, labels),
                "macro_f1": macro_f1(np.argmax(pred, axis=1), labels, truth.shape[1])}
    out = {"rmse": float(np.mean(rmse(pred, truth)))}
    try:
        out["r2"] = float(np.mean(r2(pred, truth)))
    except ZeroVariance:
        out["r2"] = float("nan")
    return out


def _flat(values, truth):
    """(N, T, M) predictions against (N, M) truth, flattened over leadtimes."""
    N, T, M = values.shape
    return values.reshape(N * T, M), np.repeat(truth, T, axis=0)


def run_fold(cfg, ds_raw, schema, split, precomputed):
    fit_rows = np.concatenate([split.base, split.ensemble])
    ds, _ = prepare(ds_raw, schema, cfg, fit_rows)
    members = build_members(cfg, ds, split.base, precomputed)
    mask = member_mask(cfg, members)
    ens_cfg = cfg.ensemble_config(ds.task)
    model = fit(members, ds, split.ensemble, ens_cfg, mask=mask)
    truth = ds.targets[split.test]
    results = {}
    P = member_predictions(members, ds, split.test)
    for j, m in enumerate(members):
        if mask[j]:
            pred, y = _flat(P[:, j], truth)
            results[m.id] = evaluate_predictions(pred, y, ds.task)
    values, _ = model.predict(ds, split.test)
    pred, y = _flat(values, truth)
    results["XCSGE"] = evaluate_predictions(pred, y, ds.task)
    return results, model


def crossval(cfg, threads=None):
    """Run every fold. Returns (per-fold results, fitted models, metric reports)."""
    ds, schema = load_dataset(cfg)
    if cfg.seed is None:
        raise ConfigError("a seed is required")
    precomputed = load_precomputed_members(cfg, ds)
    rows = ds.valid_rows(_required_lag(cfg))
    splits = kfold_splits(ds, cfg.plan(), rows=rows, seed=int(cfg.seed))
    _check_coverage(precomputed, ds, rows, _required_lag(cfg))

    def job(split):
        return run_fold(cfg, ds, schema, split, precomputed)

    n_threads = resolve_threads(cfg.threads)
    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            outcomes = list(pool.map(job, splits))
    else:
        outcomes = [job(s) for s in splits]
    fold_results = [o[0] for o in outcomes]
    models = [o[1] for o in outcomes]
    names = list(fold_results[0])
    metrics = list(fold_results[0][names[0]])
    reports = {}
    for metric in metrics:
        values = np.array([[fr[name][metric] for name in names] for fr in fold_results])
        reports[metric] = MetricReport(metric, names, values, cfg.reference_model)
    return fold_results, models, reports


def write_crossval(out_dir, cfg, fold_results, models, reports):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fold", "model", "metric", "value"])
    for f, fr in enumerate(fold_results):
        for name, vals in fr.items():
            for metric, v in vals.items():
                w.writerow([f, name, metric, repr(float(v))])
    (out / "folds.csv").write_text(buf.getvalue(), encoding="utf-8")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["fold", "eta_global", "eta_local", "eta_time", "local_k", "objective"])
    for f, m in enumerate(models):
        w.writerow([f] + [repr(float(v)) for v in m.eta.as_tuple()] + [m.local_k, repr(float(m.objective))])
    (out / "eta.csv").write_text(buf.getvalue(), encoding="utf-8")

    text = []
    for metric, rep in reports.items():
        (out / f"report_{metric}.csv").write_text(rep.to_csv(), encoding="utf-8")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["fold"] + rep.models)
        for f, row in enumerate(rep.values):
            w.writerow([f] + [repr(float(v)) for v in row])
        (out / f"scores_{metric}.csv").write_text(buf.getvalue(), encoding="utf-8")
        text.append(f"{metric} over {len(rep.values)} folds (reference: {rep.reference_model()})\n")
        text.append(rep.to_text())
        text.append("\n")
    (out / "report.txt").write_text("".join(text), encoding="utf-8")
    run = {"config": cfg.to_dict(), "seed": cfg.seed, "kernel_backend": kernels.BACKEND}
    (out / "run.json").write_text(json.dumps(run, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def train(cfg):
    """Fit members on a base split and the ensemble on the ensemble split of
    all usable rows. Returns the fitted model (with preprocessing metadata in
    ``model.extra``)."""
    ds, schema = load_dataset(cfg)
    if cfg.seed is None:
        raise ConfigError("a seed is required")
    precomputed = load_precomputed_members(cfg, ds)
    rows = ds.valid_rows(_required_lag(cfg))
    _check_coverage(precomputed, ds, rows, _required_lag(cfg))
    base, ens = train_split(ds, cfg.plan(), rows=rows, seed=int(cfg.seed))
    ds, transform = prepare(ds, schema, cfg, rows)
    members = build_members(cfg, ds, base, precomputed)
    model = fit(members, ds, ens, cfg.ensemble_config(ds.task), mask=member_mask(cfg, members))
    model.extra = {
        "schema": schema.to_dict(),
        "transform": None if transform is None else transform.to_dict(),
        "target_scale": ds.target_scale,
        "config": cfg.to_dict(),
    }
    return model


def prepare_for_prediction(model, csv_path):
    """Load an input CSV with the schema and preprocessing stored in ``model``."""
    from .data import FeatureTransform

    extra = model.extra
    if "schema" not in extra:
        raise ConfigError("model carries no schema; it was not produced by the train command")
    schema = Schema.from_dict(extra["schema"])
    ds = load_csv(csv_path, schema)
    if extra.get("transform"):
        ds = apply_transform(ds, FeatureTransform.from_dict(extra["transform"]))
    if extra.get("target_scale"):
        ds = normalize_target_max(ds, extra["target_scale"])
    return ds
