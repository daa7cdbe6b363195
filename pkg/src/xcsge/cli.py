"""Command-line entry point.

Subcommands: ``train``, ``crossval``, ``ranktest``, ``predict``, ``synth``.

Exit codes
----------
0  success
2  configuration or I/O error (missing files, bad JSON, unknown keys)
3  data validation error (schema, shapes, coverage, leadtimes)
4  numeric failure (non-finite values, singular systems)
"""

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiment
from .data import LeadtimeFrame, SynthConfig, synth_random_walk_dataset, synth_regime_dataset, write_csv
from .ensemble import load_model, max_member_lag, set_member_mask
from .errors import ConfigError, ParseError, XcsgeError
from .stats import cd_diagram_csv, friedman_test, nemenyi_test, pairwise_csv, rank_models


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _load_config(args):
    if not args.config:
        raise ConfigError("--config is required")
    cfg = experiment.ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "reference_model", None):
        cfg.reference_model = args.reference_model
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if cfg.seed is None:
        raise ConfigError("a seed is required (config key 'seed' or --seed)")
    return cfg


def _out_dir(args, cfg=None):
    if args.out:
        return Path(args.out)
    if cfg is not None:
        return cfg.resolve(cfg.out)
    raise ConfigError("--out is required")


def cmd_train(args):
    cfg = _load_config(args)
    model = experiment.train(cfg)
    out = _out_dir(args, cfg)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.npz")
    w = model.global_weights()
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["member"] + [f"w_{m}" for m in range(w.shape[1])])
    for mid, row in zip(model.member_ids, w):
        wr.writerow([mid] + [repr(float(v)) for v in row])
    _write(out / "global_weights.csv", buf.getvalue())
    report = {
        "eta": {"global": model.eta.eta_global, "local": model.eta.eta_local, "time": model.eta.eta_time},
        "local_k": model.local_k,
        "objective": None if not math.isfinite(model.objective) else model.objective,
        "members": model.member_ids,
        "masked": [m for m, keep in zip(model.member_ids, model.mask) if not keep],
        "seed": cfg.seed,
    }
    _write(out / "train_report.json", json.dumps(report, indent=2, sort_keys=True) + "\n")
    print(f"eta = ({model.eta.eta_global:g}, {model.eta.eta_local:g}, {model.eta.eta_time:g})"
          f"  local k = {model.local_k}")
    print(f"model written to {out / 'model.npz'}")
    return 0


def cmd_crossval(args):
    cfg = _load_config(args)
    fold_results, models, reports = experiment.crossval(cfg)
    out = _out_dir(args, cfg)
    experiment.write_crossval(out, cfg, fold_results, models, reports)
    for metric, rep in reports.items():
        print(f"{metric} (reference: {rep.reference_model()})")
        print(rep.to_text())
    print(f"reports written to {out}")
    return 0


def read_score_table(path):
    """Score CSV -> (models, entity labels, D x A values).

    The first column holds entity labels when its header is ``fold``,
    ``entity``, ``dataset`` or empty, or when any entry is non-numeric.
    """
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"scores file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise ParseError(f"{path}: need a header and at least one row")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    for i, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ParseError(f"{path}:{i}: expected {len(header)} fields, got {len(r)}")

    def numeric(s):
        try:
            float(s)
            return True
        except ValueError:
            return False

    labelled = header[0].lower() in ("fold", "entity", "dataset", "") or not all(numeric(r[0]) for r in body)
    start = 1 if labelled else 0
    labels = [r[0] for r in body] if labelled else [str(i) for i in range(len(body))]
    values = np.empty((len(body), len(header) - start))
    for i, r in enumerate(body):
        for a, cell in enumerate(r[start:]):
            try:
                values[i, a] = float(cell)
            except ValueError:
                raise ParseError(f"{path}:{i + 2}: non-numeric score {cell!r}") from None
            if not math.isfinite(values[i, a]):
                raise ParseError(f"{path}:{i + 2}: non-finite score")
    return header[start:], labels, values


def cmd_ranktest(args):
    if not args.scores:
        raise ConfigError("ranktest needs a scores CSV")
    models, labels, values = read_score_table(args.scores)
    ranks = rank_models(values, args.orientation)
    fr = friedman_test(ranks)
    nem = nemenyi_test(ranks, args.alpha)
    summary = {
        "statistic": fr.statistic,
        "p_value": fr.p_value,
        "dof": fr.dof,
        "alpha": args.alpha,
        "orientation": args.orientation,
        "critical_difference": nem.critical_difference,
        "average_ranks": dict(zip(models, [float(v) for v in nem.average_ranks])),
        "significant_pairs": [[models[i], models[j]] for i in range(len(models))
                              for j in range(i + 1, len(models)) if nem.significant[i, j]],
    }
    if args.out:
        out = Path(args.out)
        _write(out / "cd_diagram.csv", cd_diagram_csv(models, nem))
        _write(out / "pairwise.csv", pairwise_csv(models, nem))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["entity"] + models)
        for lab, row in zip(labels, ranks.ranks):
            w.writerow([lab] + [repr(float(v)) for v in row])
        _write(out / "ranks.csv", buf.getvalue())
        _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"Friedman chi2 = {fr.statistic:.6g}  dof = {fr.dof}  p = {fr.p_value:.6g}")
    print(f"Nemenyi CD (alpha={args.alpha}) = {nem.critical_difference:.6g}")
    for m, r in sorted(summary["average_ranks"].items(), key=lambda kv: kv[1]):
        print(f"  {m}: {r:.4f}")
    for a, b in summary["significant_pairs"]:
        print(f"  significant: {a} vs {b}")
    return 0


def cmd_predict(args):
    if not args.model or not args.input:
        raise ConfigError("predict needs --model and --input")
    model = load_model(args.model)
    if args.mask:
        masked = set(args.mask.split(","))
        unknown = masked - set(model.member_ids)
        if unknown:
            raise ConfigError(f"unknown members to mask: {sorted(unknown)}")
        model = set_member_mask(model, [m not in masked for m in model.member_ids])
    if not Path(args.input).exists():
        raise ConfigError(f"input not found: {args.input}")
    ds = experiment.prepare_for_prediction(model, args.input)
    leadtimes = None if args.leadtime in (None, "all") else [int(args.leadtime)]
    values, weights = model.predict(ds, leadtimes=leadtimes, explain=args.explain)
    rows = ds.valid_rows(max_member_lag(model.active_members))
    lts = list(range(model.n_leadtimes)) if leadtimes is None else leadtimes
    scale = ds.target_scale or 1.0
    names = ds.target_names if ds.task == "regression" else [f"p_{c}" for c in ds.classes]
    header = ["sample_id", "leadtime"] + [f"pred_{n}" for n in names]
    if args.explain:
        header += [f"w_{mid}_{n}" for n in names for mid in model.member_ids]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for i, r in enumerate(rows):
        for k, t in enumerate(lts):
            pred = values[i, k] * (scale if ds.task == "regression" else 1.0)
            line = [ds.sample_ids[r], t] + [repr(float(v)) for v in pred]
            if args.explain:
                line += [repr(float(weights[i, k, j, m]))
                         for m in range(len(names)) for j in range(model.n_members)]
            w.writerow(line)
    if args.out:
        _write(args.out, buf.getvalue())
        print(f"{len(rows) * len(lts)} predictions written to {args.out}")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def cmd_synth(args):
    d = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config not found: {path}")
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
    kind = d.pop("kind", "regime")
    if args.seed is not None:
        d["seed"] = args.seed
    if not args.out:
        raise ConfigError("--out is required")
    try:
        if kind == "regime":
            for key in ("regime_fractions", "feature_noise"):
                if key in d:
                    d[key] = tuple(d[key])
            ds = synth_regime_dataset(SynthConfig(**d))
        elif kind == "random_walk":
            if "frame" in d:
                d["frame"] = LeadtimeFrame(**d["frame"])
            ds = synth_random_walk_dataset(**d)
        else:
            raise ConfigError(f"unknown synthetic dataset kind {kind!r}")
    except TypeError as exc:
        raise ConfigError(f"bad synth config: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(ds, out / "data.csv", out / "schema.json")
    print(f"{ds.n_samples} rows written to {out / 'data.csv'}")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="xcsge", description="Soft gating ensembles for multi-leadtime forecasts.")
    p.add_argument("--print-defaults", action="store_true", help="print the default experiment config and exit")
    sub = p.add_subparsers(dest="command")

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--out", help="output directory or file")
        sp.add_argument("--seed", type=int, help="overrides the config seed")

    sp = sub.add_parser("train", help="fit members and the ensemble, write a model")
    common(sp)
    sp.add_argument("--threads", type=int)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("crossval", help="k-fold evaluation with metric reports")
    common(sp)
    sp.add_argument("--reference-model", help="reference for skill scores (default: worst mean)")
    sp.add_argument("--threads", type=int, help="worker threads for folds (env XCSGE_THREADS)")
    sp.set_defaults(func=cmd_crossval)

    sp = sub.add_parser("ranktest", help="Friedman test and Nemenyi critical difference")
    sp.add_argument("scores", nargs="?", help="score CSV (entities x models)")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--alpha", type=float, default=0.05)
    sp.add_argument("--orientation", choices=["lower-better", "higher-better"], default="lower-better")
    sp.set_defaults(func=cmd_ranktest)

    sp = sub.add_parser("predict", help="predict with a saved model")
    sp.add_argument("--model", help="model file written by train")
    sp.add_argument("--input", help="input CSV in the training schema")
    sp.add_argument("--leadtime", default="all", help="leadtime index or 'all'")
    sp.add_argument("--explain", action="store_true", help="add per-member weight columns")
    sp.add_argument("--mask", help="comma-separated member ids to exclude")
    sp.add_argument("--out", help="output CSV (default: stdout)")
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("synth", help="write a synthetic dataset and its schema")
    common(sp)
    sp.set_defaults(func=cmd_synth)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        print(json.dumps(experiment.ExperimentConfig().to_dict(), indent=2, sort_keys=True))
        return 0
    if not args.command:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except XcsgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
