"""Evaluation metrics, skill scores and table-style reports."""

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, EmptySet, ShapeMismatch, UnknownLabel, ZeroReference, ZeroVariance

PROBA_CLIP = 1e-15


def _pair(pred, truth):
    p = np.asarray(pred, dtype=np.float64)
    y = np.asarray(truth, dtype=np.float64)
    if p.ndim == 1:
        p = p[:, None]
    if y.ndim == 1:
        y = y[:, None]
    if p.shape != y.shape:
        raise ShapeMismatch(f"prediction shape {p.shape} differs from truth shape {y.shape}")
    if p.shape[0] == 0:
        raise EmptySet("metric over zero samples")
    return p, y


def rmse(pred, truth):
    """Root-mean-squared error per target dimension."""
    p, y = _pair(pred, truth)
    return np.sqrt(np.mean((p - y) ** 2, axis=0))


def r2(pred, truth):
    """Coefficient of determination per target dimension; may be negative."""
    p, y = _pair(pred, truth)
    ss_tot = ((y - y.mean(axis=0)) ** 2).sum(axis=0)
    if np.any(ss_tot == 0):
        raise ZeroVariance("R2 is undefined for a constant truth column")
    return 1.0 - ((y - p) ** 2).sum(axis=0) / ss_tot


def _labels(labels, n_classes):
    lab = np.asarray(labels)
    if lab.size and (lab.min() < 0 or lab.max() >= n_classes or not np.all(lab == np.round(lab))):
        raise UnknownLabel(f"labels must be integers in 0..{n_classes - 1}")
    return lab.astype(int)


def log_loss(proba, labels):
    """Mean negative log-probability of the true class, probabilities clipped
    to [1e-15, 1 - 1e-15]."""
    p = np.asarray(proba, dtype=np.float64)
    if p.shape[0] == 0:
        raise EmptySet("log loss over zero samples")
    lab = _labels(labels, p.shape[1])
    true_p = np.clip(p[np.arange(len(lab)), lab], PROBA_CLIP, 1.0 - PROBA_CLIP)
    return float(-np.mean(np.log(true_p)))


def confusion_matrix(pred_labels, labels, n_classes):
    """Counts ``[truth, predicted]`` and the row-normalized rates."""
    t = _labels(labels, n_classes)
    p = _labels(pred_labels, n_classes)
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (t, p), 1)
    rows = counts.sum(axis=1, keepdims=True)
    rates = np.divide(counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    return counts, rates


def macro_f1(pred_labels, labels, n_classes=None):
    """Unweighted mean of per-class F1; a class absent from both predictions
    and truth contributes 0."""
    t = np.asarray(labels)
    p = np.asarray(pred_labels)
    if n_classes is None:
        n_classes = int(max(t.max(initial=0), p.max(initial=0))) + 1
    counts, _ = confusion_matrix(p, t, n_classes)
    tp = np.diag(counts).astype(np.float64)
    fp = counts.sum(axis=0) - tp
    fn = counts.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(n_classes), where=denom > 0)
    return float(f1.mean())


def skill_score(value, reference, orientation="lower-better"):
    """Percentage improvement of ``value`` over ``reference``."""
    if reference == 0:
        raise ZeroReference("skill score needs a nonzero reference")
    if orientation == "lower-better":
        return (reference - value) / reference * 100.0
    if orientation == "higher-better":
        return (value - reference) / reference * 100.0
    raise ValueError(f"unknown orientation {orientation!r}")


ORIENTATION = {
    "rmse": "lower-better",
    "r2": "higher-better",
    "logloss": "lower-better",
    "macro_f1": "higher-better",
}


@dataclass
class MetricReport:
    """Per-entity values of one metric for several models, summarized like
    the Mean / Variance / Minimum / Maximum / Skill Score table rows."""

    metric: str
    models: list
    values: np.ndarray  # entities x models
    reference: str | None = None

    @property
    def orientation(self):
        return ORIENTATION.get(self.metric, "lower-better")

    @property
    def mean(self):
        return self.values.mean(axis=0)

    @property
    def variance(self):
        return self.values.var(axis=0)

    @property
    def minimum(self):
        return self.values.min(axis=0)

    @property
    def maximum(self):
        return self.values.max(axis=0)

    def reference_model(self):
        """Named reference, else the model with the worst mean."""
        if self.reference is not None:
            if self.reference not in self.models:
                raise ConfigError(f"reference model {self.reference!r} not among {self.models}")
            return self.reference
        means = self.mean
        worst = np.argmax(means) if self.orientation == "lower-better" else np.argmin(means)
        return self.models[int(worst)]

    @property
    def skill(self):
        ref = self.mean[self.models.index(self.reference_model())]
        out = []
        for v in self.mean:
            try:
                out.append(skill_score(v, ref, self.orientation))
            except ZeroReference:
                out.append(float("nan"))
        return np.array(out)

    def rows(self):
        return [
            ("Mean", self.mean),
            ("Variance", self.variance),
            ("Minimum", self.minimum),
            ("Maximum", self.maximum),
            ("Skill Score", self.skill),
        ]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([self.metric] + list(self.models))
        for name, vals in self.rows():
            w.writerow([name] + [repr(float(v)) for v in vals])
        return buf.getvalue()

    def to_text(self, digits=4):
        head = [self.metric] + list(self.models)
        body = []
        for name, vals in self.rows():
            if name == "Skill Score":
                body.append([name] + [f"{v:.2f}%" for v in vals])
            else:
                body.append([name] + [f"{v:.{digits}f}" for v in vals])
        widths = [max(len(r[i]) for r in [head] + body) for i in range(len(head))]
        lines = ["  ".join(c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r))
                 for r in [head] + body]
        return "\n".join(lines) + "\n"
