"""Friedman test and Nemenyi critical differences over ranked model scores."""

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc
from scipy.stats import rankdata

from .errors import DegenerateShape, UnsupportedA, UnsupportedAlpha

# Critical values q_alpha of the two-tailed Nemenyi test for A = 2..10
# algorithms: studentized range quantiles q(alpha; A, inf) divided by sqrt(2).
NEMENYI_Q = {
    0.05: (1.960, 2.343, 2.569, 2.728, 2.850, 2.949, 3.031, 3.102, 3.164),
    0.10: (1.645, 2.052, 2.291, 2.459, 2.589, 2.693, 2.780, 2.855, 2.920),
}


@dataclass(frozen=True)
class RankMatrix:
    ranks: np.ndarray  # D x A, rank 1 = best

    @property
    def average(self):
        return self.ranks.mean(axis=0)

    @property
    def shape(self):
        return self.ranks.shape


def rank_models(scores, orientation="lower-better"):
    """Rank algorithms within every dataset row, averaging ties."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] < 2 or s.shape[1] < 2:
        raise DegenerateShape(f"need at least 2 datasets x 2 algorithms, got shape {s.shape}")
    if orientation == "higher-better":
        s = -s
    elif orientation != "lower-better":
        raise ValueError(f"unknown orientation {orientation!r}")
    return RankMatrix(rankdata(s, axis=1))


@dataclass(frozen=True)
class FriedmanResult:
    statistic: float
    p_value: float
    dof: int


def friedman_test(ranks):
    """Chi-square form of the Friedman statistic with its upper-tail p-value."""
    r = ranks.ranks if isinstance(ranks, RankMatrix) else np.asarray(ranks, dtype=np.float64)
    if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 2:
        raise DegenerateShape(f"need at least 2 datasets x 2 algorithms, got shape {r.shape}")
    D, A = r.shape
    avg = r.mean(axis=0)
    stat = 12.0 * D / (A * (A + 1)) * (np.sum(avg**2) - A * (A + 1) ** 2 / 4.0)
    stat = max(float(stat), 0.0)
    dof = A - 1
    # chi-square survival function via the regularized upper incomplete gamma
    p = float(gammaincc(dof / 2.0, stat / 2.0))
    return FriedmanResult(stat, p, dof)


def nemenyi_q(A, alpha=0.05):
    if alpha not in NEMENYI_Q:
        raise UnsupportedAlpha(f"alpha must be one of {sorted(NEMENYI_Q)}, got {alpha}")
    if not 2 <= A <= 10:
        raise UnsupportedA(f"embedded Nemenyi table covers 2..10 algorithms, got {A}")
    return NEMENYI_Q[alpha][A - 2]


def nemenyi_critical_difference(A, D, alpha=0.05):
    return nemenyi_q(A, alpha) * math.sqrt(A * (A + 1) / (6.0 * D))


@dataclass(frozen=True)
class NemenyiResult:
    critical_difference: float
    average_ranks: np.ndarray
    significant: np.ndarray  # A x A booleans


def nemenyi_test(ranks, alpha=0.05):
    """Pairs whose average ranks differ by more than the critical difference."""
    r = ranks if isinstance(ranks, RankMatrix) else RankMatrix(np.asarray(ranks, dtype=np.float64))
    D, A = r.shape
    cd = nemenyi_critical_difference(A, D, alpha)
    avg = r.average
    sig = np.abs(avg[:, None] - avg[None, :]) > cd
    np.fill_diagonal(sig, False)
    return NemenyiResult(cd, avg, sig)


def cd_diagram_csv(models, result):
    """Average ranks and the critical difference, one model per line."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["model", "average_rank", "critical_difference"])
    order = np.argsort(result.average_ranks, kind="stable")
    for i in order:
        w.writerow([models[i], repr(float(result.average_ranks[i])), repr(float(result.critical_difference))])
    return buf.getvalue()


def pairwise_csv(models, result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(models))
    for i, m in enumerate(models):
        w.writerow([m] + [str(bool(v)).lower() for v in result.significant[i]])
    return buf.getvalue()
