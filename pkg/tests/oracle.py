"""Independent scalar reference implementations used as test oracles.

Plain Python loops and ``math`` only; nothing here imports the package, so
agreement with it is evidence rather than tautology.
"""

import math


def gate(errors, eta, eps):
    """Full raw-then-normalized gate for one dimension, numerator kept."""
    s = sum(errors)
    raw = [s / (e**eta + eps) for e in errors]
    tot = sum(raw)
    return [r / tot for r in raw]


def knn_mean(ref_X, ref_Y, x, k):
    """Mean of the k nearest rows' targets, ties to the lower index."""
    d = []
    for i, row in enumerate(ref_X):
        d.append((math.fsum((a - b) ** 2 for a, b in zip(row, x)), i))
    d.sort()
    idx = [i for _, i in d[:k]]
    return [sum(ref_Y[i][m] for i in idx) / k for m in range(len(ref_Y[0]))]


def xcsge_predict(P_ens, Y_ens, X_ens, p_query, x_query, t, eta, k, eps):
    """Straight-line ensemble prediction.

    P_ens[n][j][t][m] member predictions on the ensemble rows, Y_ens[n][m]
    truths, X_ens[n] local features; p_query[j][m] member predictions for
    the query at leadtime ``t``; ``eta`` = (global, local, time).
    """
    N, J, T, M = len(P_ens), len(P_ens[0]), len(P_ens[0][0]), len(Y_ens[0])
    sq = lambda a, b: (a - b) ** 2
    # per-sample error summed over leadtimes
    e = [[[sum(sq(P_ens[n][j][tt][m], Y_ens[n][m]) for tt in range(T)) for m in range(M)]
          for j in range(J)] for n in range(N)]
    R = [[sum(e[n][j][m] for n in range(N)) / N for m in range(M)] for j in range(J)]
    # per-leadtime error profile
    V = [[[sum(sq(P_ens[n][j][tt][m], Y_ens[n][m]) for n in range(N)) / N for m in range(M)]
          for tt in range(T)] for j in range(J)]
    rel = [[[V[j][tt][m] / sum(V[j][u][m] for u in range(T)) for m in range(M)]
            for tt in range(T)] for j in range(J)]
    # local error estimates
    q = [knn_mean(X_ens, [e[n][j] for n in range(N)], x_query, k) for j in range(J)]
    out = []
    for m in range(M):
        wg = gate([R[j][m] for j in range(J)], eta[0], eps)
        wl = gate([max(q[j][m], 0.0) for j in range(J)], eta[1], eps)
        wk = gate([rel[j][t][m] for j in range(J)], eta[2], eps)
        wbar = [wg[j] * wl[j] * wk[j] for j in range(J)]
        s = sum(wbar)
        out.append(sum(wbar[j] / s * p_query[j][m] for j in range(J)))
    return out


def friedman(ranks):
    """Chi-square Friedman statistic and p-value from a D x A rank table.

    The p-value uses the closed-form chi-square survival function (series
    for even and odd degrees of freedom) rather than a gamma routine.
    """
    D, A = len(ranks), len(ranks[0])
    avg = [sum(r[a] for r in ranks) / D for a in range(A)]
    stat = 12.0 * D / (A * (A + 1)) * (sum(v * v for v in avg) - A * (A + 1) ** 2 / 4.0)
    k = A - 1
    x = stat
    if k % 2 == 0:
        term, total = 1.0, 1.0
        for i in range(1, k // 2):
            term *= (x / 2) / i
            total += term
        p = math.exp(-x / 2) * total
    else:
        p = math.erfc(math.sqrt(x / 2))
        term = math.sqrt(2 * x / math.pi) * math.exp(-x / 2) if x > 0 else 0.0
        for i in range(1, (k + 1) // 2):
            p += term
            term *= x / (2 * i + 1)
    return stat, p
