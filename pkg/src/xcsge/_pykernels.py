"""Pure numpy implementations of the hot kernels.

Reference behaviour for the compiled ``_ckernels`` module; both must agree to
rounding. Distances are accumulated feature by feature in index order so that
exact ties break identically in both backends.
"""

import numpy as np

_CHUNK_ELEMS = 4_000_000


def knn_mean(ref_X, ref_Y, query_X, k, exclude_self=False):
    """Unweighted mean of ``ref_Y`` over the ``k`` Euclidean-nearest references.

    Ties at equal distance go to the lower reference index. With
    ``exclude_self`` the queries must be the reference rows themselves and
    query ``i`` never sees reference ``i`` (leave-one-out).
    """
    ref_X = np.ascontiguousarray(ref_X, dtype=np.float64)
    ref_Y = np.ascontiguousarray(ref_Y, dtype=np.float64)
    query_X = np.ascontiguousarray(query_X, dtype=np.float64)
    n_ref, n_feat = ref_X.shape
    n_q = query_X.shape[0]
    out = np.empty((n_q, ref_Y.shape[1]), dtype=np.float64)
    chunk = max(1, _CHUNK_ELEMS // max(n_ref, 1))
    for start in range(0, n_q, chunk):
        stop = min(n_q, start + chunk)
        q = query_X[start:stop]
        d2 = np.zeros((stop - start, n_ref), dtype=np.float64)
        for f in range(n_feat):
            diff = q[:, f, None] - ref_X[None, :, f]
            d2 += diff * diff
        if exclude_self:
            rows = np.arange(start, stop)
            d2[rows - start, rows] = np.inf
        # stable sort keeps lower indices first among equal distances
        idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
        acc = np.zeros((stop - start, ref_Y.shape[1]), dtype=np.float64)
        for i in range(k):
            acc += ref_Y[idx[:, i]]
        out[start:stop] = acc / k
    return out


def fuse(P, wg, wk, Q, eta_local, epsilon, want_weights=False):
    """Fuse member predictions with global, local and time weights.

    Parameters
    ----------
    P : ndarray, shape (N, J, T, M)
        Member predictions per sample and leadtime.
    wg : ndarray, shape (J, M)
        Global weights.
    wk : ndarray, shape (J, T, M)
        Time weights per leadtime.
    Q : ndarray, shape (N, J, M)
        Nonnegative local error estimates; gated here with ``eta_local``.

    Returns
    -------
    out : ndarray, shape (N, T, M)
    weights : ndarray, shape (N, T, J, M) or None
    """
    with np.errstate(over="ignore"):
        inv = 1.0 / (np.power(Q, eta_local) + epsilon)
    tot = inv.sum(axis=1, keepdims=True)
    if not np.all(tot > 0):
        # every estimate overflowed in some column
        inv = np.where(tot > 0, inv, 1.0)
        tot = inv.sum(axis=1, keepdims=True)
    wl = inv / tot
    wbar = wg[None, :, None, :] * wl[:, :, None, :] * wk[None, :, :, :]
    col = wbar.sum(axis=1, keepdims=True)
    zero = ~(col > 0)
    if np.any(zero):
        J = P.shape[1]
        wbar = np.where(zero, 1.0 / J, wbar)
        col = np.where(zero, 1.0, col)
    w = wbar / col
    out = (w * P).sum(axis=1)
    if want_weights:
        return out, np.ascontiguousarray(w.transpose(0, 2, 1, 3))
    return out, None
