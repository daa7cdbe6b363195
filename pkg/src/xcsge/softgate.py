"""Soft gating: map nonnegative error scores to normalized member weights.

The raw gate of a member with error ``rho`` against the reference set
``Omega`` (one row per member) is::

    raw = sum_j Omega_j / (rho ** eta + eps)

and the gate is the raw value divided, per target dimension, by the sum of
the raw values of every member in ``Omega``. ``eta = 0`` gives uniform
weights; growing ``eta`` moves from weighting towards hard selection.
"""

import numpy as np

from .errors import EmptyEnsemble, NonFiniteInput

DEFAULT_EPSILON = 1e-9

# Beyond this exponent the gate is hard selection at double precision.
ETA_MAX = 64.0


def _as_error_matrix(values, name="reference_errors"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a J x M matrix, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyEnsemble(f"{name} holds no ensemble members")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains NaN or infinite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} must be nonnegative")
    return arr


def _check_eta(eta):
    eta = float(eta)
    if not np.isfinite(eta):
        raise NonFiniteInput("eta must be finite")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    return eta


def soft_gate_raw(reference_errors, member_error, eta, epsilon=DEFAULT_EPSILON):
    """Unnormalized gate value of one member, per target dimension.

    Parameters
    ----------
    reference_errors : array_like, shape (J, M)
        Error scores of all ensemble members.
    member_error : array_like, shape (M,)
        Error of the member being weighted.
    eta : float
        Nonnegative gating exponent.
    epsilon : float
        Positive stabilizer added to the denominator.

    Returns
    -------
    ndarray, shape (M,)
    """
    omega = _as_error_matrix(reference_errors)
    rho = np.atleast_1d(np.asarray(member_error, dtype=np.float64))
    if not np.all(np.isfinite(rho)):
        raise NonFiniteInput("member_error contains NaN or infinite entries")
    if np.any(rho < 0):
        raise ValueError("member_error must be nonnegative")
    if rho.shape != (omega.shape[1],):
        raise ValueError(f"member_error has shape {rho.shape}, expected ({omega.shape[1]},)")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eta = _check_eta(eta)
    return omega.sum(axis=0) / (rho**eta + epsilon)


def gate_columns(errors, eta, epsilon=DEFAULT_EPSILON):
    """Normalized gate along axis 0 of an error array of any trailing shape.

    No validation; callers pass nonnegative finite arrays. The numerator sum
    of the raw gate is common to every member and cancels in the
    normalization, so it is left out. This keeps columns whose errors are all
    zero well defined (they come out uniform).
    """
    with np.errstate(over="ignore"):
        inv = 1.0 / (np.power(errors, eta) + epsilon)
    total = inv.sum(axis=0)
    bad = ~(total > 0) | ~np.isfinite(total)
    if np.any(bad):
        # every member overflowed: fall back to uniform
        inv = np.where(bad, 1.0, inv)
        total = inv.sum(axis=0)
    return inv / total


def soft_gate(reference_errors, eta, epsilon=DEFAULT_EPSILON):
    """Normalized gate weights for every member of ``reference_errors``.

    Returns a (J, M) weight matrix whose columns sum to one.
    """
    omega = _as_error_matrix(reference_errors)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    eta = _check_eta(eta)
    return gate_columns(omega, eta, epsilon)
