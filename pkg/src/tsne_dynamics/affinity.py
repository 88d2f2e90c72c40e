"""High- and low-dimensional similarity matrices.

``P`` is built from Gaussian conditionals whose bandwidths are calibrated
to a target perplexity, ``Q`` from the Student-t kernel on the 2-D map, and
``S_alpha`` is the exaggerated gradient kernel that drives each update.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import CalibrationError, DegenerateBandwidthError

LOG_TAU2_BRACKET = (-40.0, 40.0)


def as_data_matrix(X):
    """Validate an n x p data matrix (n >= 3, p >= 1, finite)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"data must be 2-D, got shape {X.shape}")
    n, p = X.shape
    if n < 3:
        raise ValueError(f"need at least 3 points, got {n}")
    if p < 1:
        raise ValueError("data dimension must be >= 1")
    if not np.all(np.isfinite(X)):
        raise ValueError("data has non-finite entries")
    return X


@dataclass(frozen=True)
class Bandwidths:
    """Per-point squared bandwidths tau_i^2 and the perplexity they target."""

    tau2: np.ndarray
    target_perplexity: float
    achieved_perplexity: np.ndarray = field(default=None, repr=False)
    degenerate: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        tau2 = np.asarray(self.tau2, dtype=np.float64)
        if tau2.ndim != 1 or not np.all(np.isfinite(tau2)) or np.any(tau2 <= 0):
            raise ValueError("tau2 must be a 1-D array of positive finite values")
        object.__setattr__(self, "tau2", tau2)
        if self.degenerate is None:
            object.__setattr__(self, "degenerate", np.zeros(tau2.size, dtype=bool))

    @classmethod
    def fixed(cls, n, tau2):
        """Same bandwidth for every point (no perplexity target)."""
        return cls(np.full(n, float(tau2)), float("nan"))


def squared_distances(X):
    return kernels.sq_dists(as_data_matrix(X))


def conditional_from_sq_dists(D, tau2):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    tau2 = np.asarray(tau2, dtype=np.float64)
    if tau2.shape != (n,):
        raise ValueError(f"need {n} bandwidths, got shape {tau2.shape}")
    E = -D / (2.0 * tau2[:, None])
    np.fill_diagonal(E, -np.inf)
    E -= E.max(axis=1, keepdims=True)
    W = np.exp(E)
    s = W.sum(axis=1)
    bad = ~np.isfinite(s) | (s <= 0)
    if bad.any():
        raise DegenerateBandwidthError(
            f"rows {np.flatnonzero(bad).tolist()} have no affinity mass"
        )
    return W / s[:, None]


def conditional_affinities(X, tau):
    """Row-stochastic matrix of p_{j|i} with zero diagonal.

    ``tau`` is a :class:`Bandwidths` or an array of tau_i^2.
    """
    X = as_data_matrix(X)
    tau2 = tau.tau2 if isinstance(tau, Bandwidths) else tau
    return conditional_from_sq_dists(kernels.sq_dists(X), tau2)


def row_perplexity(cond):
    """2 ** (Shannon entropy in bits) of each conditional row."""
    cond = np.asarray(cond, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(cond > 0, cond * np.log2(cond), 0.0)
    return 2.0 ** (-terms.sum(axis=1))


def calibrate_bandwidths(X, perplexity, *, tol=1e-5, max_iter=100, D=None):
    """Find tau_i^2 so every conditional row hits ``perplexity``.

    Bisection on log tau^2 in [-40, 40], widened if the target is not
    bracketed. Rows whose off-diagonal distances are all equal have a
    perplexity of n - 1 for every bandwidth; they get the bracket midpoint and
    are flagged in ``Bandwidths.degenerate`` instead of raising.
    """
    X = as_data_matrix(X)
    n = X.shape[0]
    if not 1.0 < perplexity <= n - 1:
        raise ValueError(f"perplexity must lie in (1, {n - 1}], got {perplexity}")
    if D is None:
        D = kernels.sq_dists(X)
    lo, hi = LOG_TAU2_BRACKET
    log_tau2, entropy, status = kernels.calibrate(
        D, np.log(perplexity), lo, hi, tol, max_iter
    )
    degenerate = status == kernels.CALIB_DEGENERATE
    failed = (status == kernels.CALIB_NO_CONVERGENCE) | (status == kernels.CALIB_UNBRACKETED)
    if failed.any():
        rows = np.flatnonzero(failed)
        raise CalibrationError(
            f"perplexity {perplexity} not reached for rows {rows[:10].tolist()}"
            f"{' ...' if rows.size > 10 else ''} after {max_iter} bisections"
        )
    return Bandwidths(
        np.exp(log_tau2), float(perplexity),
        achieved_perplexity=np.exp(entropy), degenerate=degenerate,
    )


def symmetrize(cond):
    """p_ij = (p_{j|i} + p_{i|j}) / (2n)."""
    cond = np.asarray(cond, dtype=np.float64)
    n = cond.shape[0]
    P = (cond + cond.T) / (2.0 * n)
    np.fill_diagonal(P, 0.0)
    return P


def joint_affinities(X, perplexity=30.0, *, tau2=None):
    """P from data: perplexity calibration unless fixed ``tau2`` is given.

    Returns ``(P, Bandwidths)``.
    """
    X = as_data_matrix(X)
    D = kernels.sq_dists(X)
    if tau2 is None:
        bw = calibrate_bandwidths(X, perplexity, D=D)
    else:
        bw = Bandwidths(np.broadcast_to(np.asarray(tau2, dtype=np.float64), (X.shape[0],)).copy(),
                        float("nan"))
    return symmetrize(conditional_from_sq_dists(D, bw.tau2)), bw


def check_affinity(P, tol=1e-10):
    """Validate the P contract: symmetric, zero diagonal, nonnegative, sums to 1."""
    P = np.asarray(P, dtype=np.float64)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError("P must be square")
    if not np.array_equal(P, P.T):
        raise ValueError("P is not symmetric")
    if np.any(np.diag(P) != 0):
        raise ValueError("P has a nonzero diagonal")
    if np.any(P < 0):
        raise ValueError("P has negative entries")
    if abs(P.sum() - 1.0) > tol:
        raise ValueError(f"P sums to {P.sum()!r}, not 1")
    return P


class AffinityQ(NamedTuple):
    q: np.ndarray
    Z: float


def student_kernel(Y):
    """(1 + ||y_i - y_j||^2)^-1 with zero diagonal, plus the squared distances."""
    Y = np.asarray(Y, dtype=np.float64)
    dx = Y[:, None, :] - Y[None, :, :]
    D = np.einsum("ijk,ijk->ij", dx, dx)
    W = 1.0 / (1.0 + D)
    np.fill_diagonal(W, 0.0)
    return W, D


def _coords(Y):
    return getattr(Y, "coords", Y)


def q_matrix(Y):
    """Low-dimensional joint similarities and their normalizer Z."""
    Y = np.asarray(_coords(Y), dtype=np.float64)
    if Y.shape[0] < 3:
        raise ValueError("q_matrix needs n >= 3")
    W, _ = student_kernel(Y)
    Z = float(W.sum())
    return AffinityQ(W / Z, Z)


def s_matrix(P, Y, alpha=1.0):
    """S_ij(alpha) = (alpha p_ij - q_ij) / (1 + ||y_i - y_j||^2), zero diagonal."""
    Y = np.asarray(_coords(Y), dtype=np.float64)
    P = np.asarray(P, dtype=np.float64)
    if P.shape[0] != Y.shape[0]:
        raise ValueError("P and Y disagree on n")
    W, _ = student_kernel(Y)
    Z = W.sum()
    S = (alpha * P - W / Z) * W
    np.fill_diagonal(S, 0.0)
    return S


def kl_divergence(P, Q):
    """sum_{i != j} p_ij log(p_ij / q_ij), with 0 log 0 = 0."""
    P = np.asarray(P, dtype=np.float64)
    Q = np.asarray(getattr(Q, "q", Q), dtype=np.float64)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / Q[mask])))
