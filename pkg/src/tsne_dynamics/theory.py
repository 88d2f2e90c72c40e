"""Closed-form surrogates of the t-SNE iteration.

During early exaggeration the update behaves like the linear map
``I - h L(alpha P - H_n)``. This module evaluates that map (power
iterations), its continuous-time limit (the gradient flow, solved through the
eigenbasis of L(P)), the null-space limit it converges to on block-structured
P, and the per-cluster repulsive forces of the embedding stage.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .engine import TuningParams
from .spectral import (
    ComponentLabels,
    indicator_basis,
    laplacian,
    laplacian_eigenbasis,
)


def theory_tuning(n, delta, perplexity=30.0, *, K1=None, seed=0):
    """alpha = n^(1-delta), h = h' = n^delta, K0 = floor((ln n)^2), sigma_n = (ln n)^-2.

    ``K1`` defaults to ``1000 - K0`` (never negative).
    """
    if n < 10:
        raise ValueError("theory_tuning needs n >= 10")
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    logn = math.log(n)
    K0 = math.floor(logn ** 2)
    if K1 is None:
        K1 = max(0, 1000 - K0)
    return TuningParams(
        alpha=n ** (1.0 - delta),
        h=n ** delta,
        h_prime=n ** delta,
        K0=K0,
        K1=K1,
        sigma_n=logn ** -2,
        perplexity=perplexity,
        delta=delta,
        seed=seed,
    )


def early_stop_schedule(n):
    """The three exaggeration lengths compared in the early-stopping study.

    ``(floor((ln n)^2), round(n^(2/3)), round(n^(3/4)))``; the two power laws
    are rounded to nearest, which reproduces (54, 137, 253) at n = 1600.
    """
    return (
        math.floor(math.log(n) ** 2),
        int(round(n ** (2.0 / 3.0))),
        int(round(n ** 0.75)),
    )


def _as_columns(y):
    y = np.asarray(y, dtype=np.float64)
    return y[:, None] if y.ndim == 1 else y


def _restore(y, like):
    return y[:, 0] if np.ndim(like) == 1 else y


def surrogate_matrix(P, alpha):
    """Dense L(alpha P - H_n)."""
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    M = alpha * laplacian(P)
    M[np.diag_indices(n)] -= 1.0 / (n - 1)
    M += 1.0 / (n * (n - 1))
    return M


def apply_surrogate(P, alpha, Y):
    """L(alpha P - H_n) Y without forming the shifted matrix.

    Uses L(alpha P - H_n) = alpha L(P) - I/(n-1) + 1 1^T / (n(n-1)).
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    deg = P.sum(axis=0)
    LY = alpha * (deg[:, None] * Y - P @ Y)
    return LY - Y / (n - 1) + Y.sum(axis=0, keepdims=True) / (n * (n - 1))


def power_surrogate(P, alpha, h, y0, k, *, return_path=False):
    """k applications of I - h L(alpha P - H_n) to ``y0``.

    ``y0`` is an n-vector or an n x 2 array of coordinate columns. With
    ``return_path`` the result stacks iterates 0..k along the first axis.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    Y = _as_columns(y0).copy()
    path = [Y.copy()] if return_path else None
    for _ in range(int(k)):
        Y = Y - h * apply_surrogate(P, alpha, Y)
        if return_path:
            path.append(Y.copy())
    if return_path:
        return np.stack([_restore(p, y0) for p in path])
    return _restore(Y, y0)


def flow_exponents(eigenvalues, alpha):
    """Decay rates alpha*lambda_i - 1/(n-1) of the flow, 0 for the constant mode."""
    lam = np.asarray(eigenvalues, dtype=np.float64)
    n = lam.size
    rates = alpha * lam - 1.0 / (n - 1)
    rates[0] = 0.0
    return rates


def gradient_flow(P, alpha, y0, t, *, decomposition=None):
    """Solution of dY/dt = -L(alpha P - H_n) Y at time ``t``.

    Evaluated in the eigenbasis of L(P), with u_1 = 1/sqrt(n):
    Y(t) = (u_1^T y0) u_1 + sum_{i>=2} exp(-t (alpha lambda_i - 1/(n-1))) (u_i^T y0) u_i.
    Pass a precomputed :func:`laplacian_eigenbasis` to reuse it across times.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    dec = decomposition if decomposition is not None else laplacian_eigenbasis(P)
    Y0 = _as_columns(y0)
    U = dec.eigenvectors
    coef = U.T @ Y0
    scale = np.exp(-t * flow_exponents(dec.eigenvalues, alpha))
    return _restore(U @ (scale[:, None] * coef), y0)


@dataclass(frozen=True)
class LimitCenters:
    R: int
    centers: np.ndarray  # R x 2, row r = (z_1r, z_2r)
    sizes: np.ndarray


def _labels(labels):
    return labels if isinstance(labels, ComponentLabels) else ComponentLabels.from_labels(labels)


def block_surrogate(P, labels):
    """P* = P with every entry between differently labelled points set to 0."""
    lab = _labels(labels).labels
    P = np.asarray(P, dtype=np.float64)
    return np.where(lab[:, None] == lab[None, :], P, 0.0)


def limit_centers(labels, y0):
    """z_{l r} = theta_r^T y_l / sqrt(n_r), i.e. the block means of ``y0``."""
    lab = _labels(labels)
    Y0 = _as_columns(y0)
    Theta = indicator_basis(lab)
    Z = (Theta.T @ Y0) / np.sqrt(lab.sizes)[:, None]
    return LimitCenters(lab.R, Z, lab.sizes.copy())


def null_space_limit(Pstar, labels, y0):
    """Projection U U^T y0 onto the indicator span of ``labels``.

    ``labels`` must not split across nonzero entries of ``Pstar``. Returns the
    projected coordinates (block-constant, value z_{l r} on block r) and the
    :class:`LimitCenters`.
    """
    lab = _labels(labels)
    Pstar = np.asarray(Pstar, dtype=np.float64)
    if Pstar.shape[0] != lab.n:
        raise ValueError("labels and Pstar disagree on n")
    cross = lab.labels[:, None] != lab.labels[None, :]
    if np.any(Pstar[cross] != 0):
        raise ValueError("Pstar has weight between different labels")
    Theta = indicator_basis(lab)
    Y0 = _as_columns(y0)
    projected = Theta @ (Theta.T @ Y0)
    return _restore(projected, y0), limit_centers(lab, y0)


@dataclass(frozen=True)
class ForceDecomposition:
    """y_i^(k+1) - y_i^(k) = sum_{r != r0} f_ir + eps_i for every point i.

    ``forces[i, r]`` is zero for the point's own cluster.
    """

    forces: np.ndarray        # n x R x 2
    residual: np.ndarray      # n x 2
    displacement: np.ndarray  # n x 2
    labels: np.ndarray

    @property
    def identity_error(self):
        return float(np.abs(self.displacement - self.forces.sum(axis=1) - self.residual).max())

    def residual_ratio(self):
        """Per point ||eps_i|| / min over foreign clusters of ||f_ir||."""
        fn = np.linalg.norm(self.forces, axis=2)
        own = np.zeros_like(fn, dtype=bool)
        own[np.arange(fn.shape[0]), self.labels] = True
        fmin = np.where(own, np.inf, fn).min(axis=1)
        en = np.linalg.norm(self.residual, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(en == 0, 0.0, en / fmin)


def repulsion_forces(state, P, labels, h_prime):
    """Split one embedding step into intercluster repulsions plus a remainder.

    f_ir = h' |H_r| / (n (n-1)) * (y_i - mean_{j in H_r} y_j) for each foreign
    cluster r; the remainder eps_i is whatever the actual step does beyond that.
    """
    lab = _labels(labels)
    Y = np.asarray(getattr(state, "coords", state), dtype=np.float64)
    n = Y.shape[0]
    if lab.n != n:
        raise ValueError("labels do not cover the embedding")
    Y_next, _, _ = kernels.tsne_step(P, Y, 1.0, h_prime)
    displacement = Y_next - Y
    means = limit_centers(lab, Y).centers
    coef = h_prime * lab.sizes / (n * (n - 1.0))
    forces = coef[None, :, None] * (Y[:, None, :] - means[None, :, :])
    forces[np.arange(n), lab.labels] = 0.0
    residual = displacement - forces.sum(axis=1)
    return ForceDecomposition(forces, residual, displacement, lab.labels.copy())


class RegularizationProfile(NamedTuple):
    t: np.ndarray             # T
    eigenvalues: np.ndarray   # n, eigenvalues of L(P), first is the constant mode
    rates: np.ndarray         # n, alpha*lambda_i - 1/(n-1) (0 for the constant mode)
    coefficients: np.ndarray  # T x n x 2, coefficient of u_i in Y_l(t)


def regularization_profile(P, alpha, y0, t_grid):
    """Per-eigenmode coefficients exp(-t rate_i) (u_i^T y0) along ``t_grid``."""
    t = np.asarray(t_grid, dtype=np.float64)
    if t.ndim != 1 or np.any(t < 0) or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be ascending and nonnegative")
    dec = laplacian_eigenbasis(P)
    rates = flow_exponents(dec.eigenvalues, alpha)
    base = dec.eigenvectors.T @ _as_columns(y0)
    coefs = np.exp(-t[:, None] * rates[None, :])[:, :, None] * base[None, :, :]
    return RegularizationProfile(t, dec.eigenvalues, rates, coefs)
