"""Dense symmetric linear algebra and graph operators.

Matrices are plain ``float64`` ndarrays. ``as_square_sym`` is the gate that
enforces the symmetric-matrix contract; the operators below assume it.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .errors import NumericalError

DEFAULT_COMPONENT_THRESHOLD = 1e-12


def as_square_sym(A, *, min_size=2):
    """Validate ``A`` as a finite, exactly symmetric n x n matrix, n >= 2."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] < min_size:
        raise ValueError(f"matrix must be at least {min_size}x{min_size}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if not np.array_equal(A, A.T):
        raise ValueError("matrix is not exactly symmetric")
    return A


def degree_operator(A):
    """Column sums of ``A``, i.e. the diagonal of D(A)."""
    return np.asarray(A, dtype=np.float64).sum(axis=0)


def laplacian(A):
    """L(A) = D(A) - A."""
    A = np.asarray(A, dtype=np.float64)
    L = -A.copy()
    L[np.diag_indices_from(L)] += degree_operator(A)
    return L


def h_matrix(n):
    """The uniform repulsion kernel (1 1^T - I) / (n (n - 1))."""
    if n < 2:
        raise ValueError("h_matrix needs n >= 2")
    H = np.full((n, n), 1.0 / (n * (n - 1)))
    np.fill_diagonal(H, 0.0)
    return H


class SpectralDecomp(NamedTuple):
    eigenvalues: np.ndarray   # ascending
    eigenvectors: np.ndarray  # columns, orthonormal


def _fix_signs(U, tol=1e-12):
    for c in range(U.shape[1]):
        col = U[:, c]
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            U[:, c] = -col
    return U


def eig_sym(A):
    """Full eigendecomposition of a symmetric matrix.

    Eigenvalues come back ascending; each eigenvector is flipped so that its
    first entry above 1e-12 in magnitude is positive, which makes the output
    reproducible for a given input.
    """
    A = as_square_sym(A)
    try:
        w, U = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    return SpectralDecomp(w, _fix_signs(U))


def spectral_norm(A):
    """Operator 2-norm of a symmetric matrix."""
    w = np.linalg.eigvalsh(np.asarray(A, dtype=np.float64))
    return float(np.max(np.abs(w)))


def laplacian_eigenbasis(A):
    """Eigenpairs of L(A) whose first vector is exactly 1/sqrt(n).

    When L(A) has a multi-dimensional null space an arbitrary eigenbasis need
    not contain the constant vector, so the constant direction is deflated
    to the top of the spectrum, the rest solved, and 1/sqrt(n) put back in
    front with eigenvalue 0. Remaining eigenvalues are ascending.
    """
    A = as_square_sym(A)
    n = A.shape[0]
    L = laplacian(A)
    shift = 1.0 + 2.0 * float(np.abs(L).sum(axis=1).max())
    dec = eig_sym(L + (shift / n))
    lam = dec.eigenvalues[:-1].copy()
    U = np.empty((n, n))
    U[:, 0] = 1.0 / np.sqrt(n)
    U[:, 1:] = dec.eigenvectors[:, :-1]
    return SpectralDecomp(np.concatenate(([0.0], lam)), U)


@dataclass(frozen=True)
class ComponentLabels:
    labels: np.ndarray
    R: int
    sizes: np.ndarray

    @classmethod
    def from_labels(cls, labels):
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty 1-D array")
        if labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        R = int(labels.max()) + 1
        sizes = np.bincount(labels, minlength=R)
        if np.any(sizes == 0):
            raise ValueError("labels must be contiguous in [0, R)")
        return cls(labels, R, sizes)

    @property
    def n(self):
        return self.labels.size


def connected_components(A, threshold=DEFAULT_COMPONENT_THRESHOLD):
    """Components of the graph with an edge wherever A[i, j] > threshold.

    Components are numbered in order of their first member.
    """
    if threshold < 0:
        raise ValueError("threshold must be nonnegative")
    A = as_square_sym(A, min_size=1)
    return ComponentLabels.from_labels(kernels.components(A, threshold))


def indicator_basis(labels):
    """Orthonormal indicator vectors theta_r = 1_{H_r} / sqrt(n_r) as columns."""
    if not isinstance(labels, ComponentLabels):
        labels = ComponentLabels.from_labels(labels)
    Theta = np.zeros((labels.n, labels.R))
    Theta[np.arange(labels.n), labels.labels] = 1.0
    return Theta / np.sqrt(labels.sizes)[None, :]


def threshold_graph(A, threshold=DEFAULT_COMPONENT_THRESHOLD):
    """Copy of ``A`` with entries at or below ``threshold`` set to zero."""
    A = np.asarray(A, dtype=np.float64)
    return np.where(A > threshold, A, 0.0)
