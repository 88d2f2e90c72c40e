"""Independent brute-force reference implementations used as test oracles.

Nothing here calls into tsne_dynamics; every quantity is recomputed from its
definition with explicit loops or dense matrices.
"""

import math

import numpy as np


def conditional_loop(X, tau2):
    n = X.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        w = [0.0] * n
        for j in range(n):
            if j != i:
                d = sum((X[i, c] - X[j, c]) ** 2 for c in range(X.shape[1]))
                w[j] = math.exp(-d / (2.0 * tau2[i]))
        s = sum(w)
        for j in range(n):
            out[i, j] = w[j] / s
    return out


def symmetrize_loop(cond):
    n = cond.shape[0]
    P = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                P[i, j] = (cond[i, j] + cond[j, i]) / (2.0 * n)
    return P


def q_loop(Y):
    n = Y.shape[0]
    W = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                W[i, j] = 1.0 / (1.0 + (Y[i, 0] - Y[j, 0]) ** 2 + (Y[i, 1] - Y[j, 1]) ** 2)
    Z = sum(W[i, j] for i in range(n) for j in range(n))
    return W / Z


def step_loop(P, Y, alpha, h):
    """y_i + h sum_j (alpha p_ij - q_ij) / (1 + d_ij^2) (y_j - y_i), point by point."""
    n = Y.shape[0]
    Q = q_loop(Y)
    out = Y.copy()
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            w = 1.0 / (1.0 + (Y[i, 0] - Y[j, 0]) ** 2 + (Y[i, 1] - Y[j, 1]) ** 2)
            s = (alpha * P[i, j] - Q[i, j]) * w
            out[i] += h * s * (Y[j] - Y[i])
    return out


def entropy_perplexity(row):
    """2 ** H(row) with H in bits."""
    H = -sum(p * math.log2(p) for p in row if p > 0)
    return 2.0 ** H


def dense_laplacian(A):
    return np.diag(A.sum(axis=0)) - A


def dense_surrogate(P, alpha):
    n = P.shape[0]
    H = (np.ones((n, n)) - np.eye(n)) / (n * (n - 1))
    return dense_laplacian(alpha * P - H)


def series_expm_apply(M, y, t, terms=60):
    """sum_{k <= terms} (-t M)^k / k! y."""
    out = y.copy()
    term = y.copy()
    for k in range(1, terms + 1):
        term = (-t) * (M @ term) / k
        out = out + term
    return out


def random_affinity(n, rng, density=1.0):
    """A valid P: symmetric, nonnegative, zero diagonal, unit sum."""
    A = rng.random((n, n))
    if density < 1.0:
        A *= rng.random((n, n)) < density
    A = np.triu(A, 1)
    A = A + A.T
    return A / A.sum()


def block_affinity(sizes, rng):
    """Block-diagonal P with dense positive blocks; labels in block order."""
    n = sum(sizes)
    A = np.zeros((n, n))
    labels = np.repeat(np.arange(len(sizes)), sizes)
    start = 0
    for s in sizes:
        B = rng.random((s, s)) + 0.1
        B = np.triu(B, 1)
        A[start:start + s, start:start + s] = B + B.T
        start += s
    return A / A.sum(), labels
