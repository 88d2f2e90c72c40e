"""Pairwise kernels shared by the affinity, engine and diagnostics modules.

Every kernel has a loop implementation compiled by numba (``*_numba``) and a
vectorised numpy implementation (``*_numpy``). The public name binds to one
of them according to :mod:`tsne_dynamics._backend`. The two paths agree to
rounding (1e-12 on the quantities the tests compare) but are not bitwise
identical, so determinism is guaranteed per backend.
"""

import numpy as np

from ._backend import njit, pick

# status codes returned by the calibration kernels
CALIB_OK = 0
CALIB_DEGENERATE = 1
CALIB_NO_CONVERGENCE = 2
CALIB_UNBRACKETED = 3

_MAX_EXPANSIONS = 30


# ---------------------------------------------------------------------------
# squared distances


@njit
def _sq_dists_loops(X):
    n, p = X.shape
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(p):
                t = X[i, c] - X[j, c]
                acc += t * t
            D[i, j] = acc
            D[j, i] = acc
    return D


def sq_dists_numba(X):
    return _sq_dists_loops(np.ascontiguousarray(X, dtype=np.float64))


def sq_dists_numpy(X):
    X = np.asarray(X, dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    D = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    D = 0.5 * (D + D.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


sq_dists = pick(sq_dists_numba, sq_dists_numpy)


# ---------------------------------------------------------------------------
# one gradient step of the (exaggerated) t-SNE update


@njit
def _tsne_step_loops(P, Y, alpha, h):
    n = Y.shape[0]
    W = np.empty((n, n))
    Z = 0.0
    dmax = 0.0
    for i in range(n):
        W[i, i] = 0.0
        for j in range(i + 1, n):
            dx = Y[i, 0] - Y[j, 0]
            dy = Y[i, 1] - Y[j, 1]
            d = dx * dx + dy * dy
            if d > dmax:
                dmax = d
            w = 1.0 / (1.0 + d)
            W[i, j] = w
            W[j, i] = w
            Z += w
    Z *= 2.0
    out = np.empty_like(Y)
    for i in range(n):
        gx = 0.0
        gy = 0.0
        for j in range(n):
            if j == i:
                continue
            w = W[i, j]
            s = (alpha * P[i, j] - w / Z) * w
            gx += s * (Y[j, 0] - Y[i, 0])
            gy += s * (Y[j, 1] - Y[i, 1])
        out[i, 0] = Y[i, 0] + h * gx
        out[i, 1] = Y[i, 1] + h * gy
    return out, Z, dmax


def tsne_step_numba(P, Y, alpha, h):
    """Return ``(Y_next, Z, max squared distance of Y)`` for one step."""
    return _tsne_step_loops(
        np.ascontiguousarray(P, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        float(alpha),
        float(h),
    )


def tsne_step_numpy(P, Y, alpha, h):
    """Matrix form ``Y - h L(S_alpha) Y`` of the same step."""
    Y = np.asarray(Y, dtype=np.float64)
    dx = Y[:, 0, None] - Y[None, :, 0]
    dy = Y[:, 1, None] - Y[None, :, 1]
    D = dx * dx + dy * dy
    W = 1.0 / (1.0 + D)
    np.fill_diagonal(W, 0.0)
    Z = W.sum()
    S = (alpha * P - W / Z) * W
    deg = S.sum(axis=0)
    LY = deg[:, None] * Y - S @ Y
    return Y - h * LY, float(Z), float(D.max())


tsne_step = pick(tsne_step_numba, tsne_step_numpy)


# ---------------------------------------------------------------------------
# diameter


@njit
def _max_sq_dist_loops(Y):
    n, d = Y.shape
    best = 0.0
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.0
            for c in range(d):
                t = Y[i, c] - Y[j, c]
                acc += t * t
            if acc > best:
                best = acc
    return best


def max_sq_dist_numba(Y):
    return _max_sq_dist_loops(np.ascontiguousarray(Y, dtype=np.float64))


def max_sq_dist_numpy(Y, block=512):
    Y = np.asarray(Y, dtype=np.float64)
    best = 0.0
    for start in range(0, Y.shape[0], block):
        diff = Y[start:start + block, None, :] - Y[None, :, :]
        best = max(best, float(np.einsum("ijk,ijk->ij", diff, diff).max()))
    return best


max_sq_dist = pick(max_sq_dist_numba, max_sq_dist_numpy)


# ---------------------------------------------------------------------------
# perplexity calibration: bisection on log(tau^2), one row at a time


@njit
def _row_entropy(d, dmin, log_tau2):
    # natural-log Shannon entropy of the conditional row at bandwidth tau^2
    beta = 0.5 * np.exp(-log_tau2)
    s = 0.0
    acc = 0.0
    for j in range(d.shape[0]):
        e = -(d[j] - dmin) * beta
        w = np.exp(e)
        s += w
        acc += w * e
    return np.log(s) - acc / s


@njit
def _calibrate_loops(D, log_target, lo0, hi0, tol, max_iter):
    n = D.shape[0]
    log_tau2 = np.empty(n)
    entropy = np.empty(n)
    status = np.zeros(n, dtype=np.int64)
    width = hi0 - lo0
    for i in range(n):
        d = np.empty(n - 1)
        m = 0
        for j in range(n):
            if j != i:
                d[m] = D[i, j]
                m += 1
        dmin = d.min()
        if d.max() == dmin:
            log_tau2[i] = 0.5 * (lo0 + hi0)
            entropy[i] = np.log(n - 1.0)
            status[i] = CALIB_DEGENERATE
            continue
        lo = lo0
        hi = hi0
        ok = True
        k = 0
        while _row_entropy(d, dmin, lo) > log_target:
            lo -= width
            k += 1
            if k > _MAX_EXPANSIONS:
                ok = False
                break
        k = 0
        while ok and _row_entropy(d, dmin, hi) < log_target:
            hi += width
            k += 1
            if k > _MAX_EXPANSIONS:
                ok = False
                break
        if not ok:
            log_tau2[i] = 0.5 * (lo + hi)
            entropy[i] = _row_entropy(d, dmin, log_tau2[i])
            status[i] = CALIB_UNBRACKETED
            continue
        status[i] = CALIB_NO_CONVERGENCE
        mid = 0.5 * (lo + hi)
        H = _row_entropy(d, dmin, mid)
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            H = _row_entropy(d, dmin, mid)
            if abs(np.exp(H - log_target) - 1.0) <= tol:
                status[i] = CALIB_OK
                break
            if H < log_target:
                lo = mid
            else:
                hi = mid
        log_tau2[i] = mid
        entropy[i] = H
    return log_tau2, entropy, status


def calibrate_numba(D, log_target, lo0, hi0, tol, max_iter):
    return _calibrate_loops(
        np.ascontiguousarray(D, dtype=np.float64),
        float(log_target), float(lo0), float(hi0), float(tol), int(max_iter),
    )


def _entropy_rows(Doff, dmin, log_tau2):
    beta = 0.5 * np.exp(-log_tau2)
    E = -(Doff - dmin[:, None]) * beta[:, None]
    W = np.exp(E)
    s = W.sum(axis=1)
    return np.log(s) - (W * E).sum(axis=1) / s


def calibrate_numpy(D, log_target, lo0, hi0, tol, max_iter):
    D = np.asarray(D, dtype=np.float64)
    n = D.shape[0]
    Doff = D[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    dmin = Doff.min(axis=1)
    dmax = Doff.max(axis=1)
    width = hi0 - lo0

    status = np.full(n, CALIB_NO_CONVERGENCE, dtype=np.int64)
    degenerate = dmax == dmin
    status[degenerate] = CALIB_DEGENERATE
    lo = np.full(n, lo0)
    hi = np.full(n, hi0)

    live = ~degenerate
    for _ in range(_MAX_EXPANSIONS + 1):
        need = live & (_entropy_rows(Doff, dmin, lo) > log_target)
        if not need.any():
            break
        lo[need] -= width
    else:
        live_bad = live & (_entropy_rows(Doff, dmin, lo) > log_target)
        status[live_bad] = CALIB_UNBRACKETED
    live = status == CALIB_NO_CONVERGENCE
    for _ in range(_MAX_EXPANSIONS + 1):
        need = live & (_entropy_rows(Doff, dmin, hi) < log_target)
        if not need.any():
            break
        hi[need] += width
    else:
        live_bad = live & (_entropy_rows(Doff, dmin, hi) < log_target)
        status[live_bad] = CALIB_UNBRACKETED

    log_tau2 = 0.5 * (lo + hi)
    entropy = np.full(n, np.log(n - 1.0))
    active = status == CALIB_NO_CONVERGENCE
    for _ in range(max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        mid = 0.5 * (lo[idx] + hi[idx])
        H = _entropy_rows(Doff[idx], dmin[idx], mid)
        log_tau2[idx] = mid
        entropy[idx] = H
        done = np.abs(np.exp(H - log_target) - 1.0) <= tol
        status[idx[done]] = CALIB_OK
        below = ~done & (H < log_target)
        above = ~done & ~below
        lo[idx[below]] = mid[below]
        hi[idx[above]] = mid[above]
        active[idx[done]] = False
    unbr = status == CALIB_UNBRACKETED
    if unbr.any():
        entropy[unbr] = _entropy_rows(Doff[unbr], dmin[unbr], log_tau2[unbr])
    return log_tau2, entropy, status


calibrate = pick(calibrate_numba, calibrate_numpy)


# ---------------------------------------------------------------------------
# connected components of the thresholded graph


@njit
def _find(parent, i):
    while parent[i] != i:
        parent[i] = parent[parent[i]]
        i = parent[i]
    return i


@njit
def _components_loops(A, threshold):
    n = A.shape[0]
    parent = np.arange(n)
    for i in range(n):
        for j in range(i + 1, n):
            if A[i, j] > threshold or A[j, i] > threshold:
                ri = _find(parent, i)
                rj = _find(parent, j)
                if ri != rj:
                    if ri < rj:
                        parent[rj] = ri
                    else:
                        parent[ri] = rj
    roots = np.empty(n, dtype=np.int64)
    for i in range(n):
        roots[i] = _find(parent, i)
    return roots


def components_numba(A, threshold):
    return _relabel(_components_loops(np.ascontiguousarray(A, dtype=np.float64), float(threshold)))


def components_numpy(A, threshold):
    adj = np.asarray(A) > threshold
    adj = adj | adj.T
    n = adj.shape[0]
    roots = np.full(n, -1, dtype=np.int64)
    for seed in range(n):
        if roots[seed] >= 0:
            continue
        roots[seed] = seed
        frontier = np.zeros(n, dtype=bool)
        frontier[seed] = True
        while frontier.any():
            reach = adj[frontier].any(axis=0) & (roots < 0)
            roots[reach] = seed
            frontier = reach
    return _relabel(roots)


def _relabel(roots):
    # component ids in order of first occurrence
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64)


components = pick(components_numba, components_numpy)
