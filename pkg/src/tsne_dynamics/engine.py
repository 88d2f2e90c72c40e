"""Two-stage t-SNE by plain gradient descent.

The early exaggeration stage runs ``K0`` steps of

    y_i <- y_i + h * sum_j S_ij(alpha) (y_j - y_i)

and the embedding stage runs ``K1`` more with ``alpha = 1`` and step ``h'``.
No momentum, no gains, no re-centering: this is exactly the iteration whose
behaviour :mod:`tsne_dynamics.theory` predicts.
"""

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._backend import BACKEND
from .affinity import check_affinity, s_matrix
from .errors import DivergenceError
from .rng import GENERATOR_NAME, spawn_rngs
from .spectral import laplacian, laplacian_eigenbasis

DIVERGENCE_LIMIT = 1e12
MAX_SNAPSHOTS = 2000


class Stage(str, enum.Enum):
    EARLY_EXAGGERATION = "early_exaggeration"
    EMBEDDING = "embedding"


@dataclass(frozen=True)
class EmbeddingState:
    coords: np.ndarray
    stage: Stage = Stage.EARLY_EXAGGERATION
    k: int = 0

    def __post_init__(self):
        coords = np.array(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError(f"coords must be n x 2, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coords must be finite")
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "stage", Stage(self.stage))

    @property
    def n(self):
        return self.coords.shape[0]


@dataclass(frozen=True)
class TuningParams:
    alpha: float
    h: float
    h_prime: float
    K0: int
    K1: int
    sigma_n: float
    perplexity: float = 30.0
    delta: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.alpha >= 1:
            raise ValueError("alpha must be >= 1")
        if not (self.h >= 0 and self.h_prime >= 0):
            raise ValueError("step sizes must be nonnegative")
        if not self.sigma_n > 0:
            raise ValueError("sigma_n must be positive")
        if self.K0 < 0 or self.K1 < 0:
            raise ValueError("K0 and K1 must be nonnegative")
        if self.delta is not None and not 0 < self.delta < 1:
            raise ValueError("delta must lie in (0, 1)")
        if self.perplexity <= 1:
            raise ValueError("perplexity must exceed 1")

    def as_dict(self):
        return {
            "alpha": self.alpha, "h": self.h, "h_prime": self.h_prime,
            "K0": self.K0, "K1": self.K1, "sigma_n": self.sigma_n,
            "perplexity": self.perplexity, "delta": self.delta, "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# initialization


def init_random(n, sigma_n, seed):
    """Gaussian columns rescaled to l2 norm ``sigma_n``.

    The two columns come from independent Philox sub-streams of ``seed``.
    """
    if sigma_n <= 0:
        raise ValueError("sigma_n must be positive")
    cols = []
    for rng in spawn_rngs(seed, 2):
        g = rng.standard_normal(n)
        cols.append(sigma_n * g / np.linalg.norm(g))
    return EmbeddingState(np.column_stack(cols), Stage.EARLY_EXAGGERATION, 0)


def init_spectral(P, sigma_n=1.0):
    """Laplacian eigenvectors for the two smallest eigenvalues after 1/sqrt(n).

    The constant vector is excluded even when L(P) has a larger null space;
    each column is rescaled to l2 norm ``sigma_n``.
    """
    dec = laplacian_eigenbasis(P)
    Y = dec.eigenvectors[:, 1:3].copy()
    Y *= sigma_n / np.linalg.norm(Y, axis=0)
    return EmbeddingState(Y, Stage.EARLY_EXAGGERATION, 0)


# ---------------------------------------------------------------------------
# single steps


def update_matrix_form(P, Y, alpha, h):
    """[I - h L(S_alpha)] Y, written with explicit dense matrices."""
    Y = np.asarray(Y, dtype=np.float64)
    return Y - h * (laplacian(s_matrix(P, Y, alpha)) @ Y)


def update_per_point(P, Y, alpha, h):
    """y_i + h sum_{j != i} S_ij(alpha) (y_j - y_i), one point at a time."""
    Y = np.asarray(Y, dtype=np.float64)
    S = s_matrix(P, Y, alpha)
    n = Y.shape[0]
    out = Y.copy()
    for i in range(n):
        acc = np.zeros(2)
        for j in range(n):
            if j != i:
                acc += S[i, j] * (Y[j] - Y[i])
        out[i] = Y[i] + h * acc
    return out


def _guard(Y, k):
    if not np.all(np.isfinite(Y)) or np.abs(Y).max() > DIVERGENCE_LIMIT:
        raise DivergenceError(f"embedding diverged at iteration {k}", iteration=k)


def _advance(state, P, alpha, h, stage):
    Y, _, _ = kernels.tsne_step(P, state.coords, alpha, h)
    _guard(Y, state.k + 1)
    return EmbeddingState(Y, stage, state.k + 1)


def ee_step(state, P, alpha, h):
    """One early-exaggeration step."""
    if state.stage is not Stage.EARLY_EXAGGERATION:
        raise ValueError("ee_step needs a state in the early exaggeration stage")
    return _advance(state, P, alpha, h, Stage.EARLY_EXAGGERATION)


def embed_step(state, P, h_prime):
    """One embedding-stage step (alpha = 1)."""
    return _advance(state, P, 1.0, h_prime, Stage.EMBEDDING)


# ---------------------------------------------------------------------------
# full runs


@dataclass
class TrajectoryLog:
    """Snapshots and per-iteration scalars of one run.

    ``diameter[k]``, ``eta[k]`` and ``diam_ratio[k]`` are recorded for every
    iteration k = 0..K0+K1 regardless of the snapshot stride.
    """

    params: TuningParams
    snapshots: list = field(default_factory=list)
    diameter: np.ndarray = None
    stage: list = None
    metadata: dict = field(default_factory=dict)

    @property
    def K0(self):
        return self.params.K0

    @property
    def eta(self):
        return self.diameter ** 2

    @property
    def diam_ratio(self):
        d = self.diameter
        prev = d[:-1]
        ratio = np.ones_like(d)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio[1:] = np.where(prev > 0, d[1:] / prev, np.where(d[1:] > 0, np.inf, 1.0))
        return ratio

    @property
    def snapshot_ks(self):
        return [s.k for s in self.snapshots]

    def snapshot(self, k):
        for s in self.snapshots:
            if s.k == k:
                return s
        raise KeyError(f"no snapshot at iteration {k}")

    @property
    def initial(self):
        return self.snapshots[0]

    @property
    def final(self):
        return self.snapshots[-1]

    @property
    def end_of_ee(self):
        return self.snapshot(self.params.K0)


def _wants_snapshot(k, K0, ee_stride, embed_stride):
    if k <= K0:
        return k % ee_stride == 0
    return (k - K0) % embed_stride == 0


def _thin(snapshots, pinned):
    keep = []
    loose = 0
    for s in snapshots:
        if s.k in pinned:
            keep.append(s)
        else:
            if loose % 2 == 0:
                keep.append(s)
            loose += 1
    return keep


def resolve_init(init, P, params):
    n = P.shape[0]
    if isinstance(init, EmbeddingState):
        state = init
    elif isinstance(init, str):
        if init == "random":
            state = init_random(n, params.sigma_n, params.seed)
        elif init == "spectral":
            state = init_spectral(P, params.sigma_n)
        else:
            raise ValueError(f"unknown init mode {init!r}")
    else:
        state = EmbeddingState(np.asarray(init, dtype=np.float64))
    if state.n != n:
        raise ValueError(f"initialization has {state.n} points, P has {n}")
    return EmbeddingState(state.coords, Stage.EARLY_EXAGGERATION, 0)


def run(P, params, init="random", *, ee_stride=1, embed_stride=5,
        max_snapshots=MAX_SNAPSHOTS):
    """Run ``K0`` exaggerated steps then ``K1`` embedding steps.

    ``init`` is ``"random"``, ``"spectral"``, an :class:`EmbeddingState` or an
    n x 2 array. The initial state, the end of early exaggeration and the final
    state are always kept as snapshots.
    """
    P = check_affinity(P)
    state = resolve_init(init, P, params)
    K0, K1 = params.K0, params.K1
    total = K0 + K1
    pinned = {0, K0, total}
    ee_stride, embed_stride = int(ee_stride), int(embed_stride)
    if ee_stride < 1 or embed_stride < 1:
        raise ValueError("snapshot strides must be >= 1")

    log = TrajectoryLog(params=params, metadata={
        "generator": GENERATOR_NAME,
        "backend": BACKEND,
        "init": init if isinstance(init, str) else "given",
    })
    diam = np.empty(total + 1)
    stages = [Stage.EARLY_EXAGGERATION] * (K0 + 1) + [Stage.EMBEDDING] * K1
    snapshots = [state]

    Y = state.coords
    for k in range(total):
        if k < K0:
            alpha, h = params.alpha, params.h
        else:
            alpha, h = 1.0, params.h_prime
        Y, _, dmax = kernels.tsne_step(P, Y, alpha, h)
        diam[k] = math.sqrt(dmax)
        _guard(Y, k + 1)
        kk = k + 1
        if kk in pinned or _wants_snapshot(kk, K0, ee_stride, embed_stride):
            snapshots.append(EmbeddingState(Y, stages[kk], kk))
            if len(snapshots) > max_snapshots:
                snapshots = _thin(snapshots, pinned)
                ee_stride *= 2
                embed_stride *= 2
    diam[total] = math.sqrt(kernels.max_sq_dist(Y))

    log.snapshots = snapshots
    log.diameter = diam
    log.stage = stages
    return log
