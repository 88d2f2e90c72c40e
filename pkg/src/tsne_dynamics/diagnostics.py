"""Measurements on trajectories and on the linear surrogates.

Ratios whose denominator vanishes come back as ``math.inf``; the JSON
serializer in :class:`DiagnosticReport` writes them as the string ``"inf"``.
"""

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import kernels
from .affinity import s_matrix
from .engine import Stage, TrajectoryLog
from .spectral import (
    ComponentLabels,
    connected_components,
    eig_sym,
    h_matrix,
    indicator_basis,
    laplacian,
    laplacian_eigenbasis,
    spectral_norm,
)
from .theory import (
    block_surrogate,
    gradient_flow,
    null_space_limit,
    power_surrogate,
    repulsion_forces,
    surrogate_matrix,
)

PHASE_TOL = 1e-3
PHASE_RUN = 10
ZERO_GUARD = 1e-300


def _coords(state):
    return np.asarray(getattr(state, "coords", state), dtype=np.float64)


def _labels(labels):
    return labels if isinstance(labels, ComponentLabels) else ComponentLabels.from_labels(labels)


def _ratio(num, den):
    if den <= ZERO_GUARD:
        return 0.0 if num <= ZERO_GUARD else math.inf
    return num / den


def diameter(state):
    """Largest pairwise Euclidean distance."""
    Y = _coords(state)
    if Y.shape[0] < 2:
        raise ValueError("diameter needs at least 2 points")
    return math.sqrt(kernels.max_sq_dist(np.ascontiguousarray(Y)))


# ---------------------------------------------------------------------------
# early exaggeration


class SurrogateDeviation(NamedTuple):
    ks: np.ndarray
    values: np.ndarray
    missing: list


def surrogate_deviation(traj, P, alpha=None, h=None):
    """max_l ||y_l^(k) - [I - h L(alpha P - H_n)]^k y_l^(0)|| / ||y_l^(0)|| per EE snapshot.

    ``alpha`` and ``h`` default to the run's parameters. Iterations
    0..K0 without a snapshot are listed in ``missing``.
    """
    alpha = traj.params.alpha if alpha is None else alpha
    h = traj.params.h if h is None else h
    K0 = traj.params.K0
    snaps = [s for s in traj.snapshots if s.k <= K0]
    if not snaps or snaps[0].k != 0:
        raise ValueError("trajectory has no initial snapshot")
    Y0 = snaps[0].coords
    path = power_surrogate(P, alpha, h, Y0, K0, return_path=True)
    norms = np.linalg.norm(Y0, axis=0)
    ks = np.array([s.k for s in snaps])
    vals = np.array([
        np.max(np.linalg.norm(s.coords - path[s.k], axis=0) / norms) for s in snaps
    ])
    missing = sorted(set(range(K0 + 1)) - set(ks.tolist()))
    return SurrogateDeviation(ks, vals, missing)


def g_inter_bound(P, Y, alpha):
    """Entrywise bound on |S_ij - alpha p_ij + 1/(n(n-1))| for eta = diam^2 < 1.

    Returns ``(deviation, bound)`` as n x n arrays with zero diagonals, or
    ``(deviation, None)`` when eta >= 1.
    """
    Y = _coords(Y)
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    eta = diameter(Y) ** 2
    dev = np.abs(s_matrix(P, Y, alpha) - (alpha * P - h_matrix(n)))
    np.fill_diagonal(dev, 0.0)
    if eta >= 1:
        return dev, None
    bound = alpha * P * eta + 2.0 * eta / (n * (n - 1) * (1.0 - eta))
    np.fill_diagonal(bound, 0.0)
    return dev, bound


def s_approx_error(P, Y, alpha):
    """||S_alpha - (alpha P - H_n)|| / ||alpha P - H_n|| in spectral norm."""
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    target = alpha * P - h_matrix(n)
    den = spectral_norm(target)
    num = spectral_norm(s_matrix(P, Y, alpha) - target)
    scale = alpha * spectral_norm(P) + 1.0 / (n - 1)
    if den <= 1e-14 * scale:
        return math.inf
    return num / den


def s_approx_bound(P, Y, alpha):
    """Upper bound on :func:`s_approx_error` from the entrywise bound.

    Uses ||A|| <= max row sum of |A| for symmetric A; ``math.inf`` if eta >= 1.
    """
    P = np.asarray(P, dtype=np.float64)
    _, bound = g_inter_bound(P, Y, alpha)
    if bound is None:
        return math.inf
    den = spectral_norm(alpha * P - h_matrix(P.shape[0]))
    return _ratio(float(bound.sum(axis=1).max()), den)


class Localization(NamedTuple):
    ratio: float   # max_{k <= K0} diam^(k) / max_l ||y_l^(0)||_inf
    holds: bool


def localization_check(traj, factor=10.0):
    Y0 = traj.initial.coords
    ref = float(np.abs(Y0).max())
    worst = float(traj.diameter[: traj.params.K0 + 1].max())
    r = _ratio(worst, ref)
    return Localization(r, r <= factor)


# ---------------------------------------------------------------------------
# cluster geometry


def separation_ratio(state, labels):
    """max intra-cluster distance / min inter-cluster distance.

    0 when every cluster is a single point and clusters are apart; ``inf`` when
    two clusters touch, even if every cluster is a single point. A single cluster has no inter distance: ``inf``.
    """
    Y = _coords(state)
    lab = _labels(labels).labels
    if lab.size != Y.shape[0]:
        raise ValueError("labels do not cover the embedding")
    D = kernels.sq_dists(np.ascontiguousarray(Y))
    same = lab[:, None] == lab[None, :]
    np.fill_diagonal(same, False)
    cross = lab[:, None] != lab[None, :]
    intra = math.sqrt(D[same].max()) if same.any() else 0.0
    if not cross.any():
        return math.inf
    inter = math.sqrt(D[cross].min())
    if inter <= ZERO_GUARD:
        return math.inf
    return intra / inter


def null_space_distance(state, Y0, labels):
    """max_l ||y_l - z_l|| / ||y_l^(0)|| with z_l the blockwise means of y_l^(0)."""
    Y = _coords(state)
    Y0 = _coords(Y0)
    Theta = indicator_basis(_labels(labels))
    Z = Theta @ (Theta.T @ Y0)
    return float(np.max(np.linalg.norm(Y - Z, axis=0) / np.linalg.norm(Y0, axis=0)))


# ---------------------------------------------------------------------------
# embedding stage


def _embedding_diameters(traj):
    """(ks, diameters) over the embedding stage, starting at k = K0."""
    if isinstance(traj, TrajectoryLog):
        K0 = traj.params.K0
        d = np.asarray(traj.diameter[K0:], dtype=np.float64)
        return np.arange(K0, K0 + d.size), d
    states = list(traj)
    d = np.array([diameter(s) for s in states])
    ks = np.array([getattr(s, "k", i) for i, s in enumerate(states)])
    return ks, d


class AmplificationTrace(NamedTuple):
    ks: np.ndarray       # ratio[i] = diam^(ks[i] + 1) / diam^(ks[i])
    ratios: np.ndarray
    phase_end: int       # first k of a run of PHASE_RUN ratios below 1 + PHASE_TOL, or None

    def in_phase(self):
        if self.phase_end is None:
            return np.ones(self.ks.size, dtype=bool)
        return self.ks < self.phase_end


def amplification_trace(traj, tol=PHASE_TOL, run=PHASE_RUN):
    """Consecutive diameter ratios over the embedding stage and the end of amplification.

    ``traj`` is a :class:`TrajectoryLog` or a sequence of states taken as
    consecutive embedding iterations.
    """
    ks, d = _embedding_diameters(traj)
    prev, nxt = d[:-1], d[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(prev > 0, nxt / prev, np.where(nxt > 0, np.inf, 1.0))
    below = ratios < 1.0 + tol
    phase_end = None
    streak = 0
    for i, b in enumerate(below):
        streak = streak + 1 if b else 0
        if streak == run:
            phase_end = int(ks[i - run + 1])
            break
    return AmplificationTrace(ks[:-1], ratios, phase_end)


class ExpansionCheck(NamedTuple):
    ks: np.ndarray
    increasing: np.ndarray   # diam^(k+1) > diam^(k)
    increment_ratio: np.ndarray  # (diam^(k+1) - diam^(k)) / (h' sigma_n / n^2)
    in_phase: np.ndarray

    @property
    def holds(self):
        return bool(np.all(self.increasing[self.in_phase]))


def expansion_check(traj, h_prime=None, sigma_n=None, n=None):
    """Strict diameter growth per embedding iteration, flagged against the amplification phase.

    The increment is reported relative to h' sigma_n / n^2 when those are
    known (taken from a :class:`TrajectoryLog` by default), NaN otherwise.
    """
    trace = amplification_trace(traj)
    ks, d = _embedding_diameters(traj)
    inc = np.diff(d)
    if isinstance(traj, TrajectoryLog):
        h_prime = traj.params.h_prime if h_prime is None else h_prime
        sigma_n = traj.params.sigma_n if sigma_n is None else sigma_n
        n = traj.initial.n if n is None else n
    if h_prime and sigma_n and n:
        rel = inc / (h_prime * sigma_n / n ** 2)
    else:
        rel = np.full(inc.size, np.nan)
    return ExpansionCheck(ks[:-1], inc > 0, rel, trace.in_phase())


class ForceResidual(NamedTuple):
    ks: np.ndarray
    ratios: np.ndarray          # max_i ||eps_i|| / min_r ||f_ir||
    identity_errors: np.ndarray


def force_residual(traj, P, labels, h_prime=None, ks=None):
    """Force-decomposition residual ratio at embedding-stage snapshots.

    ``traj`` is a :class:`TrajectoryLog` (all snapshots with k >= K0 unless
    ``ks`` picks some) or a sequence of states.
    """
    lab = _labels(labels)
    if isinstance(traj, TrajectoryLog):
        h_prime = traj.params.h_prime if h_prime is None else h_prime
        states = [s for s in traj.snapshots if s.k >= traj.params.K0]
    else:
        states = list(traj)
    if h_prime is None:
        raise ValueError("h_prime is required")
    if ks is not None:
        wanted = set(int(k) for k in ks)
        states = [s for s in states if s.k in wanted]
    out_k, out_r, out_e = [], [], []
    for s in states:
        dec = repulsion_forces(s, P, lab, h_prime)
        per_point = dec.residual_ratio()
        out_k.append(getattr(s, "k", len(out_k)))
        out_r.append(float(per_point.max()) if per_point.size else 0.0)
        out_e.append(dec.identity_error)
    return ForceResidual(np.array(out_k), np.array(out_r), np.array(out_e))


# ---------------------------------------------------------------------------
# spectral conditions


@dataclass
class EigengapReport:
    R: int
    h_lambda_R1: float        # h * lambda_{R+1}(L(alpha P))
    h_lambda_n: float         # h * lambda_n(L(alpha P))
    kappa: float
    t2_holds: bool
    perturbation: float       # ||L(P* - P)||
    budget: float             # 1 / (h alpha ||L(P* - P)||)
    R_n: float
    K0: int

    def as_dict(self):
        return dict(self.__dict__)


def eigengap_report(P, alpha, h, K0, sigma_n, labels=None, kappa=None, null_tol=1e-10):
    """Check kappa < h lambda_{R+1}(L(alpha P)) <= h lambda_n(L(alpha P)) < 1.

    R and the block surrogate P* come from ``labels`` (inter-label entries of
    P zeroed) or, without labels, from the connected components of P. The
    eigenvalues are those of L(alpha P*), whose null space has dimension R.
    ``kappa`` defaults to 0, i.e. only positivity of the gap is required.
    R_n uses sigma_n as the bound on max_l ||y_l^(0)||_inf.
    """
    P = np.asarray(P, dtype=np.float64)
    n = P.shape[0]
    lab = connected_components(P) if labels is None else _labels(labels)
    Pstar = block_surrogate(P, lab)
    lam = eig_sym(laplacian(alpha * Pstar)).eigenvalues
    R = lab.R
    hR1 = h * float(lam[R]) if R < n else 0.0
    hn = h * float(lam[-1])
    kap = 0.0 if kappa is None else float(kappa)
    pert = spectral_norm(laplacian(Pstar - P))
    budget = _ratio(1.0, h * alpha * pert)
    R_n = (1.0 - kap) ** K0 + h * K0 * (
        (alpha * n * float(np.abs(P).max()) + 1.0 / n) * sigma_n ** 2 + alpha * pert
    )
    return EigengapReport(R, hR1, hn, kap, bool(kap < hR1 <= hn < 1.0), pert, budget, R_n, K0)


class NullSpaceDeviation(NamedTuple):
    ks: np.ndarray
    off_null: np.ndarray   # ||(I - U U^T) G^k y|| / ||y||
    to_limit: np.ndarray   # ||G^k y - U U^T y|| / ||y||
    rate: float            # 1 + h/(n-1) - h lambda_{R+1}(L(alpha P*))
    bound: np.ndarray      # rate^k


def null_space_deviation(Pstar, labels, alpha, h, y, kmax):
    """Distance of G^k y from the null space of L(P*), G = I - h L(alpha P* - H_n).

    ``off_null`` is the component of G^k y outside span{theta_r} and obeys
    the geometric bound; ``to_limit`` is measured against U U^T y and also
    carries the (1 + h/(n-1))^k growth of the null directions orthogonal to 1.
    """
    lab = _labels(labels)
    Pstar = np.asarray(Pstar, dtype=np.float64)
    n = Pstar.shape[0]
    y = np.asarray(y, dtype=np.float64)
    proj, _ = null_space_limit(Pstar, lab, y)
    Theta = indicator_basis(lab)
    path = power_surrogate(Pstar, alpha, h, y, kmax, return_path=True)
    ny = np.linalg.norm(y)
    lam = eig_sym(laplacian(alpha * Pstar)).eigenvalues
    rate = 1.0 + h / (n - 1) - h * float(lam[lab.R])
    off, lim = [], []
    for Gy in path:
        off.append(np.linalg.norm(Gy - Theta @ (Theta.T @ Gy)) / ny)
        lim.append(np.linalg.norm(Gy - proj) / ny)
    ks = np.arange(kmax + 1)
    return NullSpaceDeviation(ks, np.array(off), np.array(lim), rate, rate ** ks.astype(float))


class EulerFlowGap(NamedTuple):
    measured: float
    bound: float


def euler_flow_gap(P, alpha, h, y0, T):
    """sup_{k <= T/h} ||y~^(k) - Y(kh)|| / ||Y(kh)|| and the bound T h ||L(alpha P - H_n)||^2."""
    if T == 0:
        return EulerFlowGap(0.0, 0.0)
    if T < 0 or h <= 0:
        raise ValueError("need T >= 0 and h > 0")
    P = np.asarray(P, dtype=np.float64)
    dec = laplacian_eigenbasis(P)
    K = int(math.floor(T / h + 1e-12))
    path = power_surrogate(P, alpha, h, y0, K, return_path=True)
    worst = 0.0
    for k in range(K + 1):
        Yf = gradient_flow(P, alpha, y0, k * h, decomposition=dec)
        worst = max(worst, _ratio(np.linalg.norm(path[k] - Yf), np.linalg.norm(Yf)))
    L2 = spectral_norm(surrogate_matrix(P, alpha)) ** 2
    return EulerFlowGap(worst, T * h * L2)


# ---------------------------------------------------------------------------
# report


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in (v.tolist() if isinstance(v, np.ndarray) else v)]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if math.isnan(v):
            return "nan"
        return v
    if isinstance(v, Stage):
        return v.value
    return v


@dataclass
class DiagnosticReport:
    scalars: dict = field(default_factory=dict)
    series: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def to_dict(self):
        out = dict(self.scalars)
        out["series"] = self.series
        out["flags"] = self.flags
        out["metadata"] = self.metadata
        return _jsonable(out)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


THRESHOLDS = {"separation_ratio": 0.2, "force_residual": 0.2, "localization": 10.0}


def build_report(log, P, labels=None, metadata=None, thresholds=None, force_stride=10):
    """Collect the run's diagnostics.

    Per-iteration series (diameter, diam_ratio) have length K0 + K1 + 1.
    Label-dependent entries are skipped when ``labels`` is None.
    """
    th = dict(THRESHOLDS, **(thresholds or {}))
    p = log.params
    n = log.initial.n
    rep = DiagnosticReport(metadata=dict(metadata or {}))
    rep.metadata.update(params=p.as_dict(), n=n, **log.metadata)
    rep.series["diameter"] = log.diameter
    rep.series["diam_ratio"] = log.diam_ratio
    rep.series["stage"] = [s.value for s in log.stage]

    dev = surrogate_deviation(log, P)
    rep.series["surrogate_deviation"] = {"k": dev.ks, "value": dev.values}
    rep.scalars["surrogate_deviation_sup"] = float(dev.values.max())
    loc = localization_check(log, th["localization"])
    rep.scalars["localization_ratio"] = loc.ratio
    rep.flags["localization"] = loc.holds
    ee = log.end_of_ee
    rep.scalars["s_approx_error_end_of_ee"] = s_approx_error(P, ee.coords, p.alpha)

    trace = amplification_trace(log)
    rep.scalars["phase_end"] = trace.phase_end
    exp = expansion_check(log)
    rep.flags["expansion"] = exp.holds
    amp = exp.ks[exp.in_phase]
    rep.scalars["amplification_iterations"] = int(amp.size)
    rep.scalars["min_increment_ratio"] = float(exp.increment_ratio[exp.in_phase].min()) \
        if amp.size else math.nan

    if labels is not None:
        lab = _labels(labels)
        rep.scalars["separation_ratio"] = separation_ratio(ee, lab)
        rep.scalars["separation_ratio_final"] = separation_ratio(log.final, lab)
        rep.flags["separation"] = rep.scalars["separation_ratio"] < th["separation_ratio"]
        rep.scalars["null_space_distance_end_of_ee"] = null_space_distance(ee, log.initial, lab)
        gap = eigengap_report(P, p.alpha, p.h, p.K0, p.sigma_n, lab)
        rep.scalars["eigengap"] = gap.as_dict()
        rep.flags["eigengap_t2"] = gap.t2_holds
        snap_ks = [s.k for s in log.snapshots if s.k >= p.K0]
        if trace.phase_end is not None:
            snap_ks = [k for k in snap_ks if k < trace.phase_end]
        snap_ks = snap_ks[::max(1, int(force_stride))]
        if snap_ks and p.h_prime > 0:
            fr = force_residual(log, P, lab, ks=snap_ks)
            rep.series["force_residual"] = {"k": fr.ks, "value": fr.ratios}
            rep.scalars["force_residual_max"] = float(fr.ratios.max())
            rep.scalars["force_identity_error_max"] = float(fr.identity_errors.max())
            rep.flags["force_residual"] = rep.scalars["force_residual_max"] < th["force_residual"]
    return rep
