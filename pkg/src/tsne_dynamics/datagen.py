"""Synthetic clustered data and loaders for external labelled datasets.

Two generative models: a Gaussian mixture whose means sit on a regular
simplex (so the minimum pairwise mean distance is exactly rho), and nested
spheres with radial noise. Loaders read IDX (MNIST) and numeric CSV files.
"""

import csv
import gzip
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CSVFormatError,
    DimensionOverflowError,
    IDXFormatError,
    TruncatedPayloadError,
    UnsupportedMagicError,
)
from .rng import make_rng, spawn_rngs
from .spectral import eig_sym

GMM_PROPORTIONS = (0.1, 0.1, 0.1, 0.15, 0.25, 0.3)
SPHERE_RADII = (10.0, 25.0, 50.0)
SPHERE_PROPORTIONS = (0.17, 0.33, 0.5)

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
IDX_MAX_ELEMENTS = 2 ** 31 - 1


@dataclass
class LabeledData:
    data: np.ndarray
    labels: np.ndarray
    R: int
    pi: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.data.ndim != 2 or self.labels.shape != (self.data.shape[0],):
            raise ValueError("data must be n x p with one label per row")
        if self.R < 1:
            raise ValueError("R must be >= 1")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.R):
            raise ValueError(f"labels must lie in [0, {self.R})")
        if self.pi is not None:
            self.pi = _check_pi(self.pi)
            if self.pi.size != self.R:
                raise ValueError("pi must have R entries")

    @property
    def n(self):
        return self.data.shape[0]

    @property
    def p(self):
        return self.data.shape[1]


def _check_pi(pi):
    pi = np.asarray(pi, dtype=np.float64)
    if pi.ndim != 1 or pi.size == 0 or np.any(pi < 0) or abs(pi.sum() - 1.0) > 1e-12:
        raise ValueError("pi must be a probability vector")
    return pi


def remap_labels(raw):
    """Map arbitrary integer labels to 0..R-1 in order of first appearance."""
    raw = np.asarray(raw)
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inverse].astype(np.int64), int(first.size)


# ---------------------------------------------------------------------------
# Gaussian mixture


def _simplex_vertices(R):
    # Helmert basis of the complement of 1: row r is e_r - 1/R in R - 1 coords,
    # all pairwise distances sqrt(2)
    V = np.zeros((R, R - 1))
    for j in range(1, R):
        c = 1.0 / math.sqrt(j * (j + 1))
        V[:j, j - 1] = c
        V[j, j - 1] = -j * c
    return V


def _haar_orthogonal(p, rng):
    Q, Rm = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.where(np.diag(Rm) < 0, -1.0, 1.0)[None, :]


def gmm_means(R, p, rho, seed=0):
    """R means in R^p with every pairwise distance exactly ``rho``.

    Regular simplex in the first R - 1 coordinates, then a seeded Haar
    rotation of R^p.
    """
    if R < 1 or p < 1:
        raise ValueError("R and p must be >= 1")
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    if R - 1 > p:
        raise ValueError(f"a regular simplex with {R} vertices does not fit in R^{p}")
    M = np.zeros((R, p))
    if R > 1:
        M[:, :R - 1] = _simplex_vertices(R) * (rho / math.sqrt(2.0))
    return M @ _haar_orthogonal(p, make_rng(seed)).T


def _sqrt_cov(Sigma, p):
    S = np.asarray(Sigma, dtype=np.float64)
    if S.ndim == 0:
        if S < 0:
            raise ValueError("covariance scale must be nonnegative")
        return math.sqrt(float(S)), "scalar"
    if S.ndim == 1:
        if S.size != p:
            raise ValueError(f"diagonal covariance needs {p} entries")
        if np.any(S < 0):
            raise ValueError("diagonal covariance must be nonnegative")
        return np.sqrt(S), "diag"
    if S.shape != (p, p):
        raise ValueError(f"covariance must be {p} x {p}")
    w, U = eig_sym(S)
    if w.min() < -1e-10:
        raise ValueError(f"covariance is not PSD (eigenvalue {w.min():.3g})")
    w = np.clip(w, 0.0, None)
    return (U * np.sqrt(w)[None, :]) @ U.T, "full"


def gmm_sample(n, means, Sigma=1.0, pi=None, seed=0):
    """n draws of X_i = mu_{z_i} + Sigma^(1/2) W_i with z_i ~ Categorical(pi).

    ``Sigma`` is a scalar (Sigma = s I), a length-p diagonal, or a full
    p x p PSD matrix. ``pi`` defaults to uniform.
    """
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    R, p = means.shape
    pi = np.full(R, 1.0 / R) if pi is None else _check_pi(pi)
    if pi.size != R:
        raise ValueError("pi and means disagree on R")
    if n < 1:
        raise ValueError("n must be >= 1")
    root, kind = _sqrt_cov(Sigma, p)
    if isinstance(seed, np.random.Generator):
        label_rng = noise_rng = seed
    else:
        label_rng, noise_rng = spawn_rngs(seed, 2)
    z = label_rng.choice(R, size=n, p=pi)
    W = noise_rng.standard_normal((n, p))
    if kind == "scalar":
        noise = root * W
    elif kind == "diag":
        noise = W * root[None, :]
    else:
        noise = W @ root
    return LabeledData(means[z] + noise, z, R, pi)


def gmm_preset(n=1500, p=100, R=6, rho2=None, pi=GMM_PROPORTIONS, seed=0):
    """Mixture with identity covariance and rho^2 = p unless given."""
    rho = math.sqrt(p if rho2 is None else rho2)
    mean_rng, sample_rng = spawn_rngs(seed, 2)
    data = gmm_sample(n, gmm_means(R, p, rho, mean_rng), 1.0, pi, sample_rng)
    data.metadata.update(model="gmm", n=n, p=p, R=R, rho2=rho * rho, seed=seed)
    return data


# ---------------------------------------------------------------------------
# nested spheres


def nested_spheres(n, p, radii, sigma=1.0, pi=None, seed=0):
    """X_i = (rho_{z_i} + xi_i) u_i, u_i uniform on the unit sphere, xi_i ~ N(0, sigma^2)."""
    radii = np.asarray(radii, dtype=np.float64)
    if radii.ndim != 1 or radii.size == 0 or radii[0] <= 0 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    R = radii.size
    pi = np.full(R, 1.0 / R) if pi is None else _check_pi(pi)
    if pi.size != R:
        raise ValueError("pi and radii disagree on R")
    label_rng, dir_rng, noise_rng = spawn_rngs(seed, 3)
    z = label_rng.choice(R, size=n, p=pi)
    G = dir_rng.standard_normal((n, p))
    u = G / np.linalg.norm(G, axis=1, keepdims=True)
    xi = sigma * noise_rng.standard_normal(n)
    X = (radii[z] + xi)[:, None] * u
    return LabeledData(X, z, R, pi, {"model": "spheres", "radii": radii.tolist(),
                                     "sigma": sigma, "seed": seed})


def spheres_preset(n=1500, p=50, radii=SPHERE_RADII, sigma=1.0, pi=SPHERE_PROPORTIONS, seed=0):
    return nested_spheres(n, p, radii, sigma, pi, seed)


# ---------------------------------------------------------------------------
# IDX


def _open(path, mode):
    return gzip.open(path, mode) if str(path).endswith(".gz") else open(path, mode)


def read_idx(path):
    """Raw unsigned-byte tensor of an IDX file (1-D labels or 3-D images)."""
    with _open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4:
        raise TruncatedPayloadError(f"{path}: file shorter than the magic number")
    (magic,) = struct.unpack(">I", buf[:4])
    if magic == IDX_IMAGES:
        ndim = 3
    elif magic == IDX_LABELS:
        ndim = 1
    else:
        raise UnsupportedMagicError(f"{path}: unsupported magic 0x{magic:08x}")
    header = 4 + 4 * ndim
    if len(buf) < header:
        raise TruncatedPayloadError(f"{path}: truncated header")
    dims = struct.unpack(">" + "I" * ndim, buf[4:header])
    count = math.prod(dims)
    if count > IDX_MAX_ELEMENTS:
        raise DimensionOverflowError(f"{path}: dims {dims} exceed {IDX_MAX_ELEMENTS} elements")
    have = len(buf) - header
    if have < count:
        raise TruncatedPayloadError(f"{path}: payload has {have} bytes, dims {dims} need {count}")
    if have > count:
        raise IDXFormatError(f"{path}: {have - count} trailing bytes after payload")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(path):
    """Images as an n x (rows*cols) matrix scaled to [0, 1]."""
    raw = read_idx(path)
    if raw.ndim != 3:
        raise UnsupportedMagicError(f"{path}: expected an image tensor (magic 0x00000803)")
    return raw.reshape(raw.shape[0], -1).astype(np.float64) / 255.0


def load_idx_labels(path):
    raw = read_idx(path)
    if raw.ndim != 1:
        raise UnsupportedMagicError(f"{path}: expected a label vector (magic 0x00000801)")
    return raw.astype(np.int64)


def write_idx(path, array, image_shape=None):
    """Write labels (1-D ints) or images (n x rows x cols, or n x p with
    ``image_shape``) as IDX. Floats are taken as [0, 1] and scaled by 255."""
    A = np.asarray(array)
    if A.dtype.kind == "f":
        if A.size and (A.min() < 0 or A.max() > 1):
            raise ValueError("float images must lie in [0, 1]")
        A = np.rint(A * 255.0).astype(np.uint8)
    else:
        if A.size and (A.min() < 0 or A.max() > 255):
            raise ValueError("integer payload must fit in an unsigned byte")
        A = A.astype(np.uint8)
    if image_shape is not None:
        A = A.reshape(A.shape[0], *image_shape)
    if A.ndim == 1:
        magic = IDX_LABELS
    elif A.ndim == 3:
        magic = IDX_IMAGES
    else:
        raise ValueError("IDX payload must be 1-D labels or 3-D images")
    with _open(path, "wb") as f:
        f.write(struct.pack(">I" + "I" * A.ndim, magic, *A.shape))
        f.write(np.ascontiguousarray(A).tobytes())


def mnist_subset(images_path, labels_path, digits=(2, 4, 6, 8), per_digit=None, seed=0):
    """Images of the chosen digits, ``per_digit`` drawn at random from each.

    Labels follow the order of ``digits``; chosen row indices of the source
    file are kept in ``metadata["indices"]``.
    """
    X = load_idx(images_path)
    y = load_idx_labels(labels_path)
    if y.size != X.shape[0]:
        raise IDXFormatError("image and label counts differ")
    rng = make_rng(seed)
    picked, labels = [], []
    for r, d in enumerate(digits):
        idx = np.flatnonzero(y == d)
        if per_digit is not None:
            if per_digit > idx.size:
                raise ValueError(f"digit {d} has only {idx.size} images")
            idx = np.sort(rng.choice(idx, size=per_digit, replace=False))
        picked.append(idx)
        labels.append(np.full(idx.size, r))
    indices = np.concatenate(picked)
    R = len(digits)
    return LabeledData(X[indices], np.concatenate(labels), R, None, {
        "source": str(images_path), "digits": list(digits),
        "per_digit": per_digit, "seed": seed, "indices": indices.tolist(),
    })


# ---------------------------------------------------------------------------
# CSV


def load_csv(path, has_labels=False):
    """Numeric CSV, optionally with an integer label in the last column."""
    rows = []
    width = None
    with open(path, newline="") as f:
        for line_no, row in enumerate(csv.reader(f), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
                if has_labels and width < 2:
                    raise CSVFormatError("need at least one feature and a label", line_no)
            elif len(row) != width:
                raise CSVFormatError(f"expected {width} fields, got {len(row)}", line_no)
            try:
                rows.append([float(c) for c in row])
            except ValueError:
                raise CSVFormatError(f"non-numeric cell in {row!r}", line_no) from None
            if has_labels and not float(row[-1]).is_integer():
                raise CSVFormatError(f"label {row[-1]!r} is not an integer", line_no)
    if not rows:
        raise CSVFormatError("no data rows")
    A = np.array(rows)
    if not has_labels:
        return LabeledData(A, np.zeros(A.shape[0], dtype=np.int64), 1)
    labels, R = remap_labels(A[:, -1].astype(np.int64))
    return LabeledData(A[:, :-1], labels, R)


def write_csv(path, data):
    """Write ``LabeledData`` (labels as last column) or a bare matrix."""
    if isinstance(data, LabeledData):
        X, labels = data.data, data.labels
    else:
        X, labels = np.asarray(data, dtype=np.float64), None
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for i, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            w.writerow(cells)
