"""Kernel PCA with a cubic polynomial kernel."""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ArtifactError, DegeneracyError, ParameterError

KPCA_MAGIC = b"KPCA"
KPCA_VERSION = 1
RANK_FLOOR = 1e-10


def poly_kernel(x, y, gamma=None, coef0=1.0, degree=3):
    """(gamma * <x, y> + coef0) ** degree, gamma defaulting to 1/dim."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError(f"kernel arguments must be equal-length vectors, got {x.shape} and {y.shape}")
    if gamma is None:
        gamma = 1.0 / x.size
    return float((gamma * np.dot(x, y) + coef0) ** degree)


def kernel_matrix(A, B, gamma, coef0, degree):
    return (gamma * (A @ B.T) + coef0) ** degree


@dataclass(frozen=True)
class KpcaProjector:
    train: np.ndarray  # standardized training pool, n x d
    gamma: float
    coef0: float
    degree: int
    mean: np.ndarray
    scale: np.ndarray
    eigenvalues: np.ndarray  # full spectrum, non-increasing, clipped at 0
    alphas: np.ndarray  # n x m, lambda_i * |alpha_i|^2 = 1
    k_col_means: np.ndarray  # column means of the uncentered training kernel
    k_grand_mean: float

    @property
    def n_components(self):
        return self.alphas.shape[1]

    @property
    def input_dim(self):
        return self.train.shape[1]

    def explained_variance_ratio(self):
        return self.eigenvalues / self.eigenvalues.sum()


def _standardizer(X, standardize):
    d = X.shape[1]
    if not standardize:
        return np.zeros(d), np.ones(d)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale <= 1e-12 * max(1.0, float(np.abs(X).max(initial=0.0)))] = 1.0
    return mean, scale


def center_kernel(K):
    col = K.mean(axis=0)
    return K - col[None, :] - col[:, None] + K.mean()


def fit(X, n_components=20, gamma=None, coef0=1.0, degree=3, standardize=True):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ParameterError("training matrix must be 2-D")
    n, d = X.shape
    if n < n_components:
        raise ParameterError(f"need at least {n_components} rows, got {n}")
    if not np.all(np.isfinite(X)):
        raise ParameterError("training matrix has non-finite entries")
    gamma = 1.0 / d if gamma is None else float(gamma)

    mean, scale = _standardizer(X, standardize)
    Z = (X - mean) / scale
    K = kernel_matrix(Z, Z, gamma, coef0, degree)
    Kc = center_kernel(K)
    Kc = 0.5 * (Kc + Kc.T)

    lam, vec = scipy.linalg.eigh(Kc)
    order = np.argsort(lam)[::-1]
    lam, vec = lam[order], vec[:, order]
    top = lam[0]
    usable = int(np.sum(lam > RANK_FLOOR * top)) if top > 0 else 0
    if usable < n_components:
        raise DegeneracyError(
            f"centered kernel has usable rank {usable}, need {n_components}", rank=usable
        )
    v = vec[:, :n_components]
    # sign convention: largest-magnitude coefficient positive
    pivot = v[np.argmax(np.abs(v), axis=0), np.arange(n_components)]
    v = v * np.sign(pivot)
    alphas = v / np.sqrt(lam[:n_components])
    return KpcaProjector(
        train=Z,
        gamma=gamma,
        coef0=float(coef0),
        degree=int(degree),
        mean=mean,
        scale=scale,
        eigenvalues=np.clip(lam, 0.0, None),
        alphas=alphas,
        k_col_means=K.mean(axis=0),
        k_grand_mean=float(K.mean()),
    )


def transform(p, X, chunk=8192):
    """Project one vector (-> m-vector) or a matrix of rows (-> rows x m)."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    X2 = np.atleast_2d(X)
    if X2.shape[1] != p.input_dim:
        raise ParameterError(f"expected dimension {p.input_dim}, got {X2.shape[1]}")
    out = np.empty((X2.shape[0], p.n_components))
    for start in range(0, X2.shape[0], chunk):
        Z = (X2[start : start + chunk] - p.mean) / p.scale
        Kx = kernel_matrix(Z, p.train, p.gamma, p.coef0, p.degree)
        Kx = Kx - Kx.mean(axis=1, keepdims=True) - p.k_col_means[None, :] + p.k_grand_mean
        out[start : start + chunk] = Kx @ p.alphas
    return out[0] if single else out


def explained_variance_curve(p):
    """[(k, cumulative share of the first k eigenvalues)] for k = 1..n."""
    cum = np.cumsum(p.eigenvalues) / p.eigenvalues.sum()
    cum = np.maximum.accumulate(np.minimum(cum, 1.0))
    cum[-1] = 1.0
    return [(i + 1, float(c)) for i, c in enumerate(cum)]


def subsample_pool(frames, cap, seed):
    """Uniform subsample without replacement, original order kept."""
    frames = np.asarray(frames)
    if frames.shape[0] <= cap:
        return frames
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(frames.shape[0], size=cap, replace=False))
    return frames[idx]


def save_projector(p, path):
    n, d = p.train.shape
    with open(path, "wb") as fh:
        fh.write(KPCA_MAGIC)
        fh.write(struct.pack("<IIIII", KPCA_VERSION, n, d, p.n_components, p.degree))
        fh.write(struct.pack("<ddd", p.gamma, p.coef0, p.k_grand_mean))
        for arr in (p.mean, p.scale, p.train, p.eigenvalues, p.alphas, p.k_col_means):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_projector(path):
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise ArtifactError(f"cannot read projector {path}: {exc}") from exc
    if data[:4] != KPCA_MAGIC:
        raise ArtifactError(f"{path}: not a KPCA projector (bad magic)")
    version, n, d, m, degree = struct.unpack_from("<IIIII", data, 4)
    if version != KPCA_VERSION:
        raise ArtifactError(f"{path}: projector version {version}, expected {KPCA_VERSION}")
    gamma, coef0, grand = struct.unpack_from("<ddd", data, 24)
    off = 48

    def take(*shape):
        nonlocal off
        count = int(np.prod(shape))
        arr = np.frombuffer(data, dtype="<f8", count=count, offset=off).reshape(shape)
        off += 8 * count
        return arr.astype(np.float64)

    mean, scale = take(d), take(d)
    train, eig = take(n, d), take(n)
    alphas, col = take(n, m), take(n)
    return KpcaProjector(train, gamma, coef0, degree, mean, scale, eig, alphas, col, grand)
