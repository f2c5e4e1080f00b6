"""Seeded synthetic data generators and the IDX image/label reader."""

import gzip
import struct

import numpy as np

from .errors import DimensionError, ParameterError

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


def gen_spiked(p, n, k, lambdas, seed=0, canonical=False):
    """Columns drawn as Gaussian combinations of k orthonormal components.

    Component energies are given by ``lambdas``; components are a random
    orthonormal frame, or k distinct canonical basis vectors when
    ``canonical`` is set.  Returns (X, U) with U the true components.
    """
    lambdas = np.asarray(lambdas, dtype=np.float64)
    if lambdas.shape != (k,):
        raise ParameterError(f"expected {k} energies, got {lambdas.shape}")
    if k > p:
        raise ParameterError("k must not exceed p")
    rng = np.random.default_rng(seed)
    if canonical:
        coords = rng.choice(p, size=k, replace=False)
        U = np.zeros((p, k))
        U[coords, np.arange(k)] = 1.0
    else:
        U, _ = np.linalg.qr(rng.standard_normal((p, k)))
    kappa = rng.standard_normal((k, n))
    return U @ (lambdas[:, None] * kappa), U


def gen_multivariate_t(p, n, dof=1.0, seed=0, normalize=False):
    """Heavy-tailed columns from a multivariate t with an AR(1)-style
    covariance C_ij = 2 * 0.5**|i-j| and zero location."""
    if dof <= 0:
        raise ParameterError("dof must be positive")
    idx = np.arange(p)
    C = 2.0 * 0.5 ** np.abs(idx[:, None] - idx[None, :])
    L = np.linalg.cholesky(C)
    rng = np.random.default_rng(seed)
    z = L @ rng.standard_normal((p, n))
    u = rng.chisquare(dof, size=n)
    X = z / np.sqrt(u / dof)[None, :]
    if normalize:
        X = X / np.linalg.norm(X, axis=0, keepdims=True)
    return X


def gen_clusters(p, n, K, separation=10.0, noise_sigma=1.0, seed=0):
    """K well-separated random centers plus isotropic Gaussian noise.

    Centers are unit directions scaled by ``separation``; membership is
    equiprobable.  Returns (X, labels).
    """
    if K < 1 or n < 1:
        raise ParameterError("need K >= 1 and n >= 1")
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((p, K))
    centers = separation * g / np.linalg.norm(g, axis=0, keepdims=True)
    labels = rng.integers(0, K, size=n)
    X = centers[:, labels] + noise_sigma * rng.standard_normal((p, n))
    return X, labels


def gen_mean_plus_noise(p, n, seed=0):
    """Columns x_i = xbar + eps_i with standard Gaussian noise; returns (X, xbar)."""
    rng = np.random.default_rng(seed)
    xbar = rng.standard_normal(p)
    return xbar[:, None] + rng.standard_normal((p, n)), xbar


def _open_maybe_gzip(path):
    fh = open(path, "rb")
    head = fh.read(2)
    fh.seek(0)
    if head == b"\x1f\x8b":
        fh.close()
        return gzip.open(path, "rb")
    return fh


def read_idx(path):
    """Read a big-endian IDX file: images -> (n, rows, cols) uint8,
    labels -> (n,) uint8.  Transparently handles gzip."""
    with _open_maybe_gzip(path) as fh:
        magic = struct.unpack(">I", fh.read(4))[0]
        if magic == IDX_IMAGES_MAGIC:
            n, rows, cols = struct.unpack(">III", fh.read(12))
            data = np.frombuffer(fh.read(n * rows * cols), dtype=np.uint8)
            if data.size != n * rows * cols:
                raise DimensionError(f"truncated IDX image file: {path}")
            return data.reshape(n, rows, cols)
        if magic == IDX_LABELS_MAGIC:
            (n,) = struct.unpack(">I", fh.read(4))
            data = np.frombuffer(fh.read(n), dtype=np.uint8)
            if data.size != n:
                raise DimensionError(f"truncated IDX label file: {path}")
            return data
    raise DimensionError(f"not an IDX file (magic 0x{magic:08x}): {path}")


def load_idx_matrix(images_path, labels_path, digits=None):
    """Vectorize an IDX image set into a (rows*cols, n) float64 matrix.

    Optionally keeps only the samples whose label is in ``digits``.
    Returns (X, labels).
    """
    images = read_idx(images_path)
    labels = read_idx(labels_path)
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise DimensionError("image/label files do not match")
    X = images.reshape(images.shape[0], -1).T.astype(np.float64)
    labels = labels.astype(np.int64)
    if digits is not None:
        keep = np.isin(labels, list(digits))
        X = X[:, keep]
        labels = labels[keep]
    return X, labels
