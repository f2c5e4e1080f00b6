"""Unbiased mean/covariance estimators from a sketch, plus PCA helpers.

The estimators undo the sampling in expectation: the mean uses the p/m
inclusion-probability rescale, the covariance uses the p(p-1)/(m(m-1))
pair-inclusion rescale followed by a diagonal debias.  Covariances are
accumulated and reported in the preconditioned domain; principal components
are mapped back to the original domain one vector at a time.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .sketch import SparseSketch
from .transform import unprecondition

SYMMETRY_RTOL = 1e-9


@dataclass
class CovarianceEstimate:
    """Symmetric p_pad x p_pad estimate of the preconditioned-data covariance."""

    matrix: np.ndarray
    n_used: int
    domain: str = "preconditioned"


def estimate_mean(sketch: SparseSketch) -> np.ndarray:
    """Unbiased estimate of the sample mean of the original columns.

    Computes (p/m) * (1/n) * sum of sketch columns in the preconditioned
    domain, then applies the adjoint transform and truncates the padding.
    """
    if sketch.n < 1:
        raise ParameterError("empty sketch")
    p, m, n = sketch.p, sketch.m, sketch.n
    acc = np.bincount(
        sketch.indices.ravel().astype(np.int64),
        weights=sketch.values.ravel(),
        minlength=p,
    )
    mean_pre = (p / m) * acc / n
    return unprecondition(mean_pre, sketch.spec)[: sketch.spec.p]


def estimate_covariance(sketch: SparseSketch) -> CovarianceEstimate:
    """Unbiased covariance estimate of the preconditioned data.

    Accumulates the rescaled sparse outer products w w^T in O(n m^2) and
    removes the sampling-induced diagonal bias.  For m == p this reduces to
    the exact empirical covariance.
    """
    if sketch.m < 2:
        raise ParameterError("covariance estimation needs m >= 2")
    if sketch.n < 1:
        raise ParameterError("empty sketch")
    p, m, n = sketch.p, sketch.m, sketch.n
    W = sketch.to_csc()
    C = (W @ W.T).toarray()
    C *= (p * (p - 1)) / (m * (m - 1)) / n
    diag = C.diagonal().copy()
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, diag * (1.0 - (p - m) / (p - 1)))
    return CovarianceEstimate(matrix=C, n_used=n)


def top_eigenvectors(C: np.ndarray, k: int) -> np.ndarray:
    """Orthonormal eigenvectors of the k largest eigenvalues, as columns."""
    C = np.asarray(C, dtype=np.float64)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ParameterError("expected a square matrix")
    p = C.shape[0]
    if not 1 <= k <= p:
        raise ParameterError(f"need 1 <= k <= {p}, got {k}")
    scale = max(float(np.abs(C).max()), 1e-300)
    if np.abs(C - C.T).max() > SYMMETRY_RTOL * scale:
        raise ParameterError("matrix is not symmetric within tolerance")
    w, V = np.linalg.eigh(0.5 * (C + C.T))
    return V[:, ::-1][:, :k]


def explained_variance(U: np.ndarray, X: np.ndarray) -> float:
    """Fraction of data energy captured by the subspace spanned by U's columns."""
    U = np.asarray(U, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    total = float((X * X).sum())
    if total == 0.0:
        raise ParameterError("zero data matrix")
    proj = U.T @ X
    return float((proj * proj).sum() / total)


def recovered_pc_count(
    U_est: np.ndarray, U_true: np.ndarray, threshold: float = 0.95
) -> int:
    """Count true components greedily matched to a distinct estimate.

    Repeatedly takes the globally largest |inner product|; a true component
    counts as recovered when its match exceeds ``threshold``, and each
    estimated component is consumed by at most one true component.
    """
    M = np.abs(np.asarray(U_true).T @ np.asarray(U_est))
    count = 0
    for _ in range(min(M.shape)):
        r, c = np.unravel_index(np.argmax(M), M.shape)
        if M[r, c] <= threshold:
            break
        count += 1
        M[r, :] = -1.0
        M[:, c] = -1.0
    return count


def principal_components(sketch: SparseSketch, k: int) -> np.ndarray:
    """Top-k PCs of the sketched data, mapped back to the original domain.

    Eigenvectors are computed on the preconditioned-domain covariance
    estimate and individually unpreconditioned and truncated, so no dense
    p x p conjugation is ever performed.
    """
    est = estimate_covariance(sketch)
    V = top_eigenvectors(est.matrix, k)
    spec = sketch.spec
    U = np.empty((spec.p, k))
    for j in range(k):
        U[:, j] = unprecondition(V[:, j], spec)[: spec.p]
    return U
