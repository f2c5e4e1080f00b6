"""K-means variants: the dense Lloyd baseline, sparsified K-means on a
sketch (one data pass), its two-pass refinement, and feature-space baselines.

The sparsified iteration minimizes the sampled objective
J' = sum_i || z_i - (mu'_{c_i} restricted to column i's support) ||^2
by alternating exact coordinate minimizers: assignments compare only the m
sampled coordinates of each column, and center updates are entry-wise means
weighted by per-coordinate sampling counts.  Both steps are exact minimizers
of J', so J' never increases.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment

from .errors import ParameterError
from ._hash import derive_seed
from .sketch import SparseSketch, as_source, plan_for, sketch_stream
from .transform import PreconditionSpec, unprecondition_columns

ORIGINAL = "original"
PRECONDITIONED = "preconditioned"


@dataclass
class CenterSet:
    K: int
    centers: np.ndarray  # (p, K), one center per column
    domain: str = ORIGINAL


@dataclass
class Assignments:
    labels: np.ndarray  # (n,) integer cluster ids in [0, K)


@dataclass
class CountDiagonal:
    """Per-cluster, per-coordinate sampling counts n_k^(j), shape (p, K)."""

    counts: np.ndarray

    def cluster_sizes(self, m: int) -> np.ndarray:
        return self.counts.sum(axis=0) // m

    def hk_deviations(self, m: int) -> np.ndarray:
        """max_j |p * n_k^(j) / (m * n_k) - 1| per cluster.

        This equals the spectral deviation from the identity of the diagonal
        system solved by the center update.
        """
        p = self.counts.shape[0]
        n_k = self.counts.sum(axis=0) / m
        safe = np.where(n_k > 0, n_k, 1.0)
        dev = np.abs(p * self.counts / (m * safe)[None, :] - 1.0).max(axis=0)
        return np.where(n_k > 0, dev, np.nan)


@dataclass
class KMeansResult:
    assignments: Assignments
    centers: CenterSet
    objective: float
    diagnostics: dict = field(default_factory=dict)


def _restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, restart])


def _pp_select(n: int, K: int, rng, d2_to_point) -> list:
    """Core D^2-weighted seeding; d2_to_point(c) gives squared distances of
    every point to point c in the active representation."""
    if K > n:
        raise ParameterError(f"K={K} exceeds number of points n={n}")
    if K < 1:
        raise ParameterError("K must be >= 1")
    chosen = [int(rng.integers(n))]
    if K == 1:
        return chosen
    d2 = d2_to_point(chosen[0])
    for _ in range(1, K):
        total = d2.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=d2 / total))
        else:
            nxt = int(rng.integers(n))
        chosen.append(nxt)
        np.minimum(d2, d2_to_point(nxt), out=d2)
    return chosen


class _DenseOps:
    """Assignment/update kernels for a dense (p, n) matrix."""

    def __init__(self, X):
        self.X = X
        self.colsq = (X * X).sum(axis=0)
        self.n = X.shape[1]

    def d2_to_point(self, c):
        d2 = self.colsq - 2.0 * (self.X.T @ self.X[:, c]) + self.colsq[c]
        return np.clip(d2, 0.0, None)

    def init_centers(self, chosen):
        return self.X[:, chosen].copy()

    def assign(self, mu):
        d2 = self.colsq[:, None] - 2.0 * (self.X.T @ mu) + (mu * mu).sum(axis=0)[None, :]
        labels = np.argmin(d2, axis=1)
        d2min = np.clip(d2[np.arange(self.n), labels], 0.0, None)
        return labels, d2min

    def update(self, labels, mu_prev, K):
        counts = np.bincount(labels, minlength=K).astype(np.float64)
        onehot = np.zeros((self.n, K))
        onehot[np.arange(self.n), labels] = 1.0
        sums = self.X @ onehot
        safe = np.where(counts > 0, counts, 1.0)
        mu = sums / safe[None, :]
        empty = counts == 0
        if empty.any():
            mu[:, empty] = mu_prev[:, empty]
        return mu, empty

    def reseed(self, mu, k, d2min):
        mu[:, k] = self.X[:, int(np.argmax(d2min))]


class _SparseOps:
    """Assignment/update kernels for a SparseSketch.

    Assignments use one stacked sparse product per iteration: row i of the
    (n, 2p) matrix holds the sampled values at their coordinates plus ones
    at shifted coordinates, so [values | pattern] @ [-2 mu ; mu^2] yields
    every column-to-center distance over that column's support.
    """

    def __init__(self, sketch: SparseSketch):
        self.sketch = sketch
        self.n, self.m = sketch.indices.shape
        self.p = sketch.p
        self.idx = sketch.indices.astype(np.int64)
        self.val = sketch.values
        self.colsq = (self.val * self.val).sum(axis=1)
        n, m, p = self.n, self.m, self.p
        data = np.empty((n, 2 * m))
        data[:, :m] = self.val
        data[:, m:] = 1.0
        cols = np.empty((n, 2 * m), dtype=np.int64)
        cols[:, :m] = self.idx
        cols[:, m:] = self.idx + p
        indptr = np.arange(0, (n + 1) * 2 * m, 2 * m, dtype=np.int64)
        self._ext = sp.csr_matrix((data.ravel(), cols.ravel(), indptr), shape=(n, 2 * p))
        self._W = None
        self._Wt = None
        self.idx_flat = self.idx.ravel()
        self.last_counts = None

    def _csc(self):
        if self._W is None:
            self._W = self.sketch.to_csc()
            self._Wt = self._W.T.tocsr()
        return self._W, self._Wt

    def d2_to_point(self, c):
        W, Wt = self._csc()
        cross = np.asarray((Wt @ W[:, c]).todense()).ravel()
        d2 = self.colsq + self.colsq[c] - 2.0 * cross
        return (self.p / self.m) * np.clip(d2, 0.0, None)

    def init_centers(self, chosen):
        mu = np.zeros((self.p, len(chosen)))
        for j, c in enumerate(chosen):
            mu[self.idx[c], j] = self.val[c]
        return mu

    def assign(self, mu):
        stacked = np.vstack([-2.0 * mu, mu * mu])
        d2 = self._ext @ stacked
        d2 += self.colsq[:, None]
        labels = np.argmin(d2, axis=1)
        d2min = np.clip(d2[np.arange(self.n), labels], 0.0, None)
        return labels, d2min

    def update(self, labels, mu_prev, K):
        p, m = self.p, self.m
        order = np.argsort(labels, kind="stable")
        bounds = np.searchsorted(labels[order], np.arange(K + 1))
        counts = np.empty((p, K), dtype=np.int64)
        mu = np.empty((p, K))
        empty = np.zeros(K, dtype=bool)
        for k in range(K):
            rows = order[bounds[k] : bounds[k + 1]]
            if rows.size == 0:
                empty[k] = True
                counts[:, k] = 0
                mu[:, k] = mu_prev[:, k]
                continue
            ii = self.idx[rows].ravel()
            ck = np.bincount(ii, minlength=p)
            sk = np.bincount(ii, weights=self.val[rows].ravel(), minlength=p)
            counts[:, k] = ck
            # coordinates never sampled in this cluster keep their previous value
            mu[:, k] = np.where(ck > 0, sk / np.where(ck > 0, ck, 1), mu_prev[:, k])
        self.last_counts = counts
        return mu, empty

    def reseed(self, mu, k, d2min):
        c = int(np.argmax(d2min))
        mu[:, k] = 0.0
        mu[self.idx[c], k] = self.val[c]


def _lloyd_iterate(ops, K, rng, max_iter):
    """One seeded run of alternating assignment/update on either kernel.

    Returns (labels, centers, objective trajectory, iteration count,
    seconds spent in the assignment+update phase).
    """
    chosen = _pp_select(ops.n, K, rng, ops.d2_to_point)
    mu = ops.init_centers(chosen)
    prev = None
    traj = []
    iters = 0
    t0 = time.perf_counter()
    labels = np.zeros(ops.n, dtype=np.int64)
    for _ in range(max_iter):
        labels, d2min = ops.assign(mu)
        traj.append(float(d2min.sum()))
        iters += 1
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels
        mu, empty = ops.update(labels, mu, K)
        if empty.any():
            for k in np.flatnonzero(empty):
                ops.reseed(mu, k, d2min)
    seconds = time.perf_counter() - t0
    return labels, mu, traj, iters, seconds


def _best_of_restarts(ops, K, n_init, seed, max_iter):
    best = None
    iter_seconds = 0.0
    iters_total = 0
    for r in range(n_init):
        rng = _restart_rng(seed, r)
        labels, mu, traj, iters, secs = _lloyd_iterate(ops, K, rng, max_iter)
        iter_seconds += secs
        iters_total += iters
        if best is None or traj[-1] < best[2][-1]:
            best = (labels, mu, traj, iters)
    labels, mu, traj, iters = best
    return labels, mu, traj, iters, iter_seconds, iters_total


def kmeans_pp_init(points, K: int, seed: int = 0) -> CenterSet:
    """D^2-weighted seeding over dense columns or sketch columns.

    Sketch seeding compares candidate columns over the union of their
    supports with a p/m rescale, an unbiased surrogate for the full squared
    distance.
    """
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    if isinstance(points, SparseSketch):
        ops = _SparseOps(points)
        domain = PRECONDITIONED
    else:
        ops = _DenseOps(np.asarray(points, dtype=np.float64))
        domain = ORIGINAL
    chosen = _pp_select(ops.n, K, rng, ops.d2_to_point)
    return CenterSet(K=K, centers=ops.init_centers(chosen), domain=domain)


def lloyd_full(
    X, K: int, max_iter: int = 100, n_init: int = 20, seed: int = 0
) -> KMeansResult:
    """Standard K-means on dense columns, best of n_init seeded restarts."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ParameterError("expected a non-empty (p, n) matrix")
    if K > X.shape[1]:
        raise ParameterError(f"K={K} exceeds number of points n={X.shape[1]}")
    ops = _DenseOps(X)
    labels, mu, traj, iters, iter_seconds, iters_total = _best_of_restarts(
        ops, K, n_init, seed, max_iter
    )
    return KMeansResult(
        assignments=Assignments(labels=labels),
        centers=CenterSet(K=K, centers=mu, domain=ORIGINAL),
        objective=traj[-1],
        diagnostics={
            "iterations": iters,
            "iterations_total": iters_total,
            "objective_curve": traj,
            "iter_seconds": iter_seconds,
            "restarts": n_init,
        },
    )


def sparsified_assign(sketch: SparseSketch, i: int, mu_prime: CenterSet) -> int:
    """Nearest center for one sketch column, comparing only its m sampled
    coordinates; ties resolve to the lowest cluster index."""
    idx, val = sketch.column(i)
    diff = val[:, None] - mu_prime.centers[idx.astype(np.int64), :]
    return int(np.argmin((diff * diff).sum(axis=0)))


def sparsified_update_centers(
    sketch: SparseSketch,
    assignments: Assignments,
    K: int = None,
    prev_centers: CenterSet = None,
):
    """Entry-wise sample means of the sketch per cluster.

    Coordinates with a zero sampling count inside a cluster keep the
    previous center value (zero when no previous center is supplied), and
    empty clusters keep their previous center entirely.
    """
    labels = np.asarray(assignments.labels, dtype=np.int64)
    if K is None:
        K = int(labels.max()) + 1
    ops = _SparseOps(sketch)
    mu_prev = (
        prev_centers.centers
        if prev_centers is not None
        else np.zeros((sketch.p, K))
    )
    mu, _ = ops.update(labels, mu_prev, K)
    return (
        CenterSet(K=K, centers=mu, domain=PRECONDITIONED),
        CountDiagonal(counts=ops.last_counts),
    )


def sparsified_kmeans(
    source,
    K: int,
    gamma: float,
    max_iter: int = 100,
    n_init: int = 20,
    seed: int = 0,
    kind: str = "hadamard",
    chunk_cols: int = 8192,
) -> KMeansResult:
    """One-pass sparsified K-means: precondition+sample, then iterate on the
    sketch, finally map centers back to the original domain.

    Returns original-domain centers truncated to the source dimension; the
    preconditioned centers, sampling counts, pass count and phase timings
    are available in ``diagnostics``.
    """
    source = as_source(source, chunk_cols=chunk_cols)
    if K > source.n:
        raise ParameterError(f"K={K} exceeds number of points n={source.n}")
    spec = PreconditionSpec.create(kind, source.p, sign_seed=derive_seed(seed, 0xD5))
    plan = plan_for(spec, gamma, master_seed=derive_seed(seed, 0x5A))
    t0 = time.perf_counter()
    sketch = sketch_stream(source, spec, plan)
    sketch_seconds = time.perf_counter() - t0
    result = _sparsified_on_sketch(sketch, K, max_iter=max_iter, n_init=n_init, seed=seed)
    result.diagnostics.update(
        sketch_seconds=sketch_seconds,
        passes=getattr(source, "passes", None),
    )
    return result


def _sparsified_on_sketch(sketch, K, max_iter=100, n_init=20, seed=0):
    ops = _SparseOps(sketch)
    labels, mu, traj, iters, iter_seconds, iters_total = _best_of_restarts(
        ops, K, n_init, seed, max_iter
    )
    # recompute the counts of the winning restart (ops caches only the last run)
    _, counts = sparsified_update_centers(
        sketch,
        Assignments(labels=labels),
        K=K,
        prev_centers=CenterSet(K=K, centers=mu, domain=PRECONDITIONED),
    )
    spec = sketch.spec
    back = unprecondition_columns(mu, spec)[: spec.p]
    return KMeansResult(
        assignments=Assignments(labels=labels),
        centers=CenterSet(K=K, centers=back, domain=ORIGINAL),
        objective=traj[-1],
        diagnostics={
            "iterations": iters,
            "iterations_total": iters_total,
            "objective_curve": traj,
            "iter_seconds": iter_seconds,
            "restarts": n_init,
            "m": sketch.m,
            "p_pad": sketch.p,
            "centers_preconditioned": CenterSet(K=K, centers=mu, domain=PRECONDITIONED),
            "count_diagonal": counts,
        },
    )


def sparsified_kmeans_two_pass(
    source,
    K: int,
    gamma: float,
    max_iter: int = 100,
    n_init: int = 20,
    seed: int = 0,
    kind: str = "hadamard",
    chunk_cols: int = 8192,
) -> KMeansResult:
    """Sparsified K-means plus one refinement pass over the raw data.

    The extra pass computes (a) exact original-domain means of the points
    assigned by the first pass and (b) a re-assignment of every point to its
    nearest first-pass center; nothing further is iterated.
    """
    source = as_source(source, chunk_cols=chunk_cols)
    first = sparsified_kmeans(
        source, K, gamma, max_iter=max_iter, n_init=n_init, seed=seed, kind=kind,
        chunk_cols=chunk_cols,
    )
    mu_hat = first.centers.centers  # (p_raw, K)
    labels1 = first.assignments.labels
    musq = (mu_hat * mu_hat).sum(axis=0)
    sums = np.zeros_like(mu_hat)
    labels2 = np.empty_like(labels1)
    obj = 0.0
    j0 = 0
    for chunk in source.chunks():
        c = chunk.shape[1]
        lab1 = labels1[j0 : j0 + c]
        onehot = np.zeros((c, K))
        onehot[np.arange(c), lab1] = 1.0
        sums += chunk @ onehot
        d2 = (chunk * chunk).sum(axis=0)[:, None] - 2.0 * (chunk.T @ mu_hat) + musq[None, :]
        labels2[j0 : j0 + c] = np.argmin(d2, axis=1)
        obj += float(np.clip(d2[np.arange(c), labels2[j0 : j0 + c]], 0.0, None).sum())
        j0 += c
    counts = np.bincount(labels1, minlength=K).astype(np.float64)
    safe = np.where(counts > 0, counts, 1.0)
    mu2 = sums / safe[None, :]
    mu2[:, counts == 0] = mu_hat[:, counts == 0]
    diagnostics = dict(first.diagnostics)
    diagnostics.update(passes=getattr(source, "passes", None), first_pass_objective=first.objective)
    return KMeansResult(
        assignments=Assignments(labels=labels2),
        centers=CenterSet(K=K, centers=mu2, domain=ORIGINAL),
        objective=obj,
        diagnostics=diagnostics,
    )


def feature_extraction_baseline(
    X,
    K: int,
    m: int,
    max_iter: int = 100,
    n_init: int = 20,
    seed: int = 0,
    recompute_centers: bool = True,
) -> KMeansResult:
    """Cluster the columns of Omega X for a random sign matrix Omega (m x p).

    Center estimates come from the pseudo-inverse of Omega; because one
    shared Omega compresses every column, those estimates do not converge to
    the true centers, so by default a second pass recomputes original-domain
    means and re-assigns against the pseudo-inverse centers.
    """
    source = as_source(X)
    if not 1 <= m:
        raise ParameterError("m must be >= 1")
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    omega = (rng.integers(0, 2, size=(m, source.p)) * 2.0 - 1.0) / np.sqrt(m)
    Z = np.empty((m, source.n))
    j0 = 0
    for chunk in source.chunks():
        Z[:, j0 : j0 + chunk.shape[1]] = omega @ chunk
        j0 += chunk.shape[1]
    inner = lloyd_full(Z, K, max_iter=max_iter, n_init=n_init, seed=seed)
    labels = inner.assignments.labels
    centers_pinv = np.linalg.pinv(omega) @ inner.centers.centers
    diagnostics = {
        "iterations": inner.diagnostics["iterations"],
        "iter_seconds": inner.diagnostics["iter_seconds"],
        "centers_pinv": CenterSet(K=K, centers=centers_pinv, domain=ORIGINAL),
        "passes": getattr(source, "passes", None),
    }
    result_centers = centers_pinv
    labels_out = labels
    if recompute_centers:
        sums = np.zeros((source.p, K))
        labels_out = np.empty_like(labels)
        musq = (centers_pinv * centers_pinv).sum(axis=0)
        j0 = 0
        for chunk in source.chunks():
            c = chunk.shape[1]
            lab = labels[j0 : j0 + c]
            onehot = np.zeros((c, K))
            onehot[np.arange(c), lab] = 1.0
            sums += chunk @ onehot
            d2 = (chunk * chunk).sum(axis=0)[:, None] - 2.0 * (chunk.T @ centers_pinv) + musq[None, :]
            labels_out[j0 : j0 + c] = np.argmin(d2, axis=1)
            j0 += c
        counts = np.bincount(labels, minlength=K).astype(np.float64)
        safe = np.where(counts > 0, counts, 1.0)
        result_centers = sums / safe[None, :]
        result_centers[:, counts == 0] = centers_pinv[:, counts == 0]
        diagnostics["passes"] = getattr(source, "passes", None)
    return KMeansResult(
        assignments=Assignments(labels=labels_out),
        centers=CenterSet(K=K, centers=result_centers, domain=ORIGINAL),
        objective=inner.objective,
        diagnostics=diagnostics,
    )


def feature_selection_exact_svd(
    X,
    K: int,
    m: int,
    max_iter: int = 100,
    n_init: int = 20,
    seed: int = 0,
    recompute_centers: bool = True,
) -> KMeansResult:
    """Leverage-score row sampling baseline, desk-scale stand-in.

    Scores come from an exact SVD of the full matrix rather than the
    approximate factorization used at scale, so this variant is not
    pass-faithful; it exists to compare clustering quality only.
    """
    X = np.asarray(X, dtype=np.float64)
    rng = np.random.default_rng(int(seed) & 0xFFFFFFFFFFFFFFFF)
    U, _, _ = np.linalg.svd(X, full_matrices=False)
    lev = (U[:, :K] ** 2).sum(axis=1)
    probs = lev / lev.sum()
    rows = rng.choice(X.shape[0], size=m, replace=True, p=probs)
    scale = 1.0 / np.sqrt(m * probs[rows])
    omega = np.zeros((m, X.shape[0]))
    omega[np.arange(m), rows] = scale
    Z = omega @ X
    inner = lloyd_full(Z, K, max_iter=max_iter, n_init=n_init, seed=seed)
    labels = inner.assignments.labels
    centers_pinv = np.linalg.pinv(omega) @ inner.centers.centers
    result_centers = centers_pinv
    if recompute_centers:
        counts = np.bincount(labels, minlength=K).astype(np.float64)
        onehot = np.zeros((X.shape[1], K))
        onehot[np.arange(X.shape[1]), labels] = 1.0
        safe = np.where(counts > 0, counts, 1.0)
        result_centers = (X @ onehot) / safe[None, :]
        result_centers[:, counts == 0] = centers_pinv[:, counts == 0]
    return KMeansResult(
        assignments=Assignments(labels=labels),
        centers=CenterSet(K=K, centers=result_centers, domain=ORIGINAL),
        objective=inner.objective,
        diagnostics={
            "iterations": inner.diagnostics["iterations"],
            "iter_seconds": inner.diagnostics["iter_seconds"],
            "centers_pinv": CenterSet(K=K, centers=centers_pinv, domain=ORIGINAL),
        },
    )


def clustering_accuracy(labels, ground_truth) -> float:
    """Fraction of points whose label matches the truth under the best
    one-to-one relabeling (exact assignment solve)."""
    labels = np.asarray(labels)
    truth = np.asarray(ground_truth)
    if labels.shape != truth.shape:
        raise ParameterError("label arrays must have equal length")
    _, lab = np.unique(labels, return_inverse=True)
    _, tru = np.unique(truth, return_inverse=True)
    kl, kt = lab.max() + 1, tru.max() + 1
    confusion = np.bincount(lab * kt + tru, minlength=kl * kt).reshape(kl, kt)
    rows, cols = linear_sum_assignment(-confusion)
    return float(confusion[rows, cols].sum() / labels.size)
