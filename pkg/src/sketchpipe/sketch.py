"""Single-pass precondition+sample operator producing an exactly-m-per-column sketch.

Each column keeps exactly m of p_pad preconditioned entries, chosen uniformly
without replacement by a per-column counter-based stream, so the sketch of a
column never depends on chunking, processing order, or which other columns
exist.  Stored values are the raw preconditioned entries; estimator scalings
(p/m etc.) are applied downstream.
"""

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np
import scipy.sparse as sp

from . import _hash
from .errors import DimensionError, ParameterError
from .transform import PreconditionSpec, precondition, precondition_columns

DEFAULT_CHUNK_COLS = 8192


@dataclass(frozen=True)
class SamplingPlan:
    """Master seed plus (p, m); derives every column's m sampled indices.

    Column i keeps the coordinates with the m smallest hash keys in its
    private key stream, which is a uniform draw over all C(p, m) subsets and
    is reproducible from (master_seed, i) alone.
    """

    master_seed: int
    p: int
    m: int

    def __post_init__(self):
        if not 1 <= self.m <= self.p:
            raise ParameterError(f"need 1 <= m <= p, got m={self.m}, p={self.p}")

    @property
    def gamma(self) -> float:
        return self.m / self.p

    def indices(self, i: int) -> np.ndarray:
        """Sorted sampled coordinates of column i, shape (m,) uint32."""
        return self.indices_block(i, i + 1)[0]

    def indices_block(self, i0: int, i1: int) -> np.ndarray:
        """Sampled coordinates for columns i0..i1-1, shape (i1-i0, m)."""
        c = i1 - i0
        if self.m == self.p:
            return np.tile(np.arange(self.p, dtype=np.uint32), (c, 1))
        keys = _hash.column_keys(self.master_seed, i0, i1, self.p)
        idx = np.argpartition(keys, self.m, axis=1)[:, : self.m]
        idx.sort(axis=1)
        return idx.astype(np.uint32)


def sample_indices(plan: SamplingPlan, i: int) -> np.ndarray:
    """Sampled index set of column i (sorted, exactly plan.m distinct values)."""
    return plan.indices(i)


@dataclass
class SparseSketch:
    """Per-column (index, value) pairs with exactly m entries per column.

    ``indices`` is (n, m) uint32 with strictly increasing rows, ``values``
    (n, m) float64; row i is column i of the sketch.  ``plan`` is None for
    hand-built sketches whose index sets did not come from a SamplingPlan.
    """

    spec: PreconditionSpec
    n: int
    indices: np.ndarray
    values: np.ndarray
    plan: Optional[SamplingPlan] = None

    @property
    def m(self) -> int:
        return self.indices.shape[1]

    @property
    def p(self) -> int:
        """Dimension of the sketched (preconditioned, padded) columns."""
        return self.spec.p_pad

    def column(self, i: int):
        return self.indices[i], self.values[i]

    def to_csc(self) -> sp.csc_matrix:
        """The sketch as a (p, n) CSC matrix (explicit zeros preserved)."""
        n, m = self.indices.shape
        indptr = np.arange(0, (n + 1) * m, m, dtype=np.int64)
        return sp.csc_matrix(
            (self.values.ravel(), self.indices.ravel().astype(np.int64), indptr),
            shape=(self.p, n),
        )

    def pattern_csc(self) -> sp.csc_matrix:
        """Same sparsity pattern with all stored values replaced by 1."""
        n, m = self.indices.shape
        indptr = np.arange(0, (n + 1) * m, m, dtype=np.int64)
        return sp.csc_matrix(
            (np.ones(n * m), self.indices.ravel().astype(np.int64), indptr),
            shape=(self.p, n),
        )

    def densify(self) -> np.ndarray:
        """Dense (p, n) array with unsampled coordinates set to zero."""
        out = np.zeros((self.p, self.n))
        out[self.indices.T, np.arange(self.n)[None, :]] = self.values.T
        return out


@dataclass
class DataStats:
    """Norms of a data matrix that parameterize the error bounds."""

    max_abs: float
    max_row_norm: float
    max_col_norm: float
    frob_norm: float
    max_fourth_moment_row: float
    n: int
    p: int

    @classmethod
    def from_matrix(cls, X: np.ndarray) -> "DataStats":
        X = np.asarray(X, dtype=np.float64)
        sq = X * X
        return cls(
            max_abs=float(np.abs(X).max()),
            max_row_norm=float(np.sqrt(sq.sum(axis=1).max())),
            max_col_norm=float(np.sqrt(sq.sum(axis=0).max())),
            frob_norm=float(np.sqrt(sq.sum())),
            max_fourth_moment_row=float((sq * sq).sum(axis=1).max()),
            n=X.shape[1],
            p=X.shape[0],
        )


class ArraySource:
    """In-memory column source with chunked iteration and a pass counter."""

    def __init__(self, X: np.ndarray, chunk_cols: int = DEFAULT_CHUNK_COLS):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise DimensionError("expected a (p, n) matrix")
        if chunk_cols < 1:
            raise ParameterError("chunk_cols must be >= 1")
        self.X = X
        self.chunk_cols = int(chunk_cols)
        self.passes = 0

    @property
    def p(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[1]

    def chunks(self) -> Iterator[np.ndarray]:
        self.passes += 1
        for j0 in range(0, self.n, self.chunk_cols):
            yield self.X[:, j0 : j0 + self.chunk_cols]


def as_source(data, chunk_cols: int = DEFAULT_CHUNK_COLS):
    """Wrap a raw matrix in an ArraySource; pass sources through unchanged."""
    if hasattr(data, "chunks") and hasattr(data, "p") and hasattr(data, "n"):
        return data
    return ArraySource(np.asarray(data, dtype=np.float64), chunk_cols=chunk_cols)


def plan_for(spec: PreconditionSpec, gamma: float, master_seed: int) -> SamplingPlan:
    """Sampling plan keeping round(gamma * p_pad) entries per column."""
    if not 0 < gamma <= 1:
        raise ParameterError(f"gamma must be in (0, 1], got {gamma}")
    m = int(round(gamma * spec.p_pad))
    if m < 1:
        raise ParameterError(f"gamma={gamma} keeps no entries at p_pad={spec.p_pad}")
    return SamplingPlan(master_seed=int(master_seed), p=spec.p_pad, m=m)


def sketch_column(x: np.ndarray, spec: PreconditionSpec, plan: SamplingPlan, i: int):
    """Sketch one column: (indices, values) of precondition(x) at indices(i)."""
    if plan.p != spec.p_pad:
        raise DimensionError("plan dimension does not match spec.p_pad")
    y = precondition(x, spec)  # single transform buffer
    idx = plan.indices(i)
    return idx, y[idx]


def sketch_stream(source, spec: PreconditionSpec, plan: SamplingPlan) -> SparseSketch:
    """Precondition and sample every column of ``source`` in one pass.

    Columns inside a chunk are transformed and gathered as one vectorized
    batch; the output is identical for any chunk size.
    """
    source = as_source(source)
    if source.p != spec.p:
        raise DimensionError(f"source has p={source.p}, spec expects {spec.p}")
    if plan.p != spec.p_pad:
        raise DimensionError("plan dimension does not match spec.p_pad")
    n = source.n
    indices = np.empty((n, plan.m), dtype=np.uint32)
    values = np.empty((n, plan.m))
    j0 = 0
    for chunk in source.chunks():
        c = chunk.shape[1]
        try:
            Y = precondition_columns(chunk, spec)
        except DimensionError as exc:
            raise DimensionError(f"bad chunk at column offset {j0}: {exc}") from exc
        idx = plan.indices_block(j0, j0 + c)
        indices[j0 : j0 + c] = idx
        values[j0 : j0 + c] = np.take_along_axis(Y.T, idx.astype(np.int64), axis=1)
        j0 += c
    if j0 != n:
        raise DimensionError(f"source yielded {j0} columns, expected {n}")
    return SparseSketch(spec=spec, n=n, indices=indices, values=values, plan=plan)


def compute_stats(source) -> DataStats:
    """Exact norms of the source matrix in one additional pass."""
    source = as_source(source)
    if source.n == 0:
        raise ParameterError("empty source")
    p = source.p
    row_sq = np.zeros(p)
    row_quad = np.zeros(p)
    max_abs = 0.0
    max_col_sq = 0.0
    frob_sq = 0.0
    n_seen = 0
    for chunk in source.chunks():
        sq = chunk * chunk
        row_sq += sq.sum(axis=1)
        row_quad += (sq * sq).sum(axis=1)
        max_abs = max(max_abs, float(np.abs(chunk).max()))
        max_col_sq = max(max_col_sq, float(sq.sum(axis=0).max()))
        frob_sq += float(sq.sum())
        n_seen += chunk.shape[1]
    return DataStats(
        max_abs=max_abs,
        max_row_norm=float(np.sqrt(row_sq.max())),
        max_col_norm=float(np.sqrt(max_col_sq)),
        frob_norm=float(np.sqrt(frob_sq)),
        max_fourth_moment_row=float(row_quad.max()),
        n=n_seen,
        p=p,
    )
