"""Binary file formats: dense matrices (DNSE1) and sketches (SKCH1).

DNSE1: magic b"DNSE1", little-endian u64 {p, n}, then column-major f64 data.
SKCH1: magic b"SKCH1", little-endian u64 {p_raw, p_pad, n, m, kind_code,
sign_seed, master_seed}, then per column m sorted u32 indices followed by
m f64 values.  Both formats are bit-exact and independent of platform.
"""

import struct
from typing import Iterator

import numpy as np

from .errors import DimensionError, ParameterError
from .sketch import SamplingPlan, SparseSketch
from .transform import DCT, HADAMARD, NONE, PreconditionSpec

DENSE_MAGIC = b"DNSE1"
SKETCH_MAGIC = b"SKCH1"

_KIND_CODES = {NONE: 0, HADAMARD: 1, DCT: 2}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}


def write_dense(path, X: np.ndarray) -> None:
    """Write a (p, n) matrix as a DNSE1 file (column-major f64)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise DimensionError("expected a (p, n) matrix")
    with open(path, "wb") as fh:
        fh.write(DENSE_MAGIC)
        fh.write(struct.pack("<QQ", X.shape[0], X.shape[1]))
        fh.write(np.asfortranarray(X).tobytes(order="F"))


def read_dense(path) -> np.ndarray:
    """Load a whole DNSE1 file into memory."""
    with open(path, "rb") as fh:
        p, n = _read_dense_header(fh)
        data = np.fromfile(fh, dtype="<f8", count=p * n)
    if data.size != p * n:
        raise DimensionError(f"truncated dense file: {path}")
    return data.reshape((p, n), order="F")


def _read_dense_header(fh):
    magic = fh.read(5)
    if magic != DENSE_MAGIC:
        raise DimensionError(f"not a DNSE1 file (magic {magic!r})")
    p, n = struct.unpack("<QQ", fh.read(16))
    return int(p), int(n)


class DenseFileSource:
    """Out-of-core column source over a DNSE1 file.

    Reads ``chunk_cols`` columns at a time; the file is re-opened per pass so
    the full matrix is never resident.
    """

    def __init__(self, path, chunk_cols: int = 8192):
        if chunk_cols < 1:
            raise ParameterError("chunk_cols must be >= 1")
        self.path = path
        self.chunk_cols = int(chunk_cols)
        with open(path, "rb") as fh:
            self.p, self.n = _read_dense_header(fh)
        self.passes = 0

    def chunks(self) -> Iterator[np.ndarray]:
        self.passes += 1
        with open(self.path, "rb") as fh:
            _read_dense_header(fh)
            for j0 in range(0, self.n, self.chunk_cols):
                c = min(self.chunk_cols, self.n - j0)
                data = np.fromfile(fh, dtype="<f8", count=self.p * c)
                if data.size != self.p * c:
                    raise DimensionError(
                        f"read failure at column offset {j0} of {self.path}"
                    )
                yield data.reshape((self.p, c), order="F")


def _record_dtype(m: int) -> np.dtype:
    return np.dtype([("idx", "<u4", (m,)), ("val", "<f8", (m,))])


def write_sketch(path, sketch: SparseSketch) -> None:
    """Write a SparseSketch as a SKCH1 file (bit-exact round trip)."""
    spec, plan = sketch.spec, sketch.plan
    master_seed = plan.master_seed if plan is not None else 0
    n, m = sketch.indices.shape
    with open(path, "wb") as fh:
        fh.write(SKETCH_MAGIC)
        fh.write(
            struct.pack(
                "<7Q",
                spec.p,
                spec.p_pad,
                n,
                m,
                _KIND_CODES[spec.kind],
                spec.sign_seed & 0xFFFFFFFFFFFFFFFF,
                master_seed & 0xFFFFFFFFFFFFFFFF,
            )
        )
        rec = np.empty(n, dtype=_record_dtype(m))
        rec["idx"] = sketch.indices
        rec["val"] = sketch.values
        fh.write(rec.tobytes())


def read_sketch(path) -> SparseSketch:
    with open(path, "rb") as fh:
        magic = fh.read(5)
        if magic != SKETCH_MAGIC:
            raise DimensionError(f"not a SKCH1 file (magic {magic!r})")
        p_raw, p_pad, n, m, kind_code, sign_seed, master_seed = struct.unpack(
            "<7Q", fh.read(56)
        )
        if kind_code not in _KIND_NAMES:
            raise DimensionError(f"unknown transform code {kind_code}")
        rec = np.fromfile(fh, dtype=_record_dtype(int(m)), count=int(n))
    if rec.size != n:
        raise DimensionError(f"truncated sketch file: {path}")
    spec = PreconditionSpec(
        kind=_KIND_NAMES[kind_code], sign_seed=int(sign_seed), p=int(p_raw), p_pad=int(p_pad)
    )
    plan = SamplingPlan(master_seed=int(master_seed), p=int(p_pad), m=int(m))
    return SparseSketch(
        spec=spec,
        n=int(n),
        indices=np.ascontiguousarray(rec["idx"]),
        values=np.ascontiguousarray(rec["val"]),
        plan=plan,
    )
