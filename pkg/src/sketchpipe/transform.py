"""Orthonormal preconditioning map x -> H D x and its exact inverse.

H is a fast deterministic orthonormal transform (Walsh-Hadamard or DCT-II)
and D is a random +-1 diagonal derived on the fly from a 64-bit seed.  The
composite map is orthonormal, so applying the adjoint undoes it exactly and
Euclidean norms are preserved.  Hadamard requires a power-of-two dimension;
inputs are zero-padded up to the next power of two and all downstream
processing happens in the padded dimension.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.fft import dct as _dct, idct as _idct

from ._hash import sign_array
from .errors import DimensionError, ParameterError

HADAMARD = "hadamard"
DCT = "dct"
NONE = "none"
KINDS = (HADAMARD, DCT, NONE)


def next_pow2(n: int) -> int:
    return 1 << (int(n) - 1).bit_length()


@dataclass(frozen=True)
class PreconditionSpec:
    """Transform kind, sign seed and (original, padded) dimensions.

    The spec is all the metadata needed to reproduce the preconditioner:
    the sign diagonal is regenerated from ``sign_seed`` on demand and never
    serialized.
    """

    kind: str
    sign_seed: int
    p: int
    p_pad: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown transform kind {self.kind!r}")
        if self.p < 1:
            raise DimensionError("dimension must be positive")
        if self.p_pad < self.p:
            raise DimensionError("padded dimension smaller than original")
        if self.kind == HADAMARD and self.p_pad & (self.p_pad - 1):
            raise DimensionError("hadamard padded dimension must be a power of two")
        if self.kind != HADAMARD and self.p_pad != self.p:
            raise DimensionError(f"{self.kind} transform does not pad")

    @classmethod
    def create(cls, kind: str, p: int, sign_seed: int = 0) -> "PreconditionSpec":
        """Build a spec for dimension p, padding to a power of two for Hadamard."""
        p_pad = next_pow2(p) if kind == HADAMARD else p
        return cls(kind=kind, sign_seed=int(sign_seed), p=int(p), p_pad=p_pad)

    @property
    def eta(self) -> float:
        """Sub-Gaussian tail constant of the transform (1 Hadamard, 1/2 DCT)."""
        if self.kind == HADAMARD:
            return 1.0
        if self.kind == DCT:
            return 0.5
        raise ParameterError("eta is undefined for the identity preconditioner")

    def signs(self) -> np.ndarray:
        """The +-1 diagonal of D, length p_pad (read-only, cached)."""
        if self.kind == NONE:
            return _cached_ones(self.p_pad)
        return _cached_signs(self.sign_seed, self.p_pad)


@lru_cache(maxsize=128)
def _cached_signs(sign_seed: int, p_pad: int) -> np.ndarray:
    s = sign_array(sign_seed, p_pad)
    s.setflags(write=False)
    return s


@lru_cache(maxsize=8)
def _cached_ones(p_pad: int) -> np.ndarray:
    s = np.ones(p_pad)
    s.setflags(write=False)
    return s


def _fwht_axis0(a: np.ndarray) -> np.ndarray:
    """In-place orthonormal Walsh-Hadamard transform along axis 0.

    Iterative butterflies, O(p log p) per column; the reshape exposes each
    butterfly level as one vectorized add/subtract over all columns.
    """
    p = a.shape[0]
    if p & (p - 1) or p < 1:
        raise DimensionError(f"length {p} is not a power of two")
    flat = a.reshape(p, -1)
    h = 1
    while h < p:
        b = flat.reshape(p // (2 * h), 2, h, -1)
        u = b[:, 0].copy()
        b[:, 0] += b[:, 1]
        b[:, 1] = u - b[:, 1]
        h *= 2
    a *= 1.0 / np.sqrt(p)
    return a


def fwht_inplace(v: np.ndarray) -> np.ndarray:
    """Orthonormal Walsh-Hadamard transform of a power-of-two-length vector.

    Overwrites and returns ``v``.  The normalized transform is its own
    inverse: fwht(fwht(v)) == v.
    """
    v = np.asarray(v)
    if v.ndim != 1:
        raise DimensionError("fwht_inplace expects a vector")
    return _fwht_axis0(v)


def dct_ortho(v: np.ndarray) -> np.ndarray:
    """Orthonormal DCT-II along axis 0 (any length >= 1)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] < 1:
        raise DimensionError("empty vector")
    return _dct(v, type=2, norm="ortho", axis=0)


def dct_ortho_inverse(v: np.ndarray) -> np.ndarray:
    """Inverse (= transpose) of dct_ortho, the orthonormal DCT-III."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] < 1:
        raise DimensionError("empty vector")
    return _idct(v, type=2, norm="ortho", axis=0)


def _apply_forward(buf: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    if spec.kind == HADAMARD:
        return _fwht_axis0(buf)
    if spec.kind == DCT:
        return _dct(buf, type=2, norm="ortho", axis=0, overwrite_x=True)
    return buf


def _apply_adjoint(buf: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    if spec.kind == HADAMARD:
        return _fwht_axis0(buf)
    if spec.kind == DCT:
        return _idct(buf, type=2, norm="ortho", axis=0, overwrite_x=True)
    return buf


def precondition(x: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    """Map a length-p vector to H D pad(x), length p_pad."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.p,):
        raise DimensionError(f"expected length {spec.p}, got shape {x.shape}")
    buf = np.zeros(spec.p_pad)
    buf[: spec.p] = x
    if spec.kind != NONE:
        buf *= spec.signs()
    return _apply_forward(buf, spec)


def unprecondition(y: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    """Apply the adjoint D^T H^T, the exact inverse of ``precondition``."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (spec.p_pad,):
        raise DimensionError(f"expected length {spec.p_pad}, got shape {y.shape}")
    buf = _apply_adjoint(y.copy(), spec)
    if spec.kind != NONE:
        buf *= spec.signs()
    return buf


def precondition_columns(X: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    """Precondition every column of a (p, c) block at once; returns (p_pad, c)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != spec.p:
        raise DimensionError(f"expected ({spec.p}, c) block, got {X.shape}")
    buf = np.zeros((spec.p_pad, X.shape[1]))
    buf[: spec.p] = X
    if spec.kind != NONE:
        buf *= spec.signs()[:, None]
    return _apply_forward(buf, spec)


def unprecondition_columns(Y: np.ndarray, spec: PreconditionSpec) -> np.ndarray:
    """Adjoint of ``precondition_columns`` on a (p_pad, c) block."""
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] != spec.p_pad:
        raise DimensionError(f"expected ({spec.p_pad}, c) block, got {Y.shape}")
    buf = _apply_adjoint(Y.copy(), spec)
    if spec.kind != NONE:
        buf *= spec.signs()[:, None]
    return buf
