"""Closed-form failure probabilities and constants for the sketched estimators.

These are pure formula evaluations used to overlay theoretical curves on
experiments: the max-norm error bound of the mean estimator (delta1), the
spectral-norm bound of the covariance estimator (delta2 with its constants
L and sigma^2), the concentration of the per-cluster sampling diagonal
(delta3), the norm-reduction factor of precondition-then-sample (rho), and
the minimum per-column sample counts for mean accuracy and pairwise-distance
preservation.  Raw values are returned unclamped; use ``clamp01`` when a
quantity is reported as a probability.
"""

from dataclasses import dataclass
from math import exp, log, sqrt
from typing import Optional

import numpy as np

from .errors import ParameterError
from .sketch import DataStats


@dataclass
class BoundInputs:
    """Dimensions, sample counts and data norms a bound is evaluated at.

    ``stats`` must describe the matrix the estimator actually sees (raw or
    preconditioned); ``rho`` is an upper bound on the per-column norm
    reduction of sampling (1 always valid, smaller after preconditioning).
    """

    p: int
    m: int
    n: int
    eta: Optional[float] = None
    stats: Optional[DataStats] = None
    rho: Optional[float] = None
    n_k: Optional[int] = None

    def __post_init__(self):
        if not 1 <= self.m <= self.p:
            raise ParameterError(f"need 1 <= m <= p, got m={self.m}, p={self.p}")
        if self.eta is not None and self.eta not in (1.0, 0.5):
            raise ParameterError("eta must be 1 (Hadamard) or 1/2 (DCT)")
        if self.rho is not None and not 0 < self.rho <= 1:
            raise ParameterError("rho must lie in (0, 1]")


def clamp01(x: float) -> float:
    return min(max(float(x), 0.0), 1.0)


def tau(m: int, p: int) -> float:
    """Boundedness constant of the mean-estimator Bernstein bound."""
    if not 1 <= m <= p:
        raise ParameterError(f"need 1 <= m <= p, got m={m}, p={p}")
    return max(p / m - 1.0, 1.0)


def mean_delta1(t: float, inputs: BoundInputs) -> float:
    """Failure probability that the mean estimate's max-norm error exceeds t."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    p, m, n, s = inputs.p, inputs.m, inputs.n, inputs.stats
    denom = (p / m - 1.0) * s.max_row_norm**2 / n + tau(m, p) * s.max_abs * t / 3.0
    if denom == 0.0:
        return 0.0 if t > 0 else 2.0 * p
    return 2.0 * p * exp(-(n * t * t / 2.0) / denom)


def mean_t_for_delta1(delta1: float, inputs: BoundInputs) -> float:
    """Error level t with mean-estimator failure probability exactly delta1."""
    p, m, n, s = inputs.p, inputs.m, inputs.n, inputs.stats
    if not 0 < delta1 <= 2.0 * p:
        raise ParameterError("delta1 must lie in (0, 2p]")
    ell = log(2.0 * p / delta1)
    a = tau(m, p) / 3.0 * s.max_abs * ell
    return (a + sqrt(a * a + 2.0 * (p / m - 1.0) * ell * s.max_row_norm**2)) / n


def cor4_min_m(p: int, n: int, t: float, eta: float) -> float:
    """Minimum samples per column for max-norm mean accuracy t on
    preconditioned data at the standard 0.99 / 0.001 confidence pair."""
    if t <= 0 or p < 1 or n < 1 or eta <= 0:
        raise ParameterError("need t > 0, p >= 1, n >= 1, eta > 0")
    return (
        (4.0 / eta)
        * log(200.0 * n * p)
        * log(2000.0 * p)
        * (t**-2 + sqrt(p) / (3.0 * t))
        / n
    )


def cov_constants(
    inputs: BoundInputs, c_emp_norm: float, diag_c_emp_norm: float
) -> tuple:
    """(L, sigma^2) constants of the covariance spectral-norm bound.

    ``c_emp_norm`` and ``diag_c_emp_norm`` are the spectral norms of the
    empirical covariance and of its diagonal part; they are not single-pass
    statistics and must be supplied by the caller.
    """
    p, m, n, s = inputs.p, inputs.m, inputs.n, inputs.stats
    if m < 2:
        raise ParameterError("covariance bound needs m >= 2")
    rho = 1.0 if inputs.rho is None else inputs.rho
    pair = p * (p - 1.0) / (m * (m - 1.0))
    L = ((pair * rho + 1.0) * s.max_col_norm**2 + p * (p - m) / (m * (m - 1.0)) * s.max_abs**2) / n
    sigma_sq = (
        (pair * rho - 1.0) * s.max_col_norm**2 * c_emp_norm
        + p * (p - 1.0) * (p - m) / (m * (m - 1.0) ** 2) * rho * s.max_col_norm**2 * diag_c_emp_norm
        + 2.0 * p * (p - 1.0) * (p - m) / (m * (m - 1.0) ** 2) * s.max_abs**2 * s.frob_norm**2 / n
        + p * (p - m) ** 2 / (m * (m - 1.0) ** 2) * s.max_fourth_moment_row / n
    ) / n
    return L, sigma_sq


def cov_delta2(t: float, L: float, sigma_sq: float, p: int) -> float:
    """Failure probability that the covariance estimate's spectral error exceeds t."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    denom = sigma_sq + L * t / 3.0
    if denom == 0.0:
        return 0.0 if t > 0 else float(p)
    return p * exp(-(t * t / 2.0) / denom)


def cov_t_for_delta2(delta2: float, L: float, sigma_sq: float, p: int) -> float:
    """Spectral error level t with covariance failure probability exactly delta2."""
    if not 0 < delta2 <= p:
        raise ParameterError("delta2 must lie in (0, p]")
    ell = log(p / delta2)
    a = ell * L / 3.0
    return a + sqrt(a * a + 2.0 * ell * sigma_sq)


def hk_delta3(t: float, n_k: int, p: int, m: int) -> float:
    """Failure probability that the cluster sampling diagonal deviates from
    the identity by more than t in spectral norm."""
    if t < 0:
        raise ParameterError("t must be >= 0")
    r = p / m
    denom = (r - 1.0) + (r + 1.0) * t / 3.0
    if denom == 0.0:
        return float(p)
    return p * exp(-(n_k * t * t / 2.0) / denom)


def hk_t_for_delta3(delta3: float, n_k: int, p: int, m: int) -> float:
    if not 0 < delta3 <= p:
        raise ParameterError("delta3 must lie in (0, p]")
    r = p / m
    ell = log(p / delta3)
    a = ell * (r + 1.0) / 3.0
    return (a + sqrt(a * a + 2.0 * n_k * ell * (r - 1.0))) / n_k


def ros_rho(alpha: float, p: int, n: int, m: int, eta: float) -> float:
    """Norm-reduction factor of sampling m of p preconditioned entries.

    Holds simultaneously for all n columns with probability >= 1 - alpha;
    use n=1 for the single-vector variant.  The returned value can exceed 1,
    in which case 1 is the useful bound.
    """
    if not 0 < alpha <= 1:
        raise ParameterError("alpha must lie in (0, 1]")
    if n < 1:
        raise ParameterError("n must be >= 1")
    if eta <= 0:
        raise ParameterError("eta must be positive")
    if not 1 <= m <= p:
        raise ParameterError(f"need 1 <= m <= p, got m={m}, p={p}")
    return (m / p) * (2.0 / eta) * log(2.0 * n * p / alpha)


def jl_min_m(beta: float, p: int) -> float:
    """Minimum per-column samples for pairwise-distance preservation with
    failure probability 3/beta."""
    if beta <= 1:
        raise ParameterError("beta must exceed 1")
    if p < 1:
        raise ParameterError("p must be >= 1")
    return 4.0 * (sqrt(beta) + sqrt(8.0 * log(beta * p))) ** 2 * log(beta)
