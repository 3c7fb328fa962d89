"""
Estimators of the asymptotic covariance matrix Σ of a Markov chain CLT.

All estimators take a ChainMatrix (n rows of p-dimensional output) and
return a CovEstimate. Batch-means estimators keep the most recent rows when
n is not a multiple of the batch size.
"""
import math
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from time import perf_counter
from typing import Optional, Iterator, Dict

import numpy as np

from .configuration import config
from .errors import ChainError, InsufficientBatchesError, NonFiniteEstimateError, ScheduleConfigError
from .windows import (LagWindowSpec, WindowKind, FLAT_TOP, BARTLETT, effective_b,
                      delta2_vector, window_weight, window_name)


class ChainMatrix:
    """n x p matrix of chain output, row t holding Y_t = g(X_t)."""

    def __init__(self, data):
        array = np.array(data, dtype=np.float64, order='C')
        if array.ndim == 1:
            array = array.reshape(-1, 1)
        if array.ndim != 2:
            raise ChainError(f"Chain must be a 2-D matrix, got {array.ndim} dimensions")
        if array.shape[0] < 2 or array.shape[1] < 1:
            raise ChainError(f"Chain needs n >= 2 rows and p >= 1 columns, got {array.shape}")
        if not np.all(np.isfinite(array)):
            row, col = np.argwhere(~np.isfinite(array))[0]
            raise ChainError(f"Chain has a non-finite value at row {row}, column {col}")
        self._data = array
        self._data.setflags(write=False)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def n(self) -> int:
        return self._data.shape[0]

    @property
    def p(self) -> int:
        return self._data.shape[1]

    def mean(self) -> np.ndarray:
        return self._data.mean(axis=0)

    def __repr__(self) -> str:
        return f"ChainMatrix(n={self.n}, p={self.p})"


class EstimatorMethod(str, Enum):
    BM = "bm"
    OBM = "obm"
    SV = "sv"
    WBM = "wbm"
    OWBM = "owbm"


@dataclass
class CovEstimate:
    """A symmetric p x p estimate of Σ with its provenance."""
    matrix: np.ndarray
    method: EstimatorMethod
    window: Optional[LagWindowSpec]
    b_used: int
    n_used: int
    min_eigenvalue: float
    wall_time: float

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict:
        return {
            'method': self.method.value,
            'window': window_name(self.window) if self.window is not None else None,
            'b_used': int(self.b_used),
            'n_used': int(self.n_used),
            'matrix': self.matrix.tolist(),
            'min_eigenvalue': float(self.min_eigenvalue),
            'wall_time_ms': self.wall_time * 1000.0,
        }


class SchedulePolicy(str, Enum):
    POWER = "pow"
    DOUBLING = "doubling"
    FIXED = "fixed"


@dataclass(frozen=True)
class BatchSchedule:
    """Policy mapping a chain length n to a batch size / truncation point b."""
    policy: SchedulePolicy
    nu: Optional[float] = None
    b: Optional[int] = None

    def __post_init__(self):
        if self.policy in (SchedulePolicy.POWER, SchedulePolicy.DOUBLING):
            if self.nu is None or not 0.0 < self.nu < 1.0:
                raise ScheduleConfigError(f"Schedule '{self.policy.value}' needs 0 < nu < 1, got {self.nu}")
        elif self.policy == SchedulePolicy.FIXED:
            if self.b is None or self.b < 1:
                raise ScheduleConfigError(f"Fixed schedule needs a positive b, got {self.b}")

    def describe(self) -> str:
        if self.policy == SchedulePolicy.FIXED:
            return f"fixed:{self.b}"
        return f"{self.policy.value}:{self.nu:g}"

    @classmethod
    def power(cls, nu: Optional[float] = None) -> 'BatchSchedule':
        return cls(SchedulePolicy.POWER, nu=config.get('default_nu') if nu is None else nu)

    @classmethod
    def doubling(cls, nu: Optional[float] = None) -> 'BatchSchedule':
        return cls(SchedulePolicy.DOUBLING, nu=config.get('default_nu') if nu is None else nu)

    @classmethod
    def fixed(cls, b: int) -> 'BatchSchedule':
        return cls(SchedulePolicy.FIXED, b=b)


def parse_schedule(text: str) -> BatchSchedule:
    """Parse "pow:<nu>", "doubling:<nu>" or "fixed:<b>"."""
    policy, _, value = str(text).strip().lower().partition(':')
    try:
        policy = SchedulePolicy(policy)
    except ValueError:
        raise ScheduleConfigError(f"Unknown schedule '{text}'. Use pow:<nu>, doubling:<nu> or fixed:<b>")
    try:
        if policy == SchedulePolicy.FIXED:
            return BatchSchedule(policy, b=int(value))
        return BatchSchedule(policy, nu=float(value))
    except ValueError:
        raise ScheduleConfigError(f"Malformed schedule value in '{text}'")


# Relative slack so that e.g. 1000 ** (1/3) counts as 10
_POWER_SLACK = 1e-12


def power_batch_size(n: int, nu: float) -> int:
    return int(math.floor(n ** nu * (1.0 + _POWER_SLACK)))


def doubling_batch_size(n: int, nu: float) -> int:
    """Smallest power of two >= n ** nu."""
    target = n ** nu * (1.0 - _POWER_SLACK)
    b = 1
    while b < target:
        b *= 2
    return b


def batch_size(n: int, schedule: BatchSchedule) -> int:
    """
    Batch size / truncation point for a chain of length n, clamped to [2, n/2].

    Args:
        n: Chain length (>= 4)
        schedule: Batch schedule
    Returns:
        b
    """
    n = int(n)
    if schedule.policy == SchedulePolicy.POWER:
        b = power_batch_size(n, schedule.nu)
    elif schedule.policy == SchedulePolicy.DOUBLING:
        b = doubling_batch_size(n, schedule.nu)
    else:
        b = schedule.b
    return int(min(max(b, 2), max(n // 2, 2)))


@contextmanager
def kernel_timer() -> Iterator[Dict[str, float]]:
    """Time the numeric kernel with a monotonic clock."""
    timing = {'seconds': 0.0}
    start_time = perf_counter()
    try:
        yield timing
    finally:
        timing['seconds'] = perf_counter() - start_time


def _symmetrize(matrix: np.ndarray) -> np.ndarray:
    # (a + b) / 2 is commutative in floating point, so the result is exactly symmetric
    return (matrix + matrix.T) / 2.0


def _min_eigenvalue(matrix: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(matrix)[0])


def build_estimate(matrix: np.ndarray, method: EstimatorMethod, window: Optional[LagWindowSpec],
                   b_used: int, n_used: int, seconds: float) -> CovEstimate:
    """
    Wrap a raw estimator matrix as a symmetric CovEstimate.

    Raises:
        NonFiniteEstimateError: If the matrix overflowed to inf or NaN
    """
    if not np.all(np.isfinite(matrix)):
        raise NonFiniteEstimateError(f"{method.value} estimate is not finite (b={b_used}); "
                                     f"the chain values are too large for double precision")
    matrix = _symmetrize(matrix)
    estimate = CovEstimate(matrix=matrix, method=method, window=window, b_used=int(b_used),
                           n_used=int(n_used), min_eigenvalue=_min_eigenvalue(matrix), wall_time=seconds)
    config.logger.debug(f"{method.value} estimate (window={estimate.to_dict()['window']}, b={b_used}, "
                        f"n_used={n_used}) in {seconds * 1000.0:.3f} ms")
    return estimate


def _as_chain(chain) -> ChainMatrix:
    return chain if isinstance(chain, ChainMatrix) else ChainMatrix(chain)


def _check_b(chain: ChainMatrix, b: int, minimum: int = 2) -> None:
    if b < minimum:
        raise InsufficientBatchesError(f"Batch size b={b} is below the minimum of {minimum}")
    if chain.n // b < 2:
        raise InsufficientBatchesError(f"Batch size b={b} leaves fewer than 2 batches for n={chain.n}")


def _tail_batch_sums(data: np.ndarray, k: int):
    """Sums of the a = floor(n/k) batches of size k over the last a*k rows."""
    n, p = data.shape
    a = n // k
    tail = np.ascontiguousarray(data[n - a * k:])
    # one batch per row; the stacked identity adds its k samples column-wise
    return tail.reshape(a, k * p) @ np.tile(np.eye(p), (k, 1)), a


def _batch_means_sum(data: np.ndarray, k: int) -> np.ndarray:
    """Un-normalized Σ_l (Ȳ_l(k) - Ȳ)(Ȳ_l(k) - Ȳ)ᵀ / (a - 1) with Ȳ over the retained rows."""
    sums, a = _tail_batch_sums(data, k)
    if a < 2:
        raise InsufficientBatchesError(f"Batch size {k} leaves {a} batch(es); at least 2 are needed")
    means = sums / k
    deviations = means - means.mean(axis=0)
    return deviations.T @ deviations / (a - 1)


def bm_from_batch_means(means: np.ndarray, b: int) -> np.ndarray:
    """BM matrix from a stack of equal-size batch means, centered on their mean."""
    a = means.shape[0]
    if a < 2:
        raise InsufficientBatchesError(f"Need at least 2 closed batches, have {a}")
    deviations = means - means.mean(axis=0)
    return (b / (a - 1)) * (deviations.T @ deviations)


def autocovariance(chain, k: int) -> np.ndarray:
    """
    Lag-k sample autocovariance Γ̂(k) = (1/n) Σ_t (Y_t - Ȳ)(Y_{t+k} - Ȳ)ᵀ.

    Raises:
        ChainError: If k is outside [0, n-1]
    """
    chain = _as_chain(chain)
    k = int(k)
    if not 0 <= k < chain.n:
        raise ChainError(f"Lag k={k} is outside [0, {chain.n - 1}]")
    centered = chain.data - chain.mean()
    return centered[:chain.n - k].T @ centered[k:] / chain.n


def bm(chain, b: int) -> CovEstimate:
    """Non-overlapping batch means over the last a*b rows, a = floor(n/b)."""
    chain = _as_chain(chain)
    b = int(b)
    _check_b(chain, b)
    with kernel_timer() as timing:
        matrix = b * _batch_means_sum(chain.data, b)
    return build_estimate(matrix, EstimatorMethod.BM, None, b, (chain.n // b) * b, timing['seconds'])


def obm(chain, b: int) -> CovEstimate:
    """Overlapping batch means over all n - b + 1 windows of length b."""
    chain = _as_chain(chain)
    b = int(b)
    _check_b(chain, b)
    n = chain.n
    with kernel_timer() as timing:
        centered = chain.data - chain.mean()
        cumulative = np.vstack([np.zeros((1, chain.p)), np.cumsum(centered, axis=0)])
        window_means = (cumulative[b:] - cumulative[:-b]) / b
        matrix = (n * b / ((n - b) * (n - b + 1))) * (window_means.T @ window_means)
    return build_estimate(matrix, EstimatorMethod.OBM, None, b, n, timing['seconds'])


def _lagged_products(centered: np.ndarray, k: int) -> np.ndarray:
    """Γ̂(k) + Γ̂(k)ᵀ scaled by n."""
    product = centered[:centered.shape[0] - k].T @ centered[k:]
    return product + product.T


def sv(chain, window: LagWindowSpec, b: int) -> CovEstimate:
    """Spectral variance estimator Γ̂(0) + Σ_{k=1}^{b} w(k)[Γ̂(k) + Γ̂(k)ᵀ]."""
    chain = _as_chain(chain)
    b_used = effective_b(window, b)
    _check_b(chain, b_used)
    with kernel_timer() as timing:
        centered = chain.data - chain.mean()
        matrix = centered.T @ centered
        for k in range(1, b_used + 1):
            weight = window_weight(window, k, b_used)
            if weight != 0.0:
                matrix = matrix + weight * _lagged_products(centered, k)
        matrix = matrix / chain.n
    return build_estimate(matrix, EstimatorMethod.SV, window, b_used, chain.n, timing['seconds'])


def sv_flat_top_fast(chain, b: int) -> CovEstimate:
    """
    Flat-top spectral variance as 2·SV_Bartlett(b) - SV_Bartlett(b/2).

    Both Bartlett estimators share one pass over the lagged products.
    """
    chain = _as_chain(chain)
    b_used = effective_b(FLAT_TOP, b)
    _check_b(chain, b_used, minimum=4)
    half = b_used // 2
    with kernel_timer() as timing:
        centered = chain.data - chain.mean()
        gamma0 = centered.T @ centered
        full, halved = gamma0.copy(), gamma0.copy()
        for k in range(1, b_used):
            lagged = _lagged_products(centered, k)
            full = full + window_weight(BARTLETT, k, b_used) * lagged
            if k < half:
                halved = halved + window_weight(BARTLETT, k, half) * lagged
        matrix = (2.0 * full - halved) / chain.n
    return build_estimate(matrix, EstimatorMethod.SV, FLAT_TOP, b_used, chain.n, timing['seconds'])


def wbm(chain, window: LagWindowSpec, b: int) -> CovEstimate:
    """
    Weighted batch means Σ_k k²Δ₂w(k)/(a_k - 1) Σ_l (Ȳ_l(k) - Ȳ)(Ȳ_l(k) - Ȳ)ᵀ.

    Lags whose Δ₂w(k) vanishes are skipped without forming batch means. Each
    lag keeps the last a_k*k rows and centers on their mean.
    """
    chain = _as_chain(chain)
    b_used = effective_b(window, b)
    _check_b(chain, b_used)
    skip_tolerance = config.get('delta2_skip_tolerance')
    n_used = 0
    with kernel_timer() as timing:
        d2 = delta2_vector(window, b_used)
        matrix = np.zeros((chain.p, chain.p))
        for k in range(1, b_used + 1):
            weight = d2[k - 1]
            if abs(weight) < skip_tolerance:
                continue
            matrix = matrix + (k * k * weight) * _batch_means_sum(chain.data, k)
            n_used = max(n_used, (chain.n // k) * k)
    return build_estimate(matrix, EstimatorMethod.WBM, window, b_used, n_used or chain.n, timing['seconds'])


def wbm_flat_top_fast(chain, b: int) -> CovEstimate:
    """
    Flat-top weighted batch means as 2·BM(b) - BM(b/2); may be indefinite.

    The b/2 batch sums are formed once. The last 2a of them cover exactly the
    rows BM(b) keeps, so adjacent pairs give the b-level batch sums.
    """
    chain = _as_chain(chain)
    b_used = effective_b(FLAT_TOP, b)
    _check_b(chain, b_used, minimum=4)
    half = b_used // 2
    p = chain.p
    with kernel_timer() as timing:
        half_sums, half_count = _tail_batch_sums(chain.data, half)
        a = chain.n // b_used
        paired = half_sums[half_count - 2 * a:].reshape(a, 2 * p)
        full_sums = paired[:, :p] + paired[:, p:]
        matrix = 2.0 * bm_from_batch_means(full_sums / b_used, b_used) - bm_from_batch_means(half_sums / half, half)
    return build_estimate(matrix, EstimatorMethod.WBM, FLAT_TOP, b_used, (chain.n // half) * half, timing['seconds'])


def overlapping_wbm(chain, window: LagWindowSpec, b: int) -> CovEstimate:
    """
    Overlapping weighted batch means (1/n) Σ_k Σ_l k²Δ₂w(k)(Ẏ_l(k) - Ȳ)(Ẏ_l(k) - Ȳ)ᵀ.

    Uses every window of length k; asymptotically equivalent to the spectral
    variance estimator with the same lag window.
    """
    chain = _as_chain(chain)
    b_used = effective_b(window, b)
    _check_b(chain, b_used)
    skip_tolerance = config.get('delta2_skip_tolerance')
    with kernel_timer() as timing:
        d2 = delta2_vector(window, b_used)
        centered = chain.data - chain.mean()
        cumulative = np.vstack([np.zeros((1, chain.p)), np.cumsum(centered, axis=0)])
        matrix = np.zeros((chain.p, chain.p))
        for k in range(1, b_used + 1):
            weight = d2[k - 1]
            if abs(weight) < skip_tolerance:
                continue
            window_means = (cumulative[k:] - cumulative[:-k]) / k
            matrix = matrix + (k * k * weight) * (window_means.T @ window_means)
        matrix = matrix / chain.n
    return build_estimate(matrix, EstimatorMethod.OWBM, window, b_used, chain.n, timing['seconds'])


def mse(estimate, truth) -> float:
    """Mean of squared entrywise differences between two p x p matrices."""
    estimate = np.asarray(getattr(estimate, 'matrix', estimate), dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if estimate.shape != truth.shape:
        raise ValueError(f"Dimension mismatch: estimate {estimate.shape} vs truth {truth.shape}")
    return float(np.mean((estimate - truth) ** 2))


@dataclass(frozen=True)
class EstimatorSpec:
    """Which estimator to run and how to pick its batch size."""
    method: EstimatorMethod
    window: Optional[LagWindowSpec] = None
    schedule: Optional[BatchSchedule] = None

    def __post_init__(self):
        if self.method in (EstimatorMethod.SV, EstimatorMethod.WBM, EstimatorMethod.OWBM) and self.window is None:
            object.__setattr__(self, 'window', BARTLETT)
        if self.schedule is None:
            object.__setattr__(self, 'schedule', BatchSchedule.power())

    @property
    def is_flat_top(self) -> bool:
        return self.window is not None and self.window.kind == WindowKind.BARTLETT_FLAT_TOP

    def describe(self) -> str:
        window = f"/{window_name(self.window)}" if self.window is not None else ""
        return f"{self.method.value}{window}@{self.schedule.describe()}"
