"""
Direct loop-by-loop versions of the estimators.

These follow the defining sums term by term with no vectorized shortcuts and
serve as reference values for the fast implementations. They are only
practical for short chains.
"""
import numpy as np

from .errors import InsufficientBatchesError
from .windows import LagWindowSpec, effective_b, window_weight, delta2


def _rows(chain) -> np.ndarray:
    data = np.asarray(getattr(chain, 'data', chain), dtype=np.float64)
    return data.reshape(-1, 1) if data.ndim == 1 else data


def _mean(rows) -> np.ndarray:
    total = np.zeros(rows.shape[1])
    for row in rows:
        total = total + row
    return total / rows.shape[0]


def _outer_sum(vectors) -> np.ndarray:
    p = vectors[0].shape[0]
    total = np.zeros((p, p))
    for vector in vectors:
        total = total + np.outer(vector, vector)
    return total


def naive_bm(chain, b: int) -> np.ndarray:
    data = _rows(chain)
    n = data.shape[0]
    a = n // b
    if a < 2:
        raise InsufficientBatchesError(f"b={b} leaves fewer than 2 batches")
    tail = data[n - a * b:]
    grand_mean = _mean(tail)
    batch_means = [_mean(tail[l * b:(l + 1) * b]) for l in range(a)]
    return b / (a - 1) * _outer_sum([m - grand_mean for m in batch_means])


def naive_obm(chain, b: int) -> np.ndarray:
    data = _rows(chain)
    n = data.shape[0]
    grand_mean = _mean(data)
    window_means = [_mean(data[l:l + b]) for l in range(n - b + 1)]
    return n * b / ((n - b) * (n - b + 1)) * _outer_sum([m - grand_mean for m in window_means])


def naive_autocovariance(chain, k: int) -> np.ndarray:
    data = _rows(chain)
    n, p = data.shape
    grand_mean = _mean(data)
    total = np.zeros((p, p))
    for t in range(n - k):
        total = total + np.outer(data[t] - grand_mean, data[t + k] - grand_mean)
    return total / n


def naive_sv(chain, window: LagWindowSpec, b: int) -> np.ndarray:
    b = effective_b(window, b)
    result = naive_autocovariance(chain, 0)
    for k in range(1, b + 1):
        gamma = naive_autocovariance(chain, k)
        result = result + window_weight(window, k, b) * (gamma + gamma.T)
    return result


def naive_wbm(chain, window: LagWindowSpec, b: int) -> np.ndarray:
    """Weighted batch means with the retained-row mean of each batch size."""
    data = _rows(chain)
    n, p = data.shape
    b = effective_b(window, b)
    result = np.zeros((p, p))
    for k in range(1, b + 1):
        weight = delta2(window, k, b)
        if weight == 0.0:
            continue
        a = n // k
        tail = data[n - a * k:]
        grand_mean = _mean(tail)
        batch_means = [_mean(tail[l * k:(l + 1) * k]) for l in range(a)]
        result = result + k * k * weight / (a - 1) * _outer_sum([m - grand_mean for m in batch_means])
    return result
