"""
Online batch-means estimation with a doubling batch size.

Only batch means are stored. The batch size b is the smallest power of two
>= n^nu; when it doubles, adjacent batches are merged pairwise. Two ledgers
are kept, one at b/2 and one at b, so that both the plain BM estimate and the
flat-top weighted BM estimate 2·BM(b) - BM(b/2) are available in O(n/b)
memory. The partially filled batch never enters an estimate.
"""
import struct
from typing import Iterable, List, Optional

import numpy as np

from .configuration import config
from .errors import StreamError, InsufficientBatchesError
from .estimators import (CovEstimate, EstimatorMethod, bm_from_batch_means, build_estimate,
                         doubling_batch_size, kernel_timer)
from .windows import FLAT_TOP


def _doubling_b(total_count: int, nu: float) -> int:
    return max(2, doubling_batch_size(max(total_count, 1), nu))


class StreamState:
    """Single-writer state of the streaming estimator for p-dimensional samples."""

    def __init__(self, p: int, nu: Optional[float] = None):
        if int(p) < 1:
            raise StreamError(f"Sample dimension must be >= 1, got {p}")
        nu = config.get('default_nu') if nu is None else float(nu)
        if not 0.0 < nu < 1.0:
            raise StreamError(f"nu must lie in (0, 1), got {nu}")
        self.p = int(p)
        self.nu = nu
        self.current_b = 2
        self.total_count = 0
        self._fine: List[np.ndarray] = []
        self._coarse: List[np.ndarray] = []
        self._open_sum = np.zeros(self.p)
        self._open_count = 0
        # Neumaier-compensated running sum
        self._running_sum = np.zeros(self.p)
        self._running_comp = np.zeros(self.p)

    @property
    def fine_b(self) -> int:
        return self.current_b // 2

    @property
    def batch_means(self) -> List[np.ndarray]:
        """Closed batch means at batch size current_b."""
        return list(self._coarse)

    @property
    def fine_batch_means(self) -> List[np.ndarray]:
        """Closed batch means at batch size current_b / 2."""
        return list(self._fine)

    @property
    def open_count(self) -> int:
        """Samples not yet in a closed batch of size current_b."""
        return (len(self._fine) % 2) * self.fine_b + self._open_count

    @property
    def open_batch_sum(self) -> np.ndarray:
        if len(self._fine) % 2:
            return self._fine[-1] * self.fine_b + self._open_sum
        return self._open_sum.copy()

    @property
    def running_sum(self) -> np.ndarray:
        return self._running_sum + self._running_comp

    def mean(self) -> np.ndarray:
        if self.total_count == 0:
            raise StreamError("No samples have been pushed")
        return self.running_sum / self.total_count

    def push(self, sample) -> 'StreamState':
        x = np.asarray(sample, dtype=np.float64).reshape(-1)
        if x.shape[0] != self.p:
            raise StreamError(f"Sample has dimension {x.shape[0]}, stream expects {self.p}")
        if not np.all(np.isfinite(x)):
            raise StreamError(f"Non-finite sample at position {self.total_count}")

        self._accumulate(x)
        self.total_count += 1
        self._open_sum = self._open_sum + x
        self._open_count += 1
        if self._open_count == self.fine_b:
            self._close_fine_batch()

        target = _doubling_b(self.total_count, self.nu)
        while self.current_b < target:
            self._double()
        return self

    def extend(self, samples: Iterable) -> 'StreamState':
        for sample in samples:
            self.push(sample)
        return self

    def _accumulate(self, x: np.ndarray) -> None:
        total = self._running_sum + x
        big = np.abs(self._running_sum) >= np.abs(x)
        self._running_comp = self._running_comp + np.where(big, (self._running_sum - total) + x,
                                                           (x - total) + self._running_sum)
        self._running_sum = total

    def _close_fine_batch(self) -> None:
        self._fine.append(self._open_sum / self.fine_b)
        if len(self._fine) % 2 == 0:
            self._coarse.append((self._fine[-2] + self._fine[-1]) / 2.0)
        self._open_sum = np.zeros(self.p)
        self._open_count = 0

    def _double(self) -> None:
        old_fine_b = self.fine_b
        if len(self._fine) % 2:
            # unpaired fine batch rejoins the open batch at the new granularity
            self._open_sum = self._fine[-1] * old_fine_b + self._open_sum
            self._open_count += old_fine_b
        self._fine = self._coarse
        self._coarse = _merge_pairs(self._fine)
        self.current_b *= 2
        config.logger.debug(f"Stream batch size doubled to {self.current_b} at n={self.total_count}, "
                            f"{len(self._coarse)} closed batches")

    def estimate_bm(self) -> CovEstimate:
        if len(self._coarse) < 2:
            raise InsufficientBatchesError(f"Streaming BM needs 2 closed batches, have {len(self._coarse)}")
        with kernel_timer() as timing:
            matrix = bm_from_batch_means(np.array(self._coarse), self.current_b)
        return build_estimate(matrix, EstimatorMethod.BM, None, self.current_b,
                              len(self._coarse) * self.current_b, timing['seconds'])

    def estimate_flat_top(self) -> CovEstimate:
        if self.current_b < 4 or len(self._coarse) < 2:
            raise InsufficientBatchesError(f"Streaming flat-top needs b >= 4 and 2 closed batches, "
                                           f"have b={self.current_b} and {len(self._coarse)}")
        with kernel_timer() as timing:
            matrix = (2.0 * bm_from_batch_means(np.array(self._coarse), self.current_b)
                      - bm_from_batch_means(np.array(self._fine), self.fine_b))
        return build_estimate(matrix, EstimatorMethod.WBM, FLAT_TOP, self.current_b,
                              len(self._fine) * self.fine_b, timing['seconds'])

    def __repr__(self) -> str:
        return (f"StreamState(p={self.p}, nu={self.nu:g}, b={self.current_b}, n={self.total_count}, "
                f"batches={len(self._coarse)})")


def _merge_pairs(means: List[np.ndarray]) -> List[np.ndarray]:
    return [(means[i] + means[i + 1]) / 2.0 for i in range(0, len(means) - 1, 2)]


def stream_push(state: StreamState, sample) -> StreamState:
    return state.push(sample)


def stream_estimate_bm(state: StreamState) -> CovEstimate:
    return state.estimate_bm()


def stream_estimate_flat_top(state: StreamState) -> CovEstimate:
    return state.estimate_flat_top()


class RunningMoments:
    """Welford running mean and covariance (denominator n) of p-vectors."""

    def __init__(self, p: int):
        self.p = int(p)
        self.n = 0
        self.mean = np.zeros(self.p)
        self._m2 = np.zeros((self.p, self.p))

    def push(self, sample) -> None:
        x = np.asarray(sample, dtype=np.float64).reshape(-1)
        self.n += 1
        delta = x - self.mean
        self.mean = self.mean + delta / self.n
        self._m2 = self._m2 + np.outer(delta, x - self.mean)

    def covariance(self) -> np.ndarray:
        if self.n < 1:
            raise StreamError("No samples have been pushed")
        m2 = self._m2 / self.n
        return (m2 + m2.T) / 2.0


# Checkpoint layout: header, running sum, its compensation, open sum, fine ledger.
# The coarse ledger is the pairwise merge of the fine ledger and is rebuilt on restore.
SNAPSHOT_MAGIC = b'CKST'
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct('<4sHHIdQQQQ')


def snapshot(state: StreamState) -> bytes:
    """Serialize a StreamState as little-endian binary."""
    header = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, 0, state.p, state.nu, state.current_b,
                          state.total_count, len(state._fine), state._open_count)
    vectors = [state._running_sum, state._running_comp, state._open_sum] + list(state._fine)
    body = np.array(vectors, dtype='<f8').tobytes(order='C')
    return header + body


def restore(payload: bytes) -> StreamState:
    """
    Rebuild a StreamState from `snapshot` output.

    Raises:
        StreamError: If the payload is truncated, has the wrong magic or version,
                     or describes an inconsistent state
    """
    if len(payload) < _HEADER.size:
        raise StreamError("Snapshot is truncated")
    magic, version, _, p, nu, current_b, total_count, fine_count, open_count = _HEADER.unpack_from(payload)
    if magic != SNAPSHOT_MAGIC:
        raise StreamError(f"Bad snapshot magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise StreamError(f"Unsupported snapshot version {version}")

    expected = _HEADER.size + (3 + fine_count) * p * 8
    if len(payload) != expected:
        raise StreamError(f"Snapshot body has {len(payload)} bytes, expected {expected}")
    values = np.frombuffer(payload, dtype='<f8', offset=_HEADER.size).astype(np.float64).reshape(3 + fine_count, p)

    state = StreamState(p, nu)
    # a live stream always sits at the doubling batch size for its sample count
    expected_b = _doubling_b(int(total_count), state.nu)
    if current_b != expected_b:
        raise StreamError(f"Snapshot batch size {current_b} does not match {expected_b} "
                          f"for n={total_count} and nu={state.nu:g}")
    state.current_b = int(current_b)
    state.total_count = int(total_count)
    state._running_sum = values[0].copy()
    state._running_comp = values[1].copy()
    state._open_sum = values[2].copy()
    state._open_count = int(open_count)
    state._fine = [row.copy() for row in values[3:]]
    state._coarse = _merge_pairs(state._fine)

    if fine_count * state.fine_b + open_count != total_count or open_count >= max(state.fine_b, 1):
        raise StreamError("Snapshot counts are inconsistent")
    return state
