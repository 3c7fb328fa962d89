from .estimators import (CovEstimate, EstimatorMethod, EstimatorSpec, bm, obm, sv, sv_flat_top_fast, wbm,
                         wbm_flat_top_fast, overlapping_wbm)
from .interfaces import CovarianceEstimator
from .windows import LagWindowSpec, FLAT_TOP, effective_b, window_name


class BatchMeansEstimator(CovarianceEstimator):
    """Non-overlapping batch means"""

    @property
    def name(self) -> str:
        return "bm"

    def estimate(self, chain, b: int) -> CovEstimate:
        return bm(chain, b)


class OverlappingBatchMeansEstimator(CovarianceEstimator):
    """Overlapping batch means"""

    @property
    def name(self) -> str:
        return "obm"

    def estimate(self, chain, b: int) -> CovEstimate:
        return obm(chain, b)


class _WindowedEstimator(CovarianceEstimator):
    prefix = ""

    def __init__(self, window: LagWindowSpec):
        self.window = window

    @property
    def name(self) -> str:
        return f"{self.prefix}/{window_name(self.window)}"


class SpectralVarianceEstimator(_WindowedEstimator):
    """Lag-window spectral variance, one autocovariance per lag"""
    prefix = "sv"

    def estimate(self, chain, b: int) -> CovEstimate:
        return sv(chain, self.window, b)


class WeightedBatchMeansEstimator(_WindowedEstimator):
    """Weighted batch means over every batch size with nonzero Δ₂w"""
    prefix = "wbm"

    def estimate(self, chain, b: int) -> CovEstimate:
        return wbm(chain, self.window, b)


class OverlappingWeightedBatchMeansEstimator(_WindowedEstimator):
    prefix = "owbm"

    def estimate(self, chain, b: int) -> CovEstimate:
        return overlapping_wbm(chain, self.window, b)


class FlatTopSpectralVarianceEstimator(SpectralVarianceEstimator):
    """Flat-top SV as a difference of two Bartlett SV estimates"""

    def __init__(self):
        super().__init__(FLAT_TOP)

    def estimate(self, chain, b: int) -> CovEstimate:
        # b/2 must itself be a usable Bartlett truncation point
        if effective_b(FLAT_TOP, b) < 4:
            return super().estimate(chain, b)
        return sv_flat_top_fast(chain, b)


class FlatTopWeightedBatchMeansEstimator(WeightedBatchMeansEstimator):
    """Flat-top weighted BM as 2·BM(b) - BM(b/2)"""

    def __init__(self):
        super().__init__(FLAT_TOP)

    def estimate(self, chain, b: int) -> CovEstimate:
        if effective_b(FLAT_TOP, b) < 4:
            return super().estimate(chain, b)
        return wbm_flat_top_fast(chain, b)


def create_estimator(spec: EstimatorSpec, fast_paths: bool = True) -> CovarianceEstimator:
    """
    Build the estimator for a spec, choosing the flat-top fast paths when allowed.

    Args:
        spec: Method, window and schedule
        fast_paths: Use the closed-form flat-top paths for SV and WBM
    Returns:
        CovarianceEstimator
    """
    method = spec.method
    if method == EstimatorMethod.BM:
        return BatchMeansEstimator()
    if method == EstimatorMethod.OBM:
        return OverlappingBatchMeansEstimator()
    if method == EstimatorMethod.SV:
        if fast_paths and spec.is_flat_top:
            return FlatTopSpectralVarianceEstimator()
        return SpectralVarianceEstimator(spec.window)
    if method == EstimatorMethod.WBM:
        if fast_paths and spec.is_flat_top:
            return FlatTopWeightedBatchMeansEstimator()
        return WeightedBatchMeansEstimator(spec.window)
    if method == EstimatorMethod.OWBM:
        return OverlappingWeightedBatchMeansEstimator(spec.window)
    raise ValueError(f"Unsupported estimator method: {method}")
