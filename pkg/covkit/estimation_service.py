from typing import Callable, Dict, Any, Optional

from .configuration import config
from .diagnostics import RegionSpec, ess_from_matrices, region_volume, sample_covariance
from .errors import InsufficientBatchesError
from .estimators import ChainMatrix, CovEstimate, EstimatorSpec, batch_size
from .implementations import create_estimator
from .interfaces import CovarianceEstimator
from .windows import window_name


class EstimationService:
    """Runs estimator specs against chains and summarizes the results"""

    def __init__(self, estimator_factory: Callable[[EstimatorSpec], CovarianceEstimator] = create_estimator):
        self.estimator_factory = estimator_factory

    def estimate(self, chain, spec: EstimatorSpec, b: Optional[int] = None) -> CovEstimate:
        """
        Estimate Σ for a chain.

        Args:
            chain: ChainMatrix or array of shape (n, p)
            spec: Method, window and batch schedule
            b: Explicit batch size, overriding the schedule
        Returns:
            CovEstimate
        """
        chain = chain if isinstance(chain, ChainMatrix) else ChainMatrix(chain)
        if chain.n < 4:
            raise InsufficientBatchesError(f"Need at least 4 rows to form batches, got {chain.n}")
        if b is None:
            b = batch_size(chain.n, spec.schedule)
        estimator = self.estimator_factory(spec)
        config.logger.info(f"Running {estimator.name} on n={chain.n}, p={chain.p} with b={b}")
        estimate = estimator.estimate(chain, b)
        config.logger.info(f"{estimator.name} finished in {estimate.wall_time * 1000.0:.3f} ms, "
                           f"min eigenvalue {estimate.min_eigenvalue:.6g}")
        return estimate

    def assess(self, chain, spec: EstimatorSpec, level: float) -> Dict[str, Any]:
        """Estimate Σ and report the multivariate ESS and region volume at the given level."""
        chain = chain if isinstance(chain, ChainMatrix) else ChainMatrix(chain)
        estimate = self.estimate(chain, spec)
        ess = ess_from_matrices(chain.n, sample_covariance(chain), estimate)
        region = RegionSpec(level=level, center=chain.mean(), cov=estimate, n=chain.n)
        return {
            'method': estimate.method.value,
            'window': window_name(estimate.window) if estimate.window is not None else None,
            'b': estimate.b_used,
            'n': chain.n,
            'level': level,
            'ess': ess.ess,
            'volume': region_volume(region),
            'min_eigenvalue': estimate.min_eigenvalue,
            'psd_projected': ess.projected,
        }


def run_estimator(chain, spec: EstimatorSpec) -> CovEstimate:
    return EstimationService().estimate(chain, spec)
