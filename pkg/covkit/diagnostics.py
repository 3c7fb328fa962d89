"""
Decisions built on a covariance estimate: multivariate effective sample
size, confidence ellipsoids, coverage experiments and sequential stopping.

The confidence region for the mean is
{θ : n(Ȳ - θ)ᵀ Σ̂⁻¹ (Ȳ - θ) <= χ²_{p,level}}, calibrated with the chi-square
quantile as a large-n approximation. Indefinite estimates (flat-top windows
can produce them) are projected onto the positive definite cone before any
determinant or inverse, and every result says whether that happened.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.optimize import brentq
from scipy.special import gammainc, gammaln

from .configuration import config
from .errors import CovKitError, DiagnosticError, StoppingError, StoppingConfigError
from .estimators import (ChainMatrix, CovEstimate, EstimatorSpec, BatchSchedule, SchedulePolicy,
                         batch_size, doubling_batch_size)
from .implementations import create_estimator
from .interfaces import ChainSource
from .streaming import StreamState, RunningMoments
from .windows import window_name

CovLike = Union[CovEstimate, np.ndarray]


def _matrix_of(cov: CovLike) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(getattr(cov, 'matrix', cov), dtype=np.float64))
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DiagnosticError(f"Covariance must be a square matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DiagnosticError("Covariance has non-finite entries")
    return matrix


@dataclass
class PsdProjection:
    matrix: np.ndarray
    projected: bool
    min_eigenvalue: float
    floor: float


def psd_project(cov: CovLike) -> PsdProjection:
    """
    Clamp eigenvalues below ε = psd_floor·max(λ_max, 1) up to ε.

    Inputs whose eigenvalues are all >= ε are returned unchanged.
    """
    matrix = _matrix_of(cov)
    matrix = (matrix + matrix.T) / 2.0
    eigenvalues, vectors = np.linalg.eigh(matrix)
    floor = config.get('psd_floor') * max(float(eigenvalues[-1]), 1.0)
    min_eigenvalue = float(eigenvalues[0])
    if min_eigenvalue >= floor:
        return PsdProjection(matrix, False, min_eigenvalue, floor)
    clamped = np.maximum(eigenvalues, floor)
    rebuilt = (vectors * clamped) @ vectors.T
    config.logger.debug(f"Projected covariance with min eigenvalue {min_eigenvalue:.6g} onto floor {floor:.3g}")
    return PsdProjection((rebuilt + rebuilt.T) / 2.0, True, min_eigenvalue, floor)


def _logdet_pd(matrix: np.ndarray, what: str) -> float:
    sign, logdet = np.linalg.slogdet(matrix)
    if sign <= 0 or not np.isfinite(logdet):
        min_eigenvalue = float(np.linalg.eigvalsh(matrix)[0])
        raise DiagnosticError(f"{what} is not positive definite", min_eigenvalue=min_eigenvalue)
    return float(logdet)


def sample_covariance(chain) -> np.ndarray:
    """Λ = (1/n) Σ_t (Y_t - Ȳ)(Y_t - Ȳ)ᵀ."""
    chain = chain if isinstance(chain, ChainMatrix) else ChainMatrix(chain)
    centered = chain.data - chain.mean()
    lam = centered.T @ centered / chain.n
    return (lam + lam.T) / 2.0


@dataclass
class EssResult:
    ess: float
    projected: bool
    min_eigenvalue: float


def ess_from_matrices(n: int, sample_cov: np.ndarray, sigma: CovLike) -> EssResult:
    """ESS = n·(det Λ / det Σ̂)^{1/p}, projecting Σ̂ first if needed."""
    lam = _matrix_of(sample_cov)
    projection = psd_project(sigma)
    if projection.matrix.shape != lam.shape:
        raise DiagnosticError(f"Dimension mismatch: Σ̂ {projection.matrix.shape} vs Λ {lam.shape}")
    p = lam.shape[0]
    log_ratio = _logdet_pd(lam, "Sample covariance") - _logdet_pd(projection.matrix, "Covariance estimate")
    return EssResult(ess=float(n * math.exp(log_ratio / p)), projected=projection.projected,
                     min_eigenvalue=projection.min_eigenvalue)


def multivariate_ess(chain, cov: CovLike) -> float:
    chain = chain if isinstance(chain, ChainMatrix) else ChainMatrix(chain)
    if chain.p > chain.n:
        raise DiagnosticError(f"ESS needs p <= n, got p={chain.p}, n={chain.n}")
    return ess_from_matrices(chain.n, sample_covariance(chain), cov).ess


def chi2_quantile(df: int, prob: float) -> float:
    """
    Inverse CDF of the chi-square distribution with df degrees of freedom.

    Inverts the regularized lower incomplete gamma P(df/2, x/2) by bracketed
    root finding to an absolute tolerance of 1e-12.
    """
    if df < 1:
        raise ValueError(f"Degrees of freedom must be >= 1, got {df}")
    if not 0.0 < prob < 1.0:
        raise ValueError(f"Probability must lie in (0, 1), got {prob}")
    shape = df / 2.0

    def cdf_gap(x: float) -> float:
        return gammainc(shape, x / 2.0) - prob

    upper = max(2.0 * df, 8.0)
    while cdf_gap(upper) < 0.0:
        upper *= 2.0
    return float(brentq(cdf_gap, 0.0, upper, xtol=1e-12, maxiter=500))


def min_ess(p: int, alpha: float = 0.05, eps: float = 0.05) -> float:
    """
    ESS at which a level 1 - alpha region reaches relative precision eps:
    2^{2/p} π χ²_{p,1-alpha} / ((p Γ(p/2))^{2/p} eps²).
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    log_value = ((2.0 / p) * math.log(2.0) + math.log(math.pi) + math.log(chi2_quantile(p, 1.0 - alpha))
                 - (2.0 / p) * (math.log(p) + gammaln(p / 2.0)) - 2.0 * math.log(eps))
    return math.exp(log_value)


@dataclass
class RegionSpec:
    """Confidence ellipsoid for the mean centered at Ȳ_n."""
    level: float
    center: np.ndarray
    cov: CovLike
    n: int

    def __post_init__(self):
        if not 0.0 < self.level < 1.0:
            raise ValueError(f"Level must lie in (0, 1), got {self.level}")
        self.center = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        self._projection = psd_project(self.cov)
        if self._projection.matrix.shape[0] != self.center.shape[0]:
            raise DiagnosticError(f"Center has dimension {self.center.shape[0]}, "
                                  f"covariance has {self._projection.matrix.shape[0]}")

    @property
    def p(self) -> int:
        return self.center.shape[0]

    @property
    def matrix(self) -> np.ndarray:
        return self._projection.matrix

    @property
    def projected(self) -> bool:
        return self._projection.projected

    @property
    def critical_value(self) -> float:
        return chi2_quantile(self.p, self.level)


def region_volume(region: RegionSpec) -> float:
    """(2π^{p/2} / (pΓ(p/2))) · (χ²_{p,level}/n)^{p/2} · det(Σ̂)^{1/2}."""
    p = region.p
    log_volume = (math.log(2.0) + (p / 2.0) * math.log(math.pi) - math.log(p) - gammaln(p / 2.0)
                  + (p / 2.0) * (math.log(region.critical_value) - math.log(region.n))
                  + 0.5 * _logdet_pd(region.matrix, "Covariance estimate"))
    return math.exp(log_volume)


# Closed region; the relative slack absorbs rounding for points on the boundary
_BOUNDARY_SLACK = 1e-12


def region_contains(region: RegionSpec, theta) -> bool:
    theta = np.atleast_1d(np.asarray(theta, dtype=np.float64))
    deviation = region.center - theta
    try:
        factor = linalg.cho_factor(region.matrix)
    except linalg.LinAlgError:
        raise DiagnosticError("Covariance estimate is not positive definite",
                              min_eigenvalue=float(np.linalg.eigvalsh(region.matrix)[0]))
    statistic = region.n * float(deviation @ linalg.cho_solve(factor, deviation))
    return statistic <= region.critical_value * (1.0 + _BOUNDARY_SLACK)


class StoppingEstimator(str, Enum):
    BM = "bm"
    WBM_FLAT_TOP = "wbm-flat-top"


@dataclass
class StoppingConfig:
    """Stop at the first check point n >= min_n with ESS >= ess_threshold."""
    ess_threshold: float
    min_n: int
    check_interval: int = 100
    schedule: BatchSchedule = field(default_factory=BatchSchedule.doubling)
    estimator: StoppingEstimator = StoppingEstimator.WBM_FLAT_TOP
    max_n: Optional[int] = None

    def __post_init__(self):
        if self.ess_threshold <= 0:
            raise StoppingConfigError(f"ESS threshold must be positive, got {self.ess_threshold}")
        if self.check_interval < 1:
            raise StoppingConfigError(f"Check interval must be >= 1, got {self.check_interval}")
        # the streaming ledgers only support batch sizes that double
        if self.schedule.policy != SchedulePolicy.DOUBLING:
            raise StoppingConfigError(f"Sequential stopping needs a doubling:<nu> schedule, "
                                      f"got {self.schedule.describe()}")
        initial_b = max(2, doubling_batch_size(max(int(self.min_n), 1), self.schedule.nu))
        if self.min_n < 4 * initial_b:
            raise StoppingConfigError(f"min_n={self.min_n} is below 4 x the initial batch size {initial_b}")
        if self.max_n is not None and self.max_n < self.min_n:
            raise StoppingConfigError(f"max_n={self.max_n} is below min_n={self.min_n}")


@dataclass
class StoppingResult:
    stopped: bool
    stopped_at: Optional[int]
    n_consumed: int
    ess_trace: List[Tuple[int, float]]
    psd_projected: bool

    def to_dict(self) -> dict:
        return {
            'stopped': self.stopped,
            'stopped_at': self.stopped_at,
            'n': self.n_consumed,
            'ess_trace': [[n, ess] for n, ess in self.ess_trace],
            'psd_projected': self.psd_projected,
        }


def sequential_stop(samples: Iterable, stopping: StoppingConfig) -> StoppingResult:
    """
    Feed samples through a streaming estimator until the ESS crosses the threshold.

    Args:
        samples: Iterable of p-vectors, or a ChainMatrix
        stopping: Stopping rule settings
    Returns:
        StoppingResult; stopped is False if the samples ran out first
    Raises:
        StoppingError: If an estimate fails at a check point
    """
    if isinstance(samples, ChainMatrix):
        samples = samples.data
    state, moments = None, None
    trace: List[Tuple[int, float]] = []
    projected_any = False
    n = 0

    for sample in samples:
        if state is None:
            p = np.asarray(sample, dtype=np.float64).reshape(-1).shape[0]
            state = StreamState(p, stopping.schedule.nu)
            moments = RunningMoments(p)
        state.push(sample)
        moments.push(sample)
        n = state.total_count

        if n >= stopping.min_n and (n - stopping.min_n) % stopping.check_interval == 0:
            try:
                if stopping.estimator == StoppingEstimator.WBM_FLAT_TOP:
                    estimate = state.estimate_flat_top()
                else:
                    estimate = state.estimate_bm()
                result = ess_from_matrices(n, moments.covariance(), estimate.matrix)
            except CovKitError as e:
                raise StoppingError(str(e), n) from e
            projected_any = projected_any or result.projected
            trace.append((n, result.ess))
            if result.ess >= stopping.ess_threshold:
                config.logger.info(f"Sequential stop at n={n} with ESS {result.ess:.1f}")
                return StoppingResult(True, n, n, trace, projected_any)

        if stopping.max_n is not None and n >= stopping.max_n:
            break

    config.logger.info(f"Samples exhausted at n={n} without reaching ESS {stopping.ess_threshold}")
    return StoppingResult(False, None, n, trace, projected_any)


@dataclass
class CoverageResult:
    coverage: float
    mc_se: float
    reps: int
    level: float
    n: int
    method: str
    window: Optional[str]
    b: int
    projected_count: int

    def to_dict(self) -> dict:
        return {
            'method': self.method,
            'window': self.window,
            'b': self.b,
            'n': self.n,
            'level': self.level,
            'reps': self.reps,
            'coverage': self.coverage,
            'mc_se': self.mc_se,
            'psd_projected': self.projected_count > 0,
            'projected_count': self.projected_count,
        }


def coverage_experiment(model: ChainSource, n: int, spec: EstimatorSpec, level: float, reps: int,
                        seed: int, threads: int = 1) -> CoverageResult:
    """
    Fraction of replications whose confidence region contains the true mean.

    Replication r uses seed + r, so the result does not depend on thread count.
    """
    if reps < 10:
        raise ValueError(f"Coverage experiments need reps >= 10, got {reps}")
    estimator = create_estimator(spec)
    b = batch_size(n, spec.schedule)
    truth = model.true_mean()

    def replicate(rep: int) -> Tuple[bool, bool]:
        chain = model.generate(n, seed=seed + rep)
        region = RegionSpec(level=level, center=chain.mean(), cov=estimator.estimate(chain, b), n=n)
        return region_contains(region, truth), region.projected

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            outcomes = list(executor.map(replicate, range(reps)))
    else:
        outcomes = [replicate(rep) for rep in range(reps)]

    hits = sum(1 for inside, _ in outcomes if inside)
    coverage = hits / reps
    result = CoverageResult(coverage=coverage, mc_se=math.sqrt(coverage * (1.0 - coverage) / reps), reps=reps,
                            level=level, n=n, method=spec.method.value,
                            window=window_name(spec.window) if spec.window is not None else None, b=b,
                            projected_count=sum(1 for _, projected in outcomes if projected))
    config.logger.info(f"Coverage {coverage:.3f} ± {result.mc_se:.3f} for {spec.describe()} over {reps} reps")
    return result
