__version__ = '1.0.0'

from .app_factory import CovKitFactory
from .estimation_service import EstimationService, run_estimator
from .estimators import (ChainMatrix, CovEstimate, EstimatorMethod, EstimatorSpec, BatchSchedule, parse_schedule,
                         batch_size, autocovariance, bm, obm, sv, sv_flat_top_fast, wbm, wbm_flat_top_fast,
                         overlapping_wbm, mse)
from .windows import LagWindowSpec, WindowKind, parse_window, window_name, window_weight, check_conditions

__all__ = ['CovKitFactory', 'EstimationService', 'run_estimator', 'ChainMatrix', 'CovEstimate', 'EstimatorMethod',
           'EstimatorSpec', 'BatchSchedule', 'parse_schedule', 'batch_size', 'autocovariance', 'bm', 'obm', 'sv',
           'sv_flat_top_fast', 'wbm', 'wbm_flat_top_fast', 'overlapping_wbm', 'mse', 'LagWindowSpec', 'WindowKind',
           'parse_window', 'window_name', 'window_weight', 'check_conditions']
