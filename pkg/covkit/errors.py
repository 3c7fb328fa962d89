"""
Error types raised by the covkit library.

Every error carries the process exit code the command line front end maps it
to: 2 for usage and configuration problems, 4 for numeric failures.
"""
from typing import Optional


class CovKitError(Exception):
    """Base class for covkit errors."""
    exit_code = 4
    error_type = "CovKitError"

    def to_dict(self) -> dict:
        return {
            "error": self.error_type,
            "message": str(self),
            "status": self.exit_code,
        }


class WindowConfigError(CovKitError):
    """Unknown lag-window family or missing/invalid window parameters."""
    exit_code = 2
    error_type = "WindowConfigError"


class ScheduleConfigError(CovKitError):
    """Invalid batch schedule."""
    exit_code = 2
    error_type = "ScheduleConfigError"


class ChainError(CovKitError):
    """Invalid chain matrix or reference-model parameters."""
    error_type = "ChainError"


class InsufficientBatchesError(CovKitError):
    """Too few batches for a batch-means style estimate."""
    error_type = "InsufficientBatchesError"


class NonFiniteEstimateError(CovKitError):
    """An estimate overflowed to inf or NaN."""
    error_type = "NonFiniteEstimateError"


class StreamError(CovKitError):
    """Invalid push or query on a streaming estimator."""
    error_type = "StreamError"


class ChainFormatError(CovKitError):
    """A chain file could not be parsed."""
    exit_code = 2
    error_type = "ChainFormatError"


class DiagnosticError(CovKitError):
    """A covariance estimate cannot be used for a diagnostic."""
    error_type = "DiagnosticError"

    def __init__(self, message: str, min_eigenvalue: Optional[float] = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue

    def to_dict(self) -> dict:
        result = super().to_dict()
        result["min_eigenvalue"] = self.min_eigenvalue
        return result


class StoppingConfigError(CovKitError):
    """Inconsistent sequential stopping settings."""
    exit_code = 2
    error_type = "StoppingConfigError"


class StoppingError(CovKitError):
    """An estimator failed inside the sequential stopping loop."""
    error_type = "StoppingError"

    def __init__(self, message: str, n: int):
        super().__init__(f"{message} (at n={n})")
        self.n = n

    def to_dict(self) -> dict:
        result = super().to_dict()
        result["n"] = self.n
        return result
