"""
Lag-window families and their finite differences.

A lag window w(k, b) is even in k, equals 1 at k = 0, is bounded by 1 in
absolute value and vanishes for |k| >= b. The second difference
Δ₂w(k) = w(k-1) - 2w(k) + w(k+1) weights the batch-means terms of the
weighted batch-means estimator, so its sparsity decides which fast paths
exist. The strong-consistency conditions on Δ₂w are checked numerically by
`check_conditions`.
"""
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .configuration import config
from .errors import WindowConfigError


class WindowKind(str, Enum):
    BARTLETT = "bartlett"
    TUKEY_HANNING = "tukey-hanning"
    BARTLETT_FLAT_TOP = "flat-top"
    SIMPLE_TRUNCATION = "truncation"
    PARZEN = "parzen"
    SCALED_BARTLETT = "scaled-bartlett"


VALID_WINDOW_NAMES = ["bartlett", "tukey-hanning", "flat-top", "truncation", "parzen:q", "scaled-bartlett:eta"]


@dataclass(frozen=True)
class LagWindowSpec:
    """A lag-window family with its parameters (q for Parzen, eta for scaled Bartlett)."""
    kind: WindowKind
    q: Optional[int] = None
    eta: Optional[float] = None

    def __post_init__(self):
        if self.kind == WindowKind.PARZEN:
            if self.q is None or int(self.q) != self.q or self.q < 1:
                raise WindowConfigError(f"Parzen window requires a positive integer q, got {self.q}")
        elif self.kind == WindowKind.SCALED_BARTLETT:
            if self.eta is None:
                raise WindowConfigError("Scaled Bartlett window requires eta")
            # |w| <= 1 over the support needs eta <= 2
            if not 0.0 < self.eta <= 2.0 or self.eta == 1.0:
                raise WindowConfigError(f"Scaled Bartlett eta must lie in (0, 2] and differ from 1, got {self.eta}")

    @property
    def name(self) -> str:
        return window_name(self)


BARTLETT = LagWindowSpec(WindowKind.BARTLETT)
TUKEY_HANNING = LagWindowSpec(WindowKind.TUKEY_HANNING)
FLAT_TOP = LagWindowSpec(WindowKind.BARTLETT_FLAT_TOP)
TRUNCATION = LagWindowSpec(WindowKind.SIMPLE_TRUNCATION)


def parse_window(name: str) -> LagWindowSpec:
    """
    Parse a window name such as "bartlett", "parzen:2" or "scaled-bartlett:2.0".

    Raises:
        WindowConfigError: If the name is unknown or its parameter is malformed
    """
    if not isinstance(name, str) or not name.strip():
        raise WindowConfigError(f"Window name must be a non-empty string. Valid names: {', '.join(VALID_WINDOW_NAMES)}")
    family, _, param = name.strip().lower().partition(':')
    try:
        kind = WindowKind(family)
    except ValueError:
        raise WindowConfigError(f"Unknown window '{name}'. Valid names: {', '.join(VALID_WINDOW_NAMES)}")

    if kind == WindowKind.PARZEN:
        try:
            return LagWindowSpec(kind, q=int(param))
        except ValueError:
            raise WindowConfigError(f"Parzen window needs an integer order, e.g. 'parzen:2', got '{name}'")
    if kind == WindowKind.SCALED_BARTLETT:
        try:
            return LagWindowSpec(kind, eta=float(param))
        except ValueError:
            raise WindowConfigError(f"Scaled Bartlett window needs eta, e.g. 'scaled-bartlett:2', got '{name}'")
    if param:
        raise WindowConfigError(f"Window '{family}' takes no parameter, got '{name}'")
    return LagWindowSpec(kind)


def window_name(spec: LagWindowSpec) -> str:
    if spec.kind == WindowKind.PARZEN:
        return f"parzen:{spec.q}"
    if spec.kind == WindowKind.SCALED_BARTLETT:
        return f"scaled-bartlett:{spec.eta:g}"
    return spec.kind.value


def effective_b(spec: LagWindowSpec, b: int) -> int:
    """Truncation point actually used: flat top rounds b down to an even value >= 2."""
    b = int(b)
    if b < 1:
        raise WindowConfigError(f"Truncation point b must be >= 1, got {b}")
    if spec.kind == WindowKind.BARTLETT_FLAT_TOP:
        return max(2, b - b % 2)
    return b


def window_weight(spec: LagWindowSpec, k: int, b: int) -> float:
    """
    Return w(k, b) for the window family.

    Args:
        spec: Window family and parameters
        k: Lag (any integer, the window is even)
        b: Truncation point (>= 1)
    Returns:
        The weight, exactly 0.0 for |k| >= b
    """
    b = effective_b(spec, b)
    ak = abs(int(k))
    if ak >= b:
        return 0.0

    kind = spec.kind
    if kind == WindowKind.BARTLETT:
        return (b - ak) / b
    if kind == WindowKind.TUKEY_HANNING:
        return (1.0 + math.cos(math.pi * ak / b)) / 2.0
    if kind == WindowKind.BARTLETT_FLAT_TOP:
        if 2 * ak <= b:
            return 1.0
        return 2.0 * (b - ak) / b
    if kind == WindowKind.SIMPLE_TRUNCATION:
        return 1.0
    if kind == WindowKind.PARZEN:
        # integer arithmetic, single rounding
        return (b ** spec.q - ak ** spec.q) / b ** spec.q
    if kind == WindowKind.SCALED_BARTLETT:
        return 1.0 - spec.eta * ak / b
    raise WindowConfigError(f"Unsupported window kind: {kind}")


def delta1(spec: LagWindowSpec, k: int, b: int) -> float:
    """First difference Δ₁w(k) = w(k-1) - w(k)."""
    return window_weight(spec, k - 1, b) - window_weight(spec, k, b)


def delta2(spec: LagWindowSpec, k: int, b: int) -> float:
    """Second difference Δ₂w(k) = w(k-1) - 2w(k) + w(k+1)."""
    return window_weight(spec, k - 1, b) - 2.0 * window_weight(spec, k, b) + window_weight(spec, k + 1, b)


def delta2_vector(spec: LagWindowSpec, b: int) -> np.ndarray:
    """Δ₂w(k) for k = 1..b as an array (index 0 holds k = 1)."""
    b = effective_b(spec, b)
    weights = [window_weight(spec, k, b) for k in range(0, b + 2)]
    return np.array([weights[k - 1] - 2.0 * weights[k] + weights[k + 1] for k in range(1, b + 1)])


@dataclass
class ConditionReport:
    """Numerical check of the consistency conditions on Δ₂w."""
    window: str
    b_used: int
    sum_k_delta2: float
    abs_sum_delta2: float
    cond1_holds: bool
    tolerance: float
    abs_sum_trend: List[Tuple[int, float]] = field(default_factory=list)
    decay_holds: bool = False

    @property
    def passes(self) -> bool:
        return self.cond1_holds and self.decay_holds

    def to_dict(self) -> dict:
        return {
            'window': self.window,
            'b_used': self.b_used,
            'sum_k_delta2': self.sum_k_delta2,
            'abs_sum_delta2': self.abs_sum_delta2,
            'cond1_holds': self.cond1_holds,
            'tolerance': self.tolerance,
            'abs_sum_trend': [[b, value] for b, value in self.abs_sum_trend],
            'decay_holds': self.decay_holds,
            'passes': self.passes,
        }


def _delta2_sums(spec: LagWindowSpec, b: int) -> Tuple[float, float]:
    d2 = delta2_vector(spec, b)
    ks = np.arange(1, d2.size + 1)
    return math.fsum((ks * d2).tolist()), math.fsum(np.abs(d2).tolist())


def check_conditions(spec: LagWindowSpec, b: int, tol: Optional[float] = None) -> ConditionReport:
    """
    Evaluate Σ k·Δ₂w(k) and Σ |Δ₂w(k)| at b, plus the trend of Σ |Δ₂w(k)|
    over a doubling grid starting at b.

    The remaining conditions involve an unknown mixing exponent, so only the
    raw sums and their trend are reported; `decay_holds` is true when the
    absolute sum at the largest grid point is at most half its value at b.

    Args:
        spec: Window family
        b: Truncation point (>= 2)
        tol: Tolerance for |Σ k·Δ₂w(k) - 1| (default from configuration)
    Returns:
        ConditionReport
    """
    if tol is None:
        tol = config.get('condition_tolerance')
    if tol <= 0:
        raise WindowConfigError(f"Tolerance must be positive, got {tol}")
    if int(b) < 2:
        raise WindowConfigError(f"check_conditions needs b >= 2, got {b}")

    b_used = effective_b(spec, b)
    sum_k, abs_sum = _delta2_sums(spec, b_used)

    trend = [(b_used, abs_sum)]
    for step in range(1, int(config.get('trend_steps', 7))):
        grid_b = b_used * 2 ** step
        trend.append((grid_b, _delta2_sums(spec, grid_b)[1]))

    report = ConditionReport(
        window=window_name(spec),
        b_used=b_used,
        sum_k_delta2=sum_k,
        abs_sum_delta2=abs_sum,
        cond1_holds=abs(sum_k - 1.0) <= tol,
        tolerance=tol,
        abs_sum_trend=trend,
        decay_holds=trend[-1][1] <= 0.5 * trend[0][1],
    )
    config.logger.debug(f"Condition check for {report.window} at b={b_used}: "
                        f"sum k*d2={sum_k:.12g}, sum |d2|={abs_sum:.6g}")
    return report
