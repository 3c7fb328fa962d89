from abc import ABC, abstractmethod
from typing import Optional

import numpy as np


class CovarianceEstimator(ABC):
    """Abstract interface for estimators of the asymptotic covariance matrix"""

    @property
    @abstractmethod
    def name(self) -> str:
        pass

    @abstractmethod
    def estimate(self, chain, b: int):
        """Return a CovEstimate for the chain at batch size / truncation point b"""
        pass


class ChainSource(ABC):
    """Abstract interface for reference chains with a known asymptotic covariance"""

    @property
    @abstractmethod
    def p(self) -> int:
        pass

    @abstractmethod
    def generate(self, n: int, seed: Optional[int] = None):
        """Return a ChainMatrix of n rows; seed overrides the model's own seed"""
        pass

    @abstractmethod
    def true_sigma(self) -> np.ndarray:
        pass

    def true_mean(self) -> np.ndarray:
        return np.zeros(self.p)
