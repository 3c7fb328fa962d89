__version__ = "1.0.0"

from .configuration import config, logger
from covkit import CovKitFactory


__all__ = ['config', 'logger', 'CovKitFactory']
