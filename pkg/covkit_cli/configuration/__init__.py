from .config import config, logger, ConfigError

__all__ = ['config', 'logger', 'ConfigError']
