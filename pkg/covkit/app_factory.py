from .configuration import config
from .estimation_service import EstimationService
from .implementations import create_estimator


class CovKitFactory:
    """Factory for creating covkit components"""
    @staticmethod
    def create_service(new_config=None, fast_paths: bool = True) -> EstimationService:
        """Create a configured EstimationService"""

        # Set configuration passed from importing package
        if new_config:
            config.update_config(new_config)

        def factory(spec):
            return create_estimator(spec, fast_paths=fast_paths)

        config.logger.debug(f"Configured estimation service (fast_paths={fast_paths})")
        return EstimationService(factory)
