import os

import pytest


def pytest_configure(config):
    """Configure pytest with custom markers."""
    config.addinivalue_line(
        "markers", "acceptance: Monte Carlo and timing criteria (set COVKIT_ACCEPTANCE=1 to run)"
    )


def pytest_runtest_setup(item):
    """Skip acceptance tests unless they are requested."""
    if item.get_closest_marker("acceptance") is not None:
        if os.getenv('COVKIT_ACCEPTANCE', '').lower() not in ('1', 'true', 'yes', 'on'):
            pytest.skip("Acceptance test; set COVKIT_ACCEPTANCE=1 to run")
