import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running ensemble test")


@pytest.fixture
def unit_mode():
    from thermowigner import ModeSpec

    return ModeSpec(1, 1.0)
