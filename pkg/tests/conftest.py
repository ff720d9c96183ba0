import pytest
from hypothesis import HealthCheck, settings

from klsat.pool import standard_pool

settings.register_profile("klsat", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("klsat")


@pytest.fixture
def pool8():
    return standard_pool()
