import pytest

from polyfed.config import Config
from polyfed.demo import DEMO_TODAY, seed_demo
from polyfed.service import PolyfedService


def make_service(**overrides) -> PolyfedService:
    values = {"mode": "extended", "validator.mode": "strict"}
    values.update(overrides)
    service = PolyfedService(Config(values=values), clock=lambda: DEMO_TODAY)
    return service


@pytest.fixture
def service():
    return make_service()


@pytest.fixture
def demo_service():
    service = make_service()
    seed_demo(service)
    return service
