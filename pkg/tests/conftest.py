import numpy as np
import pytest

from config import TestingConfig
from heis_imcf import create_app
from heis_imcf.models.grid_models import Box
from heis_imcf.services.observability import metrics
from heis_imcf.services.obstacle_service import build_domain_mask, parse_obstacle


@pytest.fixture
def app():
    return create_app(TestingConfig)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture(autouse=True)
def clean_metrics():
    metrics.reset()
    yield
    metrics.reset()


@pytest.fixture
def small_box():
    return Box(2.0, 2.0, (17, 17, 17))


@pytest.fixture
def koranyi_mask():
    """Unit gauge ball in a box of half-width 3"""
    box = Box(3.0, 3.0, (25, 25, 25))
    return build_domain_mask(box, parse_obstacle({'gauge_ball': {'center': [0, 0, 0], 'radius': 1.0}}))

