import pytest

from spider_stop import SpiderModel


@pytest.fixture
def model3():
    """Three-leg Brownian spider, uniform leg choice, r = 1/2."""
    return SpiderModel.brownian(3, r=0.5)


@pytest.fixture
def skewed():
    return SpiderModel.brownian(3, p=(0.2, 0.3, 0.5), r=0.7)
