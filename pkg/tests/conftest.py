import pytest

from divball.distributions import TruncatedAbove, Weibull
from divball.quadrature import QuadratureConfig

# Weibull fit used throughout the bundled case study.
CASE_SHAPE = 0.4015
CASE_SCALE = 0.6821


@pytest.fixture(scope="session")
def case_weibull():
    return Weibull(shape=CASE_SHAPE, scale=CASE_SCALE)


@pytest.fixture(scope="session")
def case_nominal(case_weibull):
    """The case-study reference model: Weibull conditioned above its 95% quantile."""
    return TruncatedAbove(case_weibull, 0.95)


@pytest.fixture(scope="session")
def quad_cfg():
    return QuadratureConfig()
