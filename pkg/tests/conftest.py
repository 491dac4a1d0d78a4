import numpy as np
import pytest

from smoothlab.core import FiniteDomain, HypothesisClass, make_partition_class


@pytest.fixture
def const_class():
    """{h = +1, h = -1} on a 2-point domain."""
    return HypothesisClass([[1.0, 1.0], [-1.0, -1.0]], declared_dim=1, binary=True)


@pytest.fixture
def real_class():
    """A small real-valued class: {+1, 0} constants on a 1-point domain."""
    return HypothesisClass([[1.0], [0.0]], declared_dim=1, binary=False)


@pytest.fixture
def partition8():
    return make_partition_class(FiniteDomain(8), 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20260823)
