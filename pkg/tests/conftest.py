from fractions import Fraction

import pytest

from lie_entropy_lab.groups import LieGroupModel, ModelName
from lie_entropy_lab.measures import FinSuppMeasure
from lie_entropy_lab.montecarlo import RngStream
from lie_entropy_lab.verification import bernoulli_measure, sanov_measure


@pytest.fixture
def sl2r() -> LieGroupModel:
    return LieGroupModel.create(ModelName.sl2r)


@pytest.fixture
def line() -> LieGroupModel:
    return LieGroupModel.create(ModelName.abelian, 1)


@pytest.fixture
def sanov() -> FinSuppMeasure:
    """Uniform measure on the two Sanov generators of a free subgroup of SL2(Z)."""
    return sanov_measure()


@pytest.fixture
def bernoulli() -> FinSuppMeasure:
    """Fair coin on {0, 1/10} in the abelian line, close enough to overlap after smoothing."""
    return bernoulli_measure(Fraction(1, 10))


@pytest.fixture
def rng() -> RngStream:
    return RngStream(seed=20240917)
