import pytest

from conelab.cone_spectrum import ConeSpec
from conelab.foliation import Foliation


@pytest.fixture(scope="session")
def c33():
    return ConeSpec(3, 3)


@pytest.fixture(scope="session")
def fol33():
    return Foliation.compute(ConeSpec(3, 3))


@pytest.fixture(scope="session")
def fol33_l1():
    return Foliation.compute(ConeSpec(3, 3, 1))


@pytest.fixture(scope="session")
def fol15():
    return Foliation.compute(ConeSpec(1, 5))
