import numpy as np
import pytest

from tanhom.integrand import StepProfile, make_laminate_quadratic
from tanhom.manifold import Sphere


@pytest.fixture(scope="session")
def s1():
    return Sphere(2)


@pytest.fixture(scope="session")
def profile_a():
    return StepProfile((0.5,), (1.0, 2.0))


@pytest.fixture(scope="session")
def profile_b():
    return StepProfile.constant(1.0)


@pytest.fixture(scope="session")
def laminate2(profile_a, profile_b):
    return make_laminate_quadratic(profile_a, profile_b, 2)


@pytest.fixture(scope="session")
def laminate1(profile_a, profile_b):
    return make_laminate_quadratic(profile_a, profile_b, 1)


@pytest.fixture(scope="session")
def north():
    return np.array([0.0, 1.0])


@pytest.fixture(scope="session")
def xi_harmonic():
    # First-column direction: feels the harmonic mean of the laminate weight.
    return np.array([[1.0, 0.0], [0.0, 0.0]])


@pytest.fixture(scope="session")
def xi_arithmetic():
    return np.array([[0.0, 1.0], [0.0, 0.0]])
