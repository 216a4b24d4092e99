import numpy as np
import pytest

from lambdalab.builders import (constant_solution, family_from_uq, solve_gordon_strip,
                                strip_minimum)
from lambdalab.grid import Domain
from lambdalab.transforms import kernel_splitting

STRIP_Q = 0.1


@pytest.fixture(scope="session")
def torus64():
    return Domain.torus(64)


@pytest.fixture(scope="session")
def s3_solution(torus64):
    return constant_solution(torus64, 1.0, "S3")


@pytest.fixture(scope="session")
def s3_family(s3_solution):
    return family_from_uq(s3_solution)


@pytest.fixture(scope="session")
def strip_solution():
    return solve_gordon_strip(STRIP_Q, strip_minimum(STRIP_Q), 0.0, n=128)


@pytest.fixture(scope="session")
def strip_family(strip_solution):
    return family_from_uq(strip_solution)


def higgs_split(fam):
    return kernel_splitting(fam.coefficient(-1).part("10"))


def random_tracefree(shape, rng):
    a = rng.normal(size=shape + (2, 2)) + 1j * rng.normal(size=shape + (2, 2))
    tr = np.trace(a, axis1=-2, axis2=-1) / 2
    return a - tr[..., None, None] * np.eye(2)
