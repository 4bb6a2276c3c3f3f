from fractions import Fraction
from typing import List

import numpy as np
import pytest

from nrspace.algebra import AlgVec, builtin_spec, vector
from nrspace.scalars import Radical, rational_unit_vector


@pytest.fixture(scope="session")
def v1():
    return builtin_spec("sp2_su2")


@pytest.fixture(scope="session")
def su2():
    return builtin_spec("su2_biinv")


@pytest.fixture(scope="session")
def flat7():
    return builtin_spec("flat7")


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


def random_unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    x = rng.standard_normal(dim)
    return x / np.linalg.norm(x)


def rational_directions(spec, count: int, seed: int = 11) -> List[AlgVec]:
    generator = np.random.default_rng(seed)
    return [vector(spec, rational_unit_vector(generator, spec.dim_m)) for _ in range(count)]


def random_radical(generator: np.random.Generator) -> Radical:
    return Radical(
        Fraction(int(generator.integers(-10, 11)), int(generator.integers(1, 6))) for _ in range(8)
    )


def assert_exact_equal(A: np.ndarray, B: np.ndarray) -> None:
    assert A.shape == B.shape
    mismatched = [(i, a, b) for i, (a, b) in enumerate(zip(A.flat, B.flat)) if a != b]
    assert not mismatched, mismatched[:3]
