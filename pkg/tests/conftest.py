from __future__ import annotations

import numpy as np
import pytest


def random_matrix(rng: np.random.Generator, n: int, m: int | None = None) -> np.ndarray:
    m = n if m is None else m
    return rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))


def random_hermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    a = random_matrix(rng, n)
    return 0.5 * (a + a.conj().T)


def random_density(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    g = random_matrix(rng, n, rank or n)
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
