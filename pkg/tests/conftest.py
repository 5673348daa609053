import numpy as np
import pytest

from mifoimpute import DataMatrix


def random_matrix(rng: np.random.Generator, n: int, p: int, missing: float = 0.0) -> DataMatrix:
    """Random matrix with an optional random mask that keeps >= 2 observed per column."""
    values = rng.standard_normal((n, p)) * rng.uniform(0.5, 3.0)
    mask = np.zeros((n, p), dtype=bool)
    if missing > 0.0:
        while True:
            mask = rng.random((n, p)) < missing
            if ((~mask).sum(axis=0) >= 2).all() and mask.any():
                break
    return DataMatrix(values, mask, tuple(f"c{j}" for j in range(p)))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
