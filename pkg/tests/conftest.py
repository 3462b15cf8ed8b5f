import numpy as np
import pytest

from snmix import SnMixture


@pytest.fixture(scope="session")
def model_i() -> SnMixture:
    return SnMixture.from_arrays([0.5, 0.5], [-2.0, 2.0], [1.0, 2.0], [2.0, 1.0])


@pytest.fixture(scope="session")
def model_ii() -> SnMixture:
    return SnMixture.from_arrays([0.5, 0.5], [-1.0, 1.5], [2.0, 2.0], [1.0, -1.0])


@pytest.fixture(scope="session")
def faithful() -> np.ndarray:
    from snmix.datasets import faithful_eruptions

    return faithful_eruptions()


def random_mixture(rng: np.random.Generator, p: int | None = None,
                   lam_scale: float = 2.0) -> SnMixture:
    """Moderate random mixture for property tests."""
    if p is None:
        p = int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(p))
    return SnMixture.from_arrays(
        w,
        rng.normal(0.0, 2.5, p),
        rng.uniform(0.25, 4.0, p),
        rng.normal(0.0, lam_scale, p),
    )
