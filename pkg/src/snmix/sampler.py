"""Reproducible sampling from skew-normal components and mixtures.

Draws use the latent two-stage representation: with delta = delta(lambda),

    tau ~ half-normal(sigma2)            (a truncated normal on [0, inf))
    x | tau ~ N(mu + delta*tau, (1 - delta^2) * sigma2)

whose marginal is SN(mu, sigma2, lambda).  Generators are numpy PCG64
streams; a handle is single-owner, so parallel users should each derive
their own via :func:`child_rng`, which is order-independent in the child
index.
"""

from __future__ import annotations

import numpy as np

from .core import SnComponent, SnMixture, delta_of_lambda

__all__ = [
    "make_rng",
    "child_rng",
    "child_seed_int",
    "sample_half_normal",
    "sample_sn",
    "sample_mixture",
]


def make_rng(seed: int) -> np.random.Generator:
    """Fresh generator for a 64-bit seed; same seed, same stream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def child_rng(master_seed: int, *index: int) -> np.random.Generator:
    """Independent stream keyed by (master_seed, *index).

    Streams for distinct keys are statistically independent and do not
    depend on the order in which they are created.
    """
    entropy = (int(master_seed),) + tuple(int(i) for i in index)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def child_seed_int(master_seed: int, *index: int) -> int:
    """64-bit integer seed derived from (master_seed, *index)."""
    entropy = (int(master_seed),) + tuple(int(i) for i in index)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def sample_half_normal(
    sigma: float, rng: np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """|N(0, sigma^2)| draws; truncation at the mode needs no rejection."""
    if not sigma > 0.0:
        raise ValueError("sigma must be positive")
    return np.abs(rng.normal(0.0, sigma, size=size))


def sample_sn(
    theta: SnComponent, rng: np.random.Generator, size: int | None = None
) -> float | np.ndarray:
    """Draws from SN(mu, sigma2, lambda) via the latent half-normal."""
    if not (np.isfinite(theta.sigma2) and theta.sigma2 > 0.0):
        raise ValueError("theta.sigma2 must be positive")
    sigma = np.sqrt(theta.sigma2)
    delta = delta_of_lambda(theta.lam)
    tau = sample_half_normal(sigma, rng, size=size)
    sd = sigma * np.sqrt(1.0 - delta * delta)
    return rng.normal(theta.mu + delta * tau, sd)


def sample_mixture(psi: SnMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """n i.i.d. draws: one categorical component pick per observation,
    then a skew-normal draw from the picked component."""
    if not isinstance(psi, SnMixture):
        raise TypeError("psi must be an SnMixture")
    if n <= 0:
        raise ValueError("n must be positive")
    z = rng.choice(psi.p, size=n, p=psi.weights_array)
    tau = np.abs(rng.normal(0.0, 1.0, size=n))
    eps = rng.normal(0.0, 1.0, size=n)
    sigma = np.sqrt(psi.sigma2)[z]
    delta = delta_of_lambda(psi.lam)[z]
    mu = psi.mu[z]
    return mu + delta * sigma * tau + sigma * np.sqrt(1.0 - delta * delta) * eps
