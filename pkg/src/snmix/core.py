"""Skew-normal mixture primitives.

Densities, log-likelihoods and penalty functions for finite mixtures of
skew-normal components.  A component SN(mu, sigma2, lambda) has density

    f(x) = (2/sigma) * phi((x-mu)/sigma) * Phi(lambda*(x-mu)/sigma)

with phi/Phi the standard normal pdf/cdf.  Everything here is evaluated in
the log domain so that large |lambda| (arguments of Phi down to -300 and
beyond) never underflows.

All values are immutable after construction and safe to share across
threads; every function is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
from scipy.special import log_ndtr, logsumexp, ndtr

__all__ = [
    "SnComponent",
    "SnMixture",
    "ScalePenalty",
    "ShapePenalty",
    "AzzaliniShapePenalty",
    "PenaltySpec",
    "sn_logpdf",
    "mixture_logpdf",
    "loglik",
    "penalty_sigma",
    "penalty_lambda",
    "penalty_lambda_azzalini",
    "penalized_loglik",
    "tuning",
    "delta_of_lambda",
    "inverse_mills",
]

_LOG_2 = math.log(2.0)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class SnComponent:
    """One skew-normal component: location mu, squared scale sigma2, shape lam."""

    mu: float
    sigma2: float
    lam: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.mu) and np.isfinite(self.sigma2) and np.isfinite(self.lam)):
            raise ValueError("component parameters must be finite")
        if self.sigma2 <= 0.0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    @property
    def delta(self) -> float:
        return delta_of_lambda(self.lam)


@dataclass(frozen=True, init=False)
class SnMixture:
    """Finite skew-normal mixture: weights plus components.

    Doubles as the mixing distribution over parameter triples: its CDF at a
    point theta is the total weight of components with all three parameters
    <= theta (see :func:`snmix.metrics.mixing_cdf`).
    """

    weights: tuple[float, ...]
    components: tuple[SnComponent, ...]

    def __init__(self, weights: Sequence[float], components: Sequence[SnComponent]):
        weights = tuple(float(w) for w in weights)
        components = tuple(components)
        if len(components) == 0:
            raise ValueError("mixture needs at least one component")
        if len(weights) != len(components):
            raise ValueError("weights and components must have equal length")
        if any(w < 0.0 or not np.isfinite(w) for w in weights):
            raise ValueError("weights must be finite and non-negative")
        if abs(sum(weights) - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {sum(weights)!r}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "components", components)

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def mu(self) -> np.ndarray:
        return np.array([c.mu for c in self.components])

    @property
    def sigma2(self) -> np.ndarray:
        return np.array([c.sigma2 for c in self.components])

    @property
    def lam(self) -> np.ndarray:
        return np.array([c.lam for c in self.components])

    @property
    def weights_array(self) -> np.ndarray:
        return np.array(self.weights)

    @staticmethod
    def from_arrays(
        weights: Sequence[float],
        mu: Sequence[float],
        sigma2: Sequence[float],
        lam: Sequence[float],
    ) -> "SnMixture":
        comps = [SnComponent(float(m), float(s), float(l)) for m, s, l in zip(mu, sigma2, lam)]
        return SnMixture(weights, comps)


@dataclass(frozen=True)
class ScalePenalty:
    """Inverse-gamma-type penalty on a component variance.

    p(sigma2) = -a_n * (s_n2/sigma2 + log(sigma2/s_n2) - 1)

    Zero at sigma2 == s_n2, tends to -inf both as sigma2 -> 0 and
    sigma2 -> inf, and is scale invariant when s_n2 is the sample variance
    of the data being fitted.
    """

    a_n: float
    s_n2: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.a_n) and self.a_n >= 0.0):
            raise ValueError("a_n must be finite and >= 0")
        if not (np.isfinite(self.s_n2) and self.s_n2 > 0.0):
            raise ValueError("s_n2 must be finite and > 0")


@dataclass(frozen=True)
class ShapePenalty:
    """Shape penalty p(lambda) = -b_n * (lambda^2 - log(1 + lambda^2)).

    Flat near zero, quadratic in the tails, so it barely moves moderate
    shape estimates while pulling divergent ones back to finite values.
    """

    b_n: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.b_n) and self.b_n >= 0.0):
            raise ValueError("b_n must be finite and >= 0")


@dataclass(frozen=True)
class AzzaliniShapePenalty:
    """Azzalini-Arellano-Valle shape penalty p(lambda) = -c1*log(1 + c2*lambda^2)."""

    c1: float = 0.876
    c2: float = 0.856

    def __post_init__(self) -> None:
        if not (np.isfinite(self.c1) and self.c1 >= 0.0):
            raise ValueError("c1 must be finite and >= 0")
        if not (np.isfinite(self.c2) and self.c2 > 0.0):
            raise ValueError("c2 must be finite and > 0")


@dataclass(frozen=True)
class PenaltySpec:
    """Which penalties apply to the variances and shapes of a fit.

    ``PenaltySpec()`` leaves both off, in which case the penalized
    log-likelihood equals the plain log-likelihood and maximizing it is
    ordinary (possibly degenerate) ML estimation.
    """

    sigma: ScalePenalty | None = None
    lam: ShapePenalty | AzzaliniShapePenalty | None = None

    @staticmethod
    def recommended(data: ArrayLike, c_a: float = 1.0, c_b: float = 0.05) -> "PenaltySpec":
        """Default data-driven penalties: a_n = c_a/n, b_n = c_b/log(n),
        s_n2 = sample variance of ``data`` (divisor n-1)."""
        data = np.asarray(data, dtype=float)
        n = data.size
        a_n, b_n = tuning(n, c_a, c_b)
        s_n2 = float(np.var(data, ddof=1))
        if not s_n2 > 0.0:
            raise ValueError("data variance must be positive to tune the scale penalty")
        return PenaltySpec(sigma=ScalePenalty(a_n, s_n2), lam=ShapePenalty(b_n))


def tuning(n: int, c_a: float = 1.0, c_b: float = 0.05) -> tuple[float, float]:
    """Penalty sizes for sample size n: a_n = c_a/n, b_n = c_b/log(n)."""
    if n < 2:
        raise ValueError("need n >= 2 so that log(n) > 0")
    return c_a / n, c_b / math.log(n)


def delta_of_lambda(lam: ArrayLike) -> ArrayLike:
    """Map shape lambda to delta = lambda/sqrt(1+lambda^2) in (-1, 1)."""
    lam = np.asarray(lam, dtype=float)
    out = lam / np.hypot(1.0, lam)
    return float(out) if out.ndim == 0 else out


def lambda_of_delta(delta: ArrayLike) -> ArrayLike:
    """Inverse of :func:`delta_of_lambda` on (-1, 1)."""
    delta = np.asarray(delta, dtype=float)
    out = delta / np.sqrt((1.0 - delta) * (1.0 + delta))
    return float(out) if out.ndim == 0 else out


def _log_phi(z: np.ndarray) -> np.ndarray:
    return -0.5 * z * z - _HALF_LOG_2PI


def inverse_mills(t: ArrayLike) -> ArrayLike:
    """Stable phi(t)/Phi(t).

    The direct pdf/cdf ratio is used for t >= -5.  Below that, Phi(t)
    underflows long before the ratio does, so the ratio is formed as
    exp(log phi - log Phi) with the erfc-based asymptotic log-CDF; the two
    branches agree to well under 1e-10 at the seam.
    """
    t = np.asarray(t, dtype=float)
    scalar = t.ndim == 0
    t = np.atleast_1d(t)
    out = np.empty_like(t)
    lo = t < -5.0
    if np.any(~lo):
        tt = t[~lo]
        out[~lo] = np.exp(_log_phi(tt)) / ndtr(tt)
    if np.any(lo):
        tt = t[lo]
        out[lo] = np.exp(_log_phi(tt) - log_ndtr(tt))
    return float(out[0]) if scalar else out


def _validate_theta(theta: SnComponent) -> None:
    if not isinstance(theta, SnComponent):
        raise TypeError("theta must be an SnComponent")
    if not (np.isfinite(theta.sigma2) and theta.sigma2 > 0.0):
        raise ValueError("theta.sigma2 must be positive and finite")
    if not (np.isfinite(theta.mu) and np.isfinite(theta.lam)):
        raise ValueError("theta.mu and theta.lam must be finite")


def sn_logpdf(x: ArrayLike, theta: SnComponent) -> ArrayLike:
    """Log density of SN(mu, sigma2, lambda) at x.

    log f = log 2 - (1/2) log sigma2 + log phi(z) + log Phi(lambda*z),
    z = (x - mu)/sigma.  Finite for every finite x.
    """
    _validate_theta(theta)
    x = np.asarray(x, dtype=float)
    sigma = math.sqrt(theta.sigma2)
    z = (x - theta.mu) / sigma
    out = _LOG_2 - math.log(sigma) + _log_phi(z) + log_ndtr(theta.lam * z)
    return float(out) if out.ndim == 0 else out


def _component_logpdf_matrix(x: np.ndarray, psi: SnMixture) -> np.ndarray:
    """(n, p) matrix of per-component log densities."""
    x = np.asarray(x, dtype=float).ravel()
    cols = [sn_logpdf(x, c) for c in psi.components]
    return np.column_stack([np.atleast_1d(c) for c in cols])


def mixture_logpdf(x: ArrayLike, psi: SnMixture) -> ArrayLike:
    """Log of the mixture density sum_k pi_k f_k(x), via shifted-max summation.

    Zero-weight components are dropped before the log-sum so they cannot
    inject -inf terms.
    """
    if not isinstance(psi, SnMixture):
        raise TypeError("psi must be an SnMixture")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    xv = np.atleast_1d(x)
    w = psi.weights_array
    keep = w > 0.0
    logf = _component_logpdf_matrix(xv, psi)[:, keep]
    out = logsumexp(logf + np.log(w[keep]), axis=1)
    return float(out[0]) if scalar else out.reshape(x.shape)


def loglik(data: ArrayLike, psi: SnMixture) -> float:
    """Sum of mixture log densities over the sample."""
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("data must be non-empty")
    return float(np.sum(mixture_logpdf(data, psi)))


def penalty_sigma(sigma2: ArrayLike, a_n: float, s_n2: float) -> ArrayLike:
    """Variance penalty -a_n*(s_n2/sigma2 + log(sigma2/s_n2) - 1); always <= 0."""
    sigma2 = np.asarray(sigma2, dtype=float)
    if np.any(sigma2 <= 0.0):
        raise ValueError("sigma2 must be positive")
    if s_n2 <= 0.0:
        raise ValueError("s_n2 must be positive")
    if a_n < 0.0:
        raise ValueError("a_n must be >= 0")
    r = sigma2 / s_n2
    out = -a_n * (1.0 / r + np.log(r) - 1.0)
    return float(out) if out.ndim == 0 else out


def penalty_lambda(lam: ArrayLike, b_n: float) -> ArrayLike:
    """Shape penalty -b_n*(lambda^2 - log(1+lambda^2)); zero only at lambda=0."""
    if b_n < 0.0:
        raise ValueError("b_n must be >= 0")
    lam = np.asarray(lam, dtype=float)
    l2 = lam * lam
    out = -b_n * (l2 - np.log1p(l2))
    return float(out) if out.ndim == 0 else out


def penalty_lambda_azzalini(lam: ArrayLike, c1: float = 0.876, c2: float = 0.856) -> ArrayLike:
    """Azzalini-type shape penalty -c1*log(1 + c2*lambda^2)."""
    if c1 < 0.0 or c2 <= 0.0:
        raise ValueError("require c1 >= 0 and c2 > 0")
    lam = np.asarray(lam, dtype=float)
    out = -c1 * np.log1p(c2 * lam * lam)
    return float(out) if out.ndim == 0 else out


def penalty_value(psi: SnMixture, pen: PenaltySpec) -> float:
    """Total penalty sum_k p(sigma2_k) + sum_k p(lambda_k) for a mixture."""
    total = 0.0
    if pen.sigma is not None:
        total += float(np.sum(penalty_sigma(psi.sigma2, pen.sigma.a_n, pen.sigma.s_n2)))
    if isinstance(pen.lam, ShapePenalty):
        total += float(np.sum(penalty_lambda(psi.lam, pen.lam.b_n)))
    elif isinstance(pen.lam, AzzaliniShapePenalty):
        total += float(np.sum(penalty_lambda_azzalini(psi.lam, pen.lam.c1, pen.lam.c2)))
    return total


def penalized_loglik(data: ArrayLike, psi: SnMixture, pen: PenaltySpec) -> float:
    """Log-likelihood plus the configured penalties.

    With both penalties off this is exactly :func:`loglik`.
    """
    return loglik(data, psi) + penalty_value(psi, pen)
