"""Penalized ECM / ECME estimation for skew-normal mixtures.

The fitter alternates an E-step with conditional maximization steps:

  1. mixing weights,
  2. locations,
  3. variances (closed form, penalty-aware),
  4. shapes -- either a per-component cubic solve on delta = delta(lambda)
     (ECM) or a joint coordinate-wise maximization of the actual penalized
     log-likelihood (ECME, the "CML" variant).

With penalties switched off this is plain (possibly degenerate) maximum
likelihood; the fitter then watches for variance collapse and shape blow-up
and reports them through flags instead of crashing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import log_ndtr, logsumexp, xlogy
from scipy.stats import chi2

from .core import (
    AzzaliniShapePenalty,
    PenaltySpec,
    ShapePenalty,
    SnMixture,
    delta_of_lambda,
    inverse_mills,
    lambda_of_delta,
    penalty_value,
)
from .init import (
    ExplicitStart,
    InitScheme,
    KMeansMoments,
    PerturbedStart,
    TrueValue,
    kmeans_moments_init,
    perturbed_init,
    true_value_init,
)
from .metrics import LAMBDA_DIVERGENT, SIGMA2_DEGENERATE

__all__ = [
    "EStepCache",
    "FitConfig",
    "FitResult",
    "DegenerateComponentError",
    "MEValidityError",
    "e_step",
    "q_function",
    "cm_step_pi",
    "cm_step_mu",
    "cm_step_sigma2",
    "cm_step_lambda",
    "cm_step_lambda_azzalini",
    "cml_step",
    "label_sort",
    "fit",
    "profile_lrt_me",
]

# Hard stops for the unpenalized path so a collapsing run terminates.
_SIGMA2_STOP = 1e-12
_LAMBDA_STOP = 1e6
# Components carrying less total responsibility than this are held fixed
# for the iteration instead of dividing by ~0.
_FREEZE_RESP = 1e-8

_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_LOG_2 = math.log(2.0)


class DegenerateComponentError(RuntimeError):
    """A conditional update lost its component (zero responsibility or
    non-positive variance on the unpenalized path)."""


class MEValidityError(RuntimeError):
    """The shape-shrinkage estimator is undefined with a collapsed variance."""


@dataclass(frozen=True)
class EStepCache:
    """Per-observation conditional expectations, one column per component.

    alpha: posterior component probabilities (rows sum to 1)
    beta:  E[tau | x, component]   (>= 0)
    gamma: E[tau^2 | x, component] (>= beta^2)
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True)
class FitConfig:
    """Settings for one fit.

    ``init`` accepts an initialization scheme from :mod:`snmix.initstart`
    or a plain :class:`SnMixture` used verbatim.  ``fixed_lambda`` pins
    selected shapes: entry k holds the fixed value for component k or
    ``None`` to leave it free.  Components pinned exactly at 0 update their
    variance with the plain Gaussian M-step, so a fully pinned-at-zero,
    unpenalized fit walks the textbook normal-mixture EM trajectory.
    """

    init: Union[InitScheme, SnMixture]
    algorithm: str = "ecm"
    penalty: PenaltySpec = PenaltySpec()
    max_iter: int = 2000
    rel_tol: float = 1e-6
    fixed_lambda: tuple[float | None, ...] | None = None
    keep_param_trace: bool = False
    check_q_ascent: bool = False

    def __post_init__(self) -> None:
        if self.algorithm not in ("ecm", "ecme"):
            raise ValueError("algorithm must be 'ecm' or 'ecme'")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.rel_tol > 0.0:
            raise ValueError("rel_tol must be positive")


@dataclass(frozen=True)
class FitResult:
    """Fitted mixture (components ordered by location) plus diagnostics."""

    psi: SnMixture
    objective_trace: np.ndarray
    iterations: int
    converged: bool
    degenerate_sigma: bool
    divergent_lambda: bool
    had_frozen_component: bool = False
    param_trace: tuple[SnMixture, ...] | None = None

    @property
    def objective(self) -> float:
        return float(self.objective_trace[-1])


# ---------------------------------------------------------------------------
# E-step


def _component_logpdf(data: np.ndarray, mu, sigma2, lam) -> np.ndarray:
    sigma = np.sqrt(sigma2)
    z = (data[:, None] - mu[None, :]) / sigma[None, :]
    return (
        _LOG_2
        - 0.5 * np.log(sigma2)[None, :]
        - 0.5 * z * z
        - _HALF_LOG_2PI
        + log_ndtr(lam[None, :] * z)
    )


def _e_step_impl(data, weights, mu, sigma2, lam):
    logf = _component_logpdf(data, mu, sigma2, lam)
    with np.errstate(divide="ignore"):
        logw = np.where(weights > 0.0, np.log(np.maximum(weights, 1e-300)), -np.inf)
    la = logf + logw[None, :]
    alpha = np.exp(la - logsumexp(la, axis=1, keepdims=True))

    delta = delta_of_lambda(lam)
    sigma = np.sqrt(sigma2)
    resid = data[:, None] - mu[None, :]
    mu_tau = delta[None, :] * resid
    sd_tau = sigma * np.sqrt(1.0 - delta * delta)
    mills = inverse_mills(lam[None, :] * resid / sigma[None, :])
    # Truncated-normal moments; tiny negative excursions from cancellation
    # are clipped back into the feasible region (beta >= 0, gamma >= beta^2).
    beta = np.maximum(mu_tau + sd_tau[None, :] * mills, 0.0)
    gamma = mu_tau * mu_tau + (sd_tau * sd_tau)[None, :] + mu_tau * sd_tau[None, :] * mills
    gamma = np.maximum(gamma, beta * beta)
    return alpha, beta, gamma


def e_step(data, psi: SnMixture) -> EStepCache:
    """Posterior responsibilities and latent truncated-normal moments."""
    if not isinstance(psi, SnMixture):
        raise TypeError("psi must be an SnMixture")
    data = np.asarray(data, dtype=float).ravel()
    if data.size == 0:
        raise ValueError("data must be non-empty")
    alpha, beta, gamma = _e_step_impl(
        data, psi.weights_array, psi.mu, psi.sigma2, psi.lam
    )
    return EStepCache(alpha=alpha, beta=beta, gamma=gamma)


# ---------------------------------------------------------------------------
# Objective pieces


def _q_impl(weights, mu, sigma2, lam, data, alpha, beta, gamma, pen: PenaltySpec) -> float:
    delta = delta_of_lambda(lam)
    one_m_d2 = 1.0 - delta * delta
    resid = data[:, None] - mu[None, :]
    quad = gamma - 2.0 * delta[None, :] * beta * resid + resid * resid
    colsum = alpha.sum(axis=0)
    scale = 1.0 / (2.0 * sigma2 * one_m_d2)
    value = (
        float(np.sum(xlogy(colsum, weights)))
        - float(np.dot(colsum, np.log(sigma2)))
        - 0.5 * float(np.dot(colsum, np.log(one_m_d2)))
        - float(np.sum((alpha * quad) * scale[None, :]))
    )
    psi = SnMixture.from_arrays(weights / np.sum(weights), mu, sigma2, lam)
    return value + penalty_value(psi, pen)


def q_function(psi: SnMixture, data, cache: EStepCache, pen: PenaltySpec) -> float:
    """Expected complete-data penalized log-likelihood given the cache.

    Additive constants that do not involve the parameters are dropped, so
    only differences of this quantity are meaningful.
    """
    data = np.asarray(data, dtype=float).ravel()
    if cache.alpha.shape != (data.size, psi.p):
        raise ValueError(
            f"cache shape {cache.alpha.shape} does not match (n={data.size}, p={psi.p})"
        )
    return _q_impl(
        psi.weights_array, psi.mu, psi.sigma2, psi.lam,
        data, cache.alpha, cache.beta, cache.gamma, pen,
    )


# ---------------------------------------------------------------------------
# CM steps


def cm_step_pi(cache: EStepCache) -> np.ndarray:
    """Weight update: column means of alpha, renormalized to sum exactly 1."""
    a = cache.alpha.sum(axis=0)
    return a / a.sum()


def cm_step_mu(data, cache: EStepCache, lambda_current) -> np.ndarray:
    """Location update (sum a*x - delta * sum a*b) / sum a."""
    data = np.asarray(data, dtype=float).ravel()
    lam = np.asarray(lambda_current, dtype=float)
    a_sum = cache.alpha.sum(axis=0)
    if np.any(a_sum <= 0.0):
        raise DegenerateComponentError("component with zero total responsibility")
    delta = delta_of_lambda(lam)
    num = cache.alpha.T @ data - delta * np.sum(cache.alpha * cache.beta, axis=0)
    return num / a_sum


def _lambda_step_stats(data, cache: EStepCache, mu_new):
    resid = data[:, None] - np.asarray(mu_new, dtype=float)[None, :]
    a = cache.alpha
    s0 = np.sum(a * cache.gamma, axis=0)
    s1 = np.sum(a * cache.beta * resid, axis=0)
    s2 = np.sum(a * resid * resid, axis=0)
    return a.sum(axis=0), s0, s1, s2


def cm_step_sigma2(data, cache: EStepCache, mu_new, lambda_current, pen: PenaltySpec) -> np.ndarray:
    """Variance update; the penalty keeps it strictly positive when a_n > 0."""
    data = np.asarray(data, dtype=float).ravel()
    lam = np.asarray(lambda_current, dtype=float)
    a_n = pen.sigma.a_n if pen.sigma is not None else 0.0
    s_n2 = pen.sigma.s_n2 if pen.sigma is not None else 1.0
    a_sum, s0, s1, s2 = _lambda_step_stats(data, cache, mu_new)
    delta = delta_of_lambda(lam)
    one_m_d2 = 1.0 - delta * delta
    num = s0 - 2.0 * delta * s1 + s2 + 2.0 * a_n * one_m_d2 * s_n2
    den = 2.0 * one_m_d2 * (a_n + a_sum)
    out = num / den
    if np.any(out <= 0.0):
        if a_n > 0.0:
            # numerator >= 2 a_n (1-d^2) s_n2 > 0; reaching here means a
            # floating-point anomaly, clamp to keep the run alive
            out = np.maximum(out, 1e-300)
        else:
            raise DegenerateComponentError("variance update collapsed to zero")
    return out


def _shape_block_value(delta, a_sum, s0, s1, s2, sigma2, pen_fn) -> float:
    """Objective restricted to one component's shape, as a function of delta."""
    u = 1.0 - delta * delta
    t = s0 - 2.0 * delta * s1 + s2
    return -0.5 * a_sum * math.log(u) - t / (2.0 * sigma2 * u) + pen_fn(delta)


def _shape_pen_proposed(b_n: float):
    def pen(delta: float) -> float:
        u = 1.0 - delta * delta
        return -b_n * (delta * delta / u + math.log(u))

    return pen


def _shape_pen_azzalini(c1: float, c2: float):
    def pen(delta: float) -> float:
        u = 1.0 - delta * delta
        return -c1 * (math.log(1.0 - (1.0 - c2) * delta * delta) - math.log(u))

    return pen


def _real_cubic_roots(a: float, b: float, c: float, d: float) -> list[float]:
    """Real roots of a*x^3 + b*x^2 + c*x + d, by the depressed-cubic
    closed form (trigonometric branch for three real roots)."""
    scale = max(abs(a), abs(b), abs(c), abs(d))
    if scale == 0.0:
        return []
    if abs(a) <= 1e-14 * scale:
        if abs(b) <= 1e-14 * scale:
            if abs(c) <= 1e-14 * scale:
                return []
            return [-d / c]
        disc = c * c - 4.0 * b * d
        if disc < 0.0:
            return []
        r = math.sqrt(disc)
        return [(-c + r) / (2.0 * b), (-c - r) / (2.0 * b)]
    b1, c1, d1 = b / a, c / a, d / a
    p = c1 - b1 * b1 / 3.0
    q = 2.0 * b1 ** 3 / 27.0 - b1 * c1 / 3.0 + d1
    shift = -b1 / 3.0
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3
    if disc > 0.0:
        s = math.sqrt(disc)
        u = math.copysign(abs(-q / 2.0 + s) ** (1.0 / 3.0), -q / 2.0 + s)
        v = math.copysign(abs(-q / 2.0 - s) ** (1.0 / 3.0), -q / 2.0 - s)
        return [shift + u + v]
    if p == 0.0:
        return [shift + math.copysign(abs(q) ** (1.0 / 3.0), -q)]
    m = 2.0 * math.sqrt(-p / 3.0)
    arg = min(1.0, max(-1.0, 3.0 * q / (p * m)))
    theta = math.acos(arg) / 3.0
    return [shift + m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]


_DELTA_EDGE = 1.0 - 1e-9


def _pick_delta(candidates, a_sum, s0, s1, s2, sigma2, pen_fn) -> float:
    best_d, best_v = None, -math.inf
    for d in candidates:
        v = _shape_block_value(d, a_sum, s0, s1, s2, sigma2, pen_fn)
        if v > best_v:
            best_d, best_v = d, v
    return best_d


def _lambda_update_from_stats(a_sum, s0, s1, s2, sigma2_new, b_n) -> np.ndarray:
    pen_fn = _shape_pen_proposed(b_n)
    out = np.empty(len(sigma2_new))
    for i in range(len(sigma2_new)):
        c3 = -sigma2_new[i] * (2.0 * b_n + a_sum[i])
        c2 = s1[i]
        c1 = -(s0[i] + s2[i] - sigma2_new[i] * a_sum[i])
        c0 = s1[i]
        roots = [r for r in _real_cubic_roots(c3, c2, c1, c0) if -1.0 < r < 1.0]
        if not roots:
            roots = [-_DELTA_EDGE, _DELTA_EDGE]
        d = _pick_delta(roots, a_sum[i], s0[i], s1[i], s2[i], sigma2_new[i], pen_fn)
        out[i] = lambda_of_delta(d)
    return out


def cm_step_lambda(data, cache: EStepCache, mu_new, sigma2_new, pen: PenaltySpec) -> np.ndarray:
    """Shape update for the quadratic-tail penalty (or no penalty, b_n = 0).

    The stationarity condition in delta is a cubic; all real roots inside
    (-1, 1) are computed in closed form and ranked by the restricted
    objective.  Without an interior root the objective is climbing into a
    boundary, so the near-boundary endpoint wins and the resulting lambda
    is large enough to trip the divergence accounting.
    """
    if pen.lam is not None and not isinstance(pen.lam, ShapePenalty):
        raise ValueError("cm_step_lambda handles the quadratic-tail penalty or none")
    b_n = pen.lam.b_n if pen.lam is not None else 0.0
    data = np.asarray(data, dtype=float).ravel()
    sigma2_new = np.asarray(sigma2_new, dtype=float)
    a_sum, s0, s1, s2 = _lambda_step_stats(data, cache, mu_new)
    return _lambda_update_from_stats(a_sum, s0, s1, s2, sigma2_new, b_n)


_AZZ_GRID = np.linspace(-_DELTA_EDGE, _DELTA_EDGE, 513)


def _lambda_update_azzalini_from_stats(a_sum, s0, s1, s2, sigma2_new, c1, c2) -> np.ndarray:
    pen_fn = _shape_pen_azzalini(c1, c2)
    out = np.empty(len(sigma2_new))
    d = _AZZ_GRID
    u = 1.0 - d * d
    shrink_den = 1.0 - (1.0 - c2) * d * d
    for i in range(len(sigma2_new)):
        s2i, a_i = sigma2_new[i], a_sum[i]

        def g(x: float):
            ux = 1.0 - x * x
            shr = a_i - 2.0 * c1 * c2 / (1.0 - (1.0 - c2) * x * x)
            return s2i * x * ux * shr + (1.0 + x * x) * s1[i] - x * (s0[i] + s2[i])

        vals = s2i * d * u * (a_i - 2.0 * c1 * c2 / shrink_den) + (1.0 + d * d) * s1[i] - d * (
            s0[i] + s2[i]
        )
        roots = []
        for k in np.nonzero(np.diff(np.sign(vals)) != 0)[0]:
            roots.append(brentq(g, d[k], d[k + 1], xtol=1e-13))
        if not roots:
            roots = [-_DELTA_EDGE, _DELTA_EDGE]
        best = _pick_delta(roots, a_i, s0[i], s1[i], s2[i], s2i, pen_fn)
        out[i] = lambda_of_delta(best)
    return out


def cm_step_lambda_azzalini(
    data, cache: EStepCache, mu_new, sigma2_new, c1: float, c2: float
) -> np.ndarray:
    """Shape update under the logarithmic (Azzalini-type) penalty.

    The stationarity equation is solved on (-1, 1) by sign-change
    bracketing plus Brent's method; among multiple roots the restricted
    objective decides.
    """
    data = np.asarray(data, dtype=float).ravel()
    sigma2_new = np.asarray(sigma2_new, dtype=float)
    a_sum, s0, s1, s2 = _lambda_step_stats(data, cache, mu_new)
    return _lambda_update_azzalini_from_stats(a_sum, s0, s1, s2, sigma2_new, c1, c2)


# ---------------------------------------------------------------------------
# ECME shape block: maximize the actual penalized log-likelihood


def _penalty_arrays(sigma2: np.ndarray, lam: np.ndarray, pen: PenaltySpec) -> float:
    total = 0.0
    if pen.sigma is not None:
        r = sigma2 / pen.sigma.s_n2
        total -= pen.sigma.a_n * float(np.sum(1.0 / r + np.log(r) - 1.0))
    if isinstance(pen.lam, ShapePenalty):
        l2 = lam * lam
        total -= pen.lam.b_n * float(np.sum(l2 - np.log1p(l2)))
    elif isinstance(pen.lam, AzzaliniShapePenalty):
        total -= pen.lam.c1 * float(np.sum(np.log1p(pen.lam.c2 * lam * lam)))
    return total


def _log_weights(weights: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.where(weights > 0.0, np.log(np.maximum(weights, 1e-300)), -np.inf)


def _pl_impl(data, weights, mu, sigma2, lam, pen: PenaltySpec) -> float:
    logf = _component_logpdf(data, mu, sigma2, lam)
    ll = float(np.sum(logsumexp(logf + _log_weights(weights)[None, :], axis=1)))
    return ll + _penalty_arrays(sigma2, lam, pen)


_ASINH_LIMIT = math.asinh(1e4)


def _max_pl_coordinate(data, weights, mu, sigma2, lam, pen, i) -> float:
    """Best lambda_i with everything else held fixed.

    The search runs on w = asinh(lambda) so the unbounded shape axis gets
    even coverage; a coarse scan brackets the optimum for Brent.
    """

    def value(w: float) -> float:
        lam_try = lam.copy()
        lam_try[i] = math.sinh(w)
        return _pl_impl(data, weights, mu, sigma2, lam_try, pen)

    grid = np.linspace(-_ASINH_LIMIT, _ASINH_LIMIT, 161)
    vals = np.array([value(w) for w in grid])
    k = int(np.argmax(vals))
    lo = grid[max(0, k - 1)]
    hi = grid[min(len(grid) - 1, k + 1)]
    res = minimize_scalar(
        lambda w: -value(w), bounds=(lo, hi), method="bounded",
        options={"xatol": 1e-10},
    )
    w_best = float(res.x) if -res.fun >= vals[k] else float(grid[k])
    return math.sinh(w_best)


def cml_step(
    data,
    psi_partial: SnMixture,
    pen: PenaltySpec,
    rel_tol: float = 1e-6,
    free_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Joint shape update of the ECME variant.

    Maximizes the actual penalized log-likelihood over all (free) shapes
    with weights, locations and variances held fixed, by coordinate sweeps
    until the largest coordinate move falls below ``rel_tol``.
    """
    data = np.asarray(data, dtype=float).ravel()
    weights = psi_partial.weights_array
    mu, sigma2 = psi_partial.mu, psi_partial.sigma2
    lam = psi_partial.lam.copy()
    if free_mask is None:
        free_mask = np.ones(len(lam), dtype=bool)
    for _ in range(50):
        biggest = 0.0
        for i in np.nonzero(free_mask)[0]:
            new = _max_pl_coordinate(data, weights, mu, sigma2, lam, pen, i)
            biggest = max(biggest, abs(new - lam[i]) / (1.0 + abs(lam[i])))
            lam[i] = new
        if biggest < rel_tol or free_mask.sum() <= 1:
            break
    return lam


# ---------------------------------------------------------------------------
# Fit driver


def label_sort(psi: SnMixture) -> SnMixture:
    """Permute components (with weights) into ascending location order."""
    order = np.argsort(psi.mu, kind="stable")
    return SnMixture(
        [psi.weights[k] for k in order], [psi.components[k] for k in order]
    )


def _resolve_init(data: np.ndarray, p: int, init) -> SnMixture:
    if isinstance(init, SnMixture):
        psi0 = init
    elif isinstance(init, KMeansMoments):
        psi0 = kmeans_moments_init(data, p, init.seed).psi0
    elif isinstance(init, TrueValue):
        psi0 = true_value_init(init.psi).psi0
    elif isinstance(init, ExplicitStart):
        psi0 = init.psi
    elif isinstance(init, PerturbedStart):
        psi0 = perturbed_init(init.psi, p, init.seed).psi0
    else:
        raise TypeError(f"unsupported init scheme: {init!r}")
    if psi0.p != p:
        raise ValueError(f"initial mixture has {psi0.p} components, expected {p}")
    return psi0


def _gaussian_sigma_update(a_sum, s2_resid, a_n, s_n2):
    """Plain-normal variance M-step used for components whose shape is
    pinned at exactly zero (c.f. the complete-data family without the
    latent half-normal)."""
    return (s2_resid + 2.0 * a_n * s_n2) / (a_sum + 2.0 * a_n)


def fit(data, p: int, cfg: FitConfig) -> FitResult:
    """Run penalized ECM or ECME from the configured start.

    Iterates until the relative objective change drops below
    ``cfg.rel_tol`` or ``cfg.max_iter`` is hit.  On the unpenalized path a
    collapsing variance or exploding shape stops the run early; in every
    case the result carries degeneracy flags computed from the final
    parameters rather than raising.
    """
    data = np.asarray(data, dtype=float).ravel()
    if p < 1:
        raise ValueError("p must be >= 1")
    if data.size < 3 * p:
        raise ValueError(f"need at least {3 * p} observations to fit {p} components")

    psi0 = _resolve_init(data, p, cfg.init)
    weights = psi0.weights_array.copy()
    mu = psi0.mu.copy()
    sigma2 = psi0.sigma2.copy()
    lam = psi0.lam.copy()

    fixed = np.full(p, np.nan)
    if cfg.fixed_lambda is not None:
        if len(cfg.fixed_lambda) != p:
            raise ValueError("fixed_lambda must have one entry per component")
        for k, v in enumerate(cfg.fixed_lambda):
            if v is not None:
                fixed[k] = float(v)
                lam[k] = float(v)
    fixed_mask = np.isfinite(fixed)
    gaussian_mask = fixed_mask & (fixed == 0.0)

    pen = cfg.penalty
    a_n = pen.sigma.a_n if pen.sigma is not None else 0.0
    s_n2 = pen.sigma.s_n2 if pen.sigma is not None else 1.0
    azzalini = isinstance(pen.lam, AzzaliniShapePenalty)

    trace: list[float] = []
    params_log: list[SnMixture] = []
    converged = False
    had_frozen = False
    iterations = 0

    # One density pass per iteration: the pass at the current parameters
    # yields both the objective (appended to the trace) and the posterior
    # quantities driving the next parameter update.
    for it in range(cfg.max_iter + 1):
        sigma = np.sqrt(sigma2)
        resid = data[:, None] - mu[None, :]
        z = resid / sigma[None, :]
        t = lam[None, :] * z
        lnd = log_ndtr(t)
        logf = (_LOG_2 - _HALF_LOG_2PI) - 0.5 * np.log(sigma2)[None, :] - 0.5 * z * z + lnd
        la = logf + _log_weights(weights)[None, :]
        la_max = la.max(axis=1, keepdims=True)
        lse = la_max + np.log(np.exp(la - la_max).sum(axis=1, keepdims=True))
        pl = float(lse.sum()) + _penalty_arrays(sigma2, lam, pen)
        if not np.isfinite(pl):
            if not trace:
                trace.append(pl)
            break
        trace.append(pl)
        if cfg.keep_param_trace:
            params_log.append(SnMixture.from_arrays(weights, mu, sigma2, lam))
        if len(trace) >= 2 and abs(trace[-1] - trace[-2]) / (abs(trace[-2]) + 1.0) < cfg.rel_tol:
            converged = True
            break
        if it == cfg.max_iter:
            break

        alpha = np.exp(la - lse)
        delta_cur = delta_of_lambda(lam)
        sd_tau = sigma * np.sqrt(1.0 - delta_cur * delta_cur)
        mu_tau = delta_cur[None, :] * resid
        # phi(t)/Phi(t), reusing the log-CDF from the density pass
        mills = np.exp(-0.5 * t * t - _HALF_LOG_2PI - lnd)
        beta = np.maximum(mu_tau + sd_tau[None, :] * mills, 0.0)
        gamma = mu_tau * mu_tau + (sd_tau * sd_tau)[None, :] + mu_tau * sd_tau[None, :] * mills
        gamma = np.maximum(gamma, beta * beta)
        cache = EStepCache(alpha, beta, gamma)

        a_sum = alpha.sum(axis=0)
        frozen = a_sum < _FREEZE_RESP
        had_frozen = had_frozen or bool(frozen.any())
        live = ~frozen

        if cfg.check_q_ascent:
            q_prev = _q_impl(weights, mu, sigma2, lam, data, alpha, beta, gamma, pen)

        weights = a_sum / a_sum.sum()
        if cfg.check_q_ascent:
            q_prev = _check_q(q_prev, weights, mu, sigma2, lam, data, cache, pen, "pi")

        mu_new = mu.copy()
        if live.any():
            num = alpha.T @ data - delta_cur * (alpha * beta).sum(axis=0)
            mu_new[live] = (num / np.maximum(a_sum, 1e-300))[live]
        mu = mu_new
        if cfg.check_q_ascent:
            q_prev = _check_q(q_prev, weights, mu, sigma2, lam, data, cache, pen, "mu")

        resid_new = data[:, None] - mu[None, :]
        s0 = (alpha * gamma).sum(axis=0)
        s1 = (alpha * beta * resid_new).sum(axis=0)
        s2 = (alpha * resid_new * resid_new).sum(axis=0)
        one_m_d2 = 1.0 - delta_cur * delta_cur
        sig_new = sigma2.copy()
        general = live & ~gaussian_mask
        if general.any():
            num = s0 - 2.0 * delta_cur * s1 + s2 + 2.0 * a_n * one_m_d2 * s_n2
            den = 2.0 * one_m_d2 * (a_n + np.maximum(a_sum, 1e-300))
            sig_new[general] = (num / den)[general]
        gz = live & gaussian_mask
        if gz.any():
            sig_new[gz] = _gaussian_sigma_update(a_sum[gz], s2[gz], a_n, s_n2)
        if np.any(sig_new <= 0.0):
            sigma2 = np.maximum(sig_new, 1e-300)
            iterations = it + 1
            break
        sigma2 = sig_new
        if cfg.check_q_ascent and not gaussian_mask.any():
            q_prev = _check_q(q_prev, weights, mu, sigma2, lam, data, cache, pen, "sigma2")

        lam_free = live & ~fixed_mask
        if lam_free.any():
            if cfg.algorithm == "ecm":
                if azzalini:
                    lam_all = _lambda_update_azzalini_from_stats(
                        a_sum, s0, s1, s2, sigma2, pen.lam.c1, pen.lam.c2
                    )
                else:
                    b_n = pen.lam.b_n if pen.lam is not None else 0.0
                    lam_all = _lambda_update_from_stats(a_sum, s0, s1, s2, sigma2, b_n)
                lam = np.where(lam_free, lam_all, lam)
                if cfg.check_q_ascent and not gaussian_mask.any():
                    q_prev = _check_q(
                        q_prev, weights, mu, sigma2, lam, data, cache, pen, "lambda"
                    )
            else:
                psi_partial = SnMixture.from_arrays(weights, mu, sigma2, lam)
                lam = cml_step(data, psi_partial, pen, cfg.rel_tol, free_mask=lam_free)

        iterations = it + 1

        if (
            np.min(sigma2) < _SIGMA2_STOP
            or np.max(np.abs(lam)) > _LAMBDA_STOP
            or not np.all(np.isfinite(mu))
        ):
            break

    psi = label_sort(SnMixture.from_arrays(weights, mu, sigma2, lam))
    return FitResult(
        psi=psi,
        objective_trace=np.array(trace),
        iterations=iterations,
        converged=converged,
        degenerate_sigma=bool(np.min(sigma2) < SIGMA2_DEGENERATE),
        divergent_lambda=bool(np.max(np.abs(lam)) > LAMBDA_DIVERGENT),
        had_frozen_component=had_frozen,
        param_trace=tuple(params_log) if cfg.keep_param_trace else None,
    )


def _check_q(q_prev, weights, mu, sigma2, lam, data, cache, pen, step) -> float:
    q_new = _q_impl(weights, mu, sigma2, lam, data, cache.alpha, cache.beta, cache.gamma, pen)
    slack = 1e-9 * (1.0 + abs(q_prev))
    if q_new < q_prev - slack:
        raise AssertionError(
            f"conditional step '{step}' decreased the surrogate: {q_prev} -> {q_new}"
        )
    return q_new


# ---------------------------------------------------------------------------
# Modified estimator: profile-LRT shrinkage of extreme shapes


def profile_lrt_me(
    data,
    mle_fit: FitResult,
    level: float = 0.05,
    flag_threshold: float = 30.0,
    stat_tol: float = 1e-3,
) -> np.ndarray:
    """Shrink runaway shape estimates back to the non-rejection boundary.

    Components with |lambda| >= 30 are counted toward the degrees of
    freedom nu; their shapes are rescaled jointly as t * lambda_hat with a
    single t in [0, 1], bisected until twice the profile log-likelihood
    drop hits the chi-square(nu) quantile at ``level`` (within
    ``stat_tol``).  That is the farthest point on the proportional path
    that a profile likelihood-ratio test does not reject.  Unflagged
    shapes pass through unchanged; with nu = 0 the input shapes are
    returned as-is.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must be in (0, 1)")
    if mle_fit.degenerate_sigma:
        raise MEValidityError(
            "profile LRT shrinkage is undefined when a variance estimate collapsed"
        )
    data = np.asarray(data, dtype=float).ravel()
    lam_hat = mle_fit.psi.lam
    flagged = np.abs(lam_hat) >= flag_threshold
    nu = int(flagged.sum())
    if nu == 0:
        return lam_hat.copy()

    quantile = float(chi2.ppf(1.0 - level, df=nu))
    ll_hat = mle_fit.objective
    p = mle_fit.psi.p
    base_psi = mle_fit.psi

    def profile_ll(t: float) -> float:
        lam_t = np.where(flagged, t * lam_hat, lam_hat)
        start = SnMixture.from_arrays(
            base_psi.weights_array, base_psi.mu, base_psi.sigma2, lam_t
        )
        cfg = FitConfig(
            init=start,
            algorithm="ecm",
            penalty=PenaltySpec(),
            fixed_lambda=tuple(
                float(lam_t[k]) if flagged[k] else None for k in range(p)
            ),
        )
        return fit(data, p, cfg).objective

    def stat(t: float) -> float:
        return max(0.0, 2.0 * (ll_hat - profile_ll(t)))

    if stat(0.0) <= quantile:
        t_star = 0.0
    else:
        lo, hi = 0.0, 1.0  # stat(lo) > quantile >= stat(hi)
        t_star = 1.0
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            s = stat(mid)
            if s <= quantile:
                hi = mid
            else:
                lo = mid
            if abs(s - quantile) < stat_tol or hi - lo < 1e-9:
                t_star = hi
                break
        else:
            t_star = hi
    return np.where(flagged, t_star * lam_hat, lam_hat)
