"""Starting values for the EM engine.

Three schemes: k-means clustering followed by per-cluster method-of-moments
inversion, a verbatim "known truth" start, and a jittered start that spreads
p >= p0 components over a p0-component template (for fitting with an
over-specified order).

Every emitted start respects sane-value clamps: variances at least 1e-6 and
|shape| at most 50, so the first E-step never sees a degenerate component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .core import SnMixture
from .sampler import child_rng

__all__ = [
    "InitReport",
    "KMeansMoments",
    "TrueValue",
    "ExplicitStart",
    "PerturbedStart",
    "InitScheme",
    "kmeans_moments_init",
    "true_value_init",
    "perturbed_init",
]

MIN_SIGMA2 = 1e-6
MAX_ABS_LAMBDA = 50.0

# Largest |skewness| the skew-normal family can produce; moment inversion
# clamps at 99% of it.
SKEWNESS_SUP = math.sqrt(2.0) * (4.0 - math.pi) / (math.pi - 2.0) ** 1.5


@dataclass(frozen=True)
class InitReport:
    psi0: SnMixture
    scheme: str
    seed: int


@dataclass(frozen=True)
class KMeansMoments:
    seed: int = 0


@dataclass(frozen=True)
class TrueValue:
    psi: SnMixture


@dataclass(frozen=True)
class ExplicitStart:
    psi: SnMixture


@dataclass(frozen=True)
class PerturbedStart:
    psi: SnMixture
    seed: int = 0


InitScheme = Union[KMeansMoments, TrueValue, ExplicitStart, PerturbedStart]


def _kmeans_1d(data: np.ndarray, p: int, rng: np.random.Generator, max_iter: int = 100):
    """Lloyd's algorithm with k-means++ seeding; returns integer labels."""
    n = data.size
    centers = np.empty(p)
    centers[0] = data[rng.integers(n)]
    for k in range(1, p):
        d2 = np.min((data[:, None] - centers[None, :k]) ** 2, axis=1)
        total = d2.sum()
        if total <= 0.0:
            centers[k] = data[rng.integers(n)]
            continue
        centers[k] = data[rng.choice(n, p=d2 / total)]
    labels = np.argmin(np.abs(data[:, None] - centers[None, :]), axis=1)
    for _ in range(max_iter):
        for k in range(p):
            sel = labels == k
            if sel.any():
                centers[k] = data[sel].mean()
        new_labels = np.argmin(np.abs(data[:, None] - centers[None, :]), axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels


def _moments_to_sn(m: float, v: float, g: float):
    """Invert (mean, variance, skewness) to (mu, sigma2, lambda).

    |g| is clamped below the family's skewness supremum so the inversion
    always lands strictly inside the parameter space.
    """
    g = float(np.clip(g, -0.99 * SKEWNESS_SUP, 0.99 * SKEWNESS_SUP))
    b = math.sqrt(2.0 / math.pi)
    s = 2.0 * g / (4.0 - math.pi)
    r = math.copysign(abs(s) ** (1.0 / 3.0), s)
    c = r / math.sqrt(1.0 + r * r)  # = delta * sqrt(2/pi)
    delta = c / b
    delta = float(np.clip(delta, -0.999, 0.999))
    lam = float(np.clip(delta / math.sqrt(1.0 - delta * delta), -MAX_ABS_LAMBDA, MAX_ABS_LAMBDA))
    delta = lam / math.hypot(1.0, lam)
    sigma2 = max(v / (1.0 - 2.0 * delta * delta / math.pi), MIN_SIGMA2)
    mu = m - math.sqrt(sigma2) * delta * b
    return mu, sigma2, lam


def kmeans_moments_init(data, p: int, seed: int) -> InitReport:
    """Cluster with k-means, then moment-match a skew normal per cluster."""
    data = np.asarray(data, dtype=float).ravel()
    n = data.size
    if n < 3 * p:
        raise ValueError(f"need at least {3 * p} observations for {p} clusters")

    global_var = max(float(np.var(data)), MIN_SIGMA2)
    labels = None
    for attempt in range(10):
        rng = child_rng(seed, 613, attempt)
        cand = _kmeans_1d(data, p, rng)
        if all((cand == k).sum() >= 1 for k in range(p)):
            labels = cand
            break
    if labels is None:
        # stubborn empty cluster: split the largest one at its median
        labels = cand
        for k in range(p):
            if (labels == k).sum() == 0:
                big = int(np.bincount(labels, minlength=p).argmax())
                sel = np.nonzero(labels == big)[0]
                half = sel[data[sel] >= np.median(data[sel])]
                labels[half] = k

    weights, mus, s2s, lams = [], [], [], []
    for k in range(p):
        x = data[labels == k]
        weights.append(x.size / n)
        m = float(x.mean())
        v = float(x.var()) if x.size >= 2 else global_var
        if v <= 0.0:
            v = global_var
        g = float(np.mean((x - m) ** 3) / v ** 1.5) if x.size >= 3 else 0.0
        mu, s2, lam = _moments_to_sn(m, v, g)
        mus.append(mu)
        s2s.append(s2)
        lams.append(lam)

    order = np.argsort(mus, kind="stable")
    psi0 = SnMixture.from_arrays(
        np.asarray(weights)[order] / np.sum(weights),
        np.asarray(mus)[order],
        np.asarray(s2s)[order],
        np.asarray(lams)[order],
    )
    return InitReport(psi0=psi0, scheme="kmeans-moments", seed=seed)


def true_value_init(psi_true: SnMixture) -> InitReport:
    """Use a known mixture verbatim (location-sorted, weights renormalized)."""
    w = psi_true.weights_array
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights too far from summing to 1")
    w = w / w.sum()
    order = np.argsort(psi_true.mu, kind="stable")
    psi0 = SnMixture.from_arrays(
        w[order],
        psi_true.mu[order],
        np.maximum(psi_true.sigma2[order], MIN_SIGMA2),
        np.clip(psi_true.lam[order], -MAX_ABS_LAMBDA, MAX_ABS_LAMBDA),
    )
    return InitReport(psi0=psi0, scheme="true-value", seed=0)


def perturbed_init(psi_true: SnMixture, p: int, seed: int) -> InitReport:
    """Spread p components over a p0-component template.

    Template components (sorted by location) are assigned round-robin, so
    parent j receives omega_j of the p slots.  Each slot copies its parent's
    variance and shape, jitters the location by N(0, 0.1^2) and takes weight
    pi_j / omega_j; the weights therefore sum to 1 by construction.
    """
    p0 = psi_true.p
    if p < p0:
        raise ValueError(f"p={p} must be at least the template order {p0}")
    rng = child_rng(seed, 977)
    order = np.argsort(psi_true.mu, kind="stable")
    mu0 = psi_true.mu[order]
    s20 = psi_true.sigma2[order]
    lam0 = psi_true.lam[order]
    w0 = psi_true.weights_array[order]

    parents = np.array([i % p0 for i in range(p)])
    omega = np.bincount(parents, minlength=p0)
    mus = mu0[parents] + rng.normal(0.0, 0.1, size=p)
    weights = w0[parents] / omega[parents]
    weights = weights / weights.sum()
    s2s = np.maximum(s20[parents], MIN_SIGMA2)
    lams = np.clip(lam0[parents], -MAX_ABS_LAMBDA, MAX_ABS_LAMBDA)

    order_new = np.argsort(mus, kind="stable")
    psi0 = SnMixture.from_arrays(
        weights[order_new], mus[order_new], s2s[order_new], lams[order_new]
    )
    return InitReport(psi0=psi0, scheme="perturbed", seed=seed)
