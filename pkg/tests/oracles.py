"""Independent reference implementations used as test oracles.

Nothing here imports estimator internals: densities come from
scipy.stats/mpmath, maximizations are grid + golden-section, conditional
moments come from Monte-Carlo importance sampling on the latent
representation, and the Gaussian-mixture EM is the textbook one.
"""

from __future__ import annotations

import math

import mpmath as mp
import numpy as np
from scipy.stats import norm

mp.mp.dps = 40


def mp_sn_logpdf(x, mu, sigma2, lam) -> float:
    """High-precision log density via mpmath erfc."""
    s = mp.sqrt(sigma2)
    z = (mp.mpf(x) - mu) / s
    phi = mp.exp(-z * z / 2) / mp.sqrt(2 * mp.pi)
    Phi = mp.erfc(-lam * z / mp.sqrt(2)) / 2
    return float(mp.log(2) - mp.log(s) + mp.log(phi) + mp.log(Phi))


def sn_pdf_direct(x, mu, sigma2, lam):
    """Plain-arithmetic density 2/sigma phi(z) Phi(lam z) (float precision)."""
    s = math.sqrt(sigma2)
    z = (np.asarray(x, dtype=float) - mu) / s
    return 2.0 / s * norm.pdf(z) * norm.cdf(lam * z)


def golden_max(f, a, b, tol=1e-12):
    """Golden-section maximizer on [a, b] for a unimodal f."""
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    while abs(b - a) > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def grid_then_golden_max(f, a, b, n_grid=401, tol=1e-12):
    """Global 1-D maximizer: coarse scan to bracket, then golden-section."""
    grid = np.linspace(a, b, n_grid)
    vals = np.array([f(g) for g in grid])
    k = int(np.argmax(vals))
    lo = grid[max(0, k - 1)]
    hi = grid[min(n_grid - 1, k + 1)]
    x = golden_max(f, lo, hi, tol)
    return x if f(x) >= vals[k] else float(grid[k])


def estep_mc_oracle(x, weights, mu, sigma2, lam, n_draws, rng):
    """Monte-Carlo estimate of the E-step quantities at one observation.

    Importance sampling on the latent representation: tau is drawn from its
    prior half-normal and weighted by the Gaussian likelihood of x given
    tau.  Returns (alpha, beta, gamma, se_alpha, se_beta, se_gamma).
    """
    p = len(weights)
    m_hat = np.empty(p)
    se_m = np.empty(p)
    beta_hat = np.empty(p)
    se_beta = np.empty(p)
    gamma_hat = np.empty(p)
    se_gamma = np.empty(p)
    for i in range(p):
        s = math.sqrt(sigma2[i])
        delta = lam[i] / math.hypot(1.0, lam[i])
        sd = s * math.sqrt(1.0 - delta * delta)
        tau = np.abs(rng.normal(0.0, s, size=n_draws))
        w = norm.pdf(x, loc=mu[i] + delta * tau, scale=sd)
        wsum = w.sum()
        m_hat[i] = wsum / n_draws
        se_m[i] = w.std(ddof=1) / math.sqrt(n_draws)
        b = float(np.dot(w, tau) / wsum)
        g = float(np.dot(w, tau * tau) / wsum)
        beta_hat[i] = b
        gamma_hat[i] = g
        se_beta[i] = math.sqrt(float(np.sum((w * (tau - b)) ** 2))) / wsum
        se_gamma[i] = math.sqrt(float(np.sum((w * (tau * tau - g)) ** 2))) / wsum

    total = float(np.dot(weights, m_hat))
    alpha_hat = weights * m_hat / total
    # delta-method SE for the normalized ratio (independent components)
    se_alpha = np.empty(p)
    for i in range(p):
        grads = -alpha_hat[i] * weights / total
        grads[i] += weights[i] / total
        se_alpha[i] = math.sqrt(float(np.sum((grads * se_m) ** 2)))
    return alpha_hat, beta_hat, gamma_hat, se_alpha, se_beta, se_gamma


def textbook_gmm_em(data, w, mu, s2, n_iter):
    """Standard normal-mixture EM; returns the list of per-iteration
    (weights, means, variances) after each update."""
    data = np.asarray(data, dtype=float)
    w, mu, s2 = np.array(w, dtype=float), np.array(mu, dtype=float), np.array(s2, dtype=float)
    out = []
    for _ in range(n_iter):
        dens = np.array(
            [wk * norm.pdf(data, m, math.sqrt(v)) for wk, m, v in zip(w, mu, s2)]
        ).T
        g = dens / dens.sum(axis=1, keepdims=True)
        nk = g.sum(axis=0)
        w = nk / data.size
        mu = (g * data[:, None]).sum(axis=0) / nk
        s2 = (g * (data[:, None] - mu[None, :]) ** 2).sum(axis=0) / nk
        out.append((w.copy(), mu.copy(), s2.copy()))
    return out


def quadrature_cdf(mu, sigma2, lam, xs):
    """CDF of one skew-normal component at sorted points xs, by composite
    trapezoid integration of the direct density on a dense grid."""
    s = math.sqrt(sigma2)
    lo = mu - 12.0 * s
    hi = max(xs.max(), mu + 12.0 * s)
    grid = np.linspace(lo, hi, 40001)
    pdf = sn_pdf_direct(grid, mu, sigma2, lam)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    return np.interp(xs, grid, cdf)


def mixture_pdf_direct(x, weights, mu, sigma2, lam):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for w, m, v, l in zip(weights, mu, sigma2, lam):
        out += w * sn_pdf_direct(x, m, v, l)
    return out


def mixture_quadrature_quantiles(weights, mu, sigma2, lam, probs):
    """Quantiles of a skew-normal mixture from a dense trapezoid CDF."""
    mu = np.asarray(mu, dtype=float)
    s = np.sqrt(np.asarray(sigma2, dtype=float))
    lo = float(np.min(mu - 12.0 * s))
    hi = float(np.max(mu + 12.0 * s))
    grid = np.linspace(lo, hi, 80001)
    pdf = mixture_pdf_direct(grid, weights, mu, sigma2, lam)
    cdf = np.concatenate([[0.0], np.cumsum((pdf[1:] + pdf[:-1]) * 0.5 * np.diff(grid))])
    cdf /= cdf[-1]
    # strictly increasing segments only, for interpolation
    return np.interp(probs, cdf, grid)
