"""Closed-form posteriors for the static and random-walk models.

These assume the binomial part of the poll variance is negligible (or, for
``rw_marginal_loglik``, replaced by its plug-in value) and serve as test
oracles for the sampler and as quick standalone estimators.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


class DegeneratePosteriorError(ValueError):
    pass


class IllConditionedError(np.linalg.LinAlgError):
    def __init__(self, message: str, condition: float):
        super().__init__(f"{message} (condition estimate {condition:.3g})")
        self.condition = condition


@dataclass(frozen=True)
class GaussianPosterior:
    mean: float
    variance: float

    def __post_init__(self):
        if not self.variance > 0:
            raise DegeneratePosteriorError(f"posterior variance {self.variance} must be > 0")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class MarginalCov:
    sigma: np.ndarray


def static_alpha_posterior(ys: Sequence[float], v: float, tau: float,
                           mu_alpha: float, sigma_alpha: float) -> GaussianPosterior:
    ys = np.asarray(ys, dtype=float)
    if ys.size < 1:
        raise ValueError("need at least one poll")
    if not tau > 0:
        raise DegeneratePosteriorError("tau must be > 0")
    if not sigma_alpha > 0:
        raise ValueError("sigma_alpha must be > 0")
    n = ys.size
    data_prec = n / tau ** 2
    prior_prec = sigma_alpha ** -2
    prec = data_prec + prior_prec
    mean = (data_prec * np.mean(ys - v) + prior_prec * mu_alpha) / prec
    return GaussianPosterior(float(mean), float(1.0 / prec))


def single_poll_weight(t: float, tau: float, gamma: float, sigma_alpha: float) -> tuple[float, float]:
    """Weight on the observed error ``y - v`` and the posterior precision."""
    var = tau ** 2 + t * gamma ** 2
    if not var > 0:
        raise ValueError("need tau > 0 or t * gamma > 0")
    if not sigma_alpha > 0:
        raise ValueError("sigma_alpha must be > 0")
    lam = 1.0 / var + sigma_alpha ** -2
    return (1.0 / var) / lam, lam


def rw_marginal_cov(ts: Sequence[float], tau: float, gamma: float) -> MarginalCov:
    ts = np.asarray(ts, dtype=float)
    if np.any(ts < 0):
        raise ValueError("poll days must be >= 0")
    sigma = gamma ** 2 * np.minimum.outer(ts, ts) + tau ** 2 * np.eye(ts.size)
    return MarginalCov(sigma)


def _cho(sigma: np.ndarray):
    scale = float(np.mean(np.diag(sigma))) or 1.0
    for eps in JITTER_LADDER:
        try:
            return linalg.cho_factor(sigma + eps * scale * np.eye(len(sigma)), lower=True)
        except linalg.LinAlgError:
            continue
    raise IllConditionedError("covariance is not positive definite", float(np.linalg.cond(sigma)))


def rw_alpha_weights(ts: Sequence[float], tau: float, gamma: float) -> np.ndarray:
    """Weights on each observed error in the flat-prior posterior mean."""
    sigma = rw_marginal_cov(ts, tau, gamma).sigma
    s1 = linalg.cho_solve(_cho(sigma), np.ones(len(sigma)))
    return s1 / s1.sum()


def rw_alpha_posterior_flat(ys, ts, v: float, tau: float, gamma: float) -> GaussianPosterior:
    ys = np.asarray(ys, dtype=float)
    sigma = rw_marginal_cov(ts, tau, gamma).sigma
    s1 = linalg.cho_solve(_cho(sigma), np.ones(ys.size))
    info = float(s1.sum())
    return GaussianPosterior(float((ys - v) @ s1) / info, 1.0 / info)


def rw_alpha_posterior(ys, ts, v: float, tau: float, gamma: float,
                       mu_alpha: float, sigma_alpha: float) -> GaussianPosterior:
    """As ``rw_alpha_posterior_flat`` but under an N(mu_alpha, sigma_alpha^2) prior."""
    flat = rw_alpha_posterior_flat(ys, ts, v, tau, gamma)
    prec = 1.0 / flat.variance + sigma_alpha ** -2
    mean = (flat.mean / flat.variance + mu_alpha * sigma_alpha ** -2) / prec
    return GaussianPosterior(mean, 1.0 / prec)


def rw_marginal_loglik(ys, ts, v: float, alpha: float, tau: float, gamma: float,
                       ns: Optional[Sequence[float]] = None, plug_in: bool = False) -> float:
    """Dense multivariate-normal log-density of the polls with the path integrated out."""
    ys = np.asarray(ys, dtype=float)
    sigma = rw_marginal_cov(ts, tau, gamma).sigma
    if plug_in:
        if ns is None:
            raise ValueError("plug-in variance needs sample sizes")
        sigma = sigma + np.diag(ys * (1 - ys) / np.asarray(ns, dtype=float))
    c, low = _cho(sigma)
    resid = ys - (v + alpha)
    z = linalg.solve_triangular(c, resid, lower=True)
    logdet = 2.0 * np.log(np.diag(c)).sum()
    return float(-0.5 * (ys.size * math.log(2 * math.pi) + logdet + z @ z))


def rw_latent_conditional(ys, ts, v: float, alpha: float, tau: float, gamma: float,
                          length: int, ns: Optional[Sequence[float]] = None):
    """Mean and covariance of (theta_1..theta_length) given alpha and the polls.

    Dense Gaussian conditioning; binomial variance enters as its plug-in value
    when ``ns`` is given.
    """
    ys = np.asarray(ys, dtype=float)
    ts = np.asarray(ts, dtype=int)
    days = np.arange(1, length + 1)
    prior_cov = gamma ** 2 * np.minimum.outer(days, days)
    noise = np.full(ys.size, tau ** 2)
    if ns is not None:
        noise = noise + ys * (1 - ys) / np.asarray(ns, dtype=float)
    H = (ts[:, None] == days[None, :]).astype(float)
    S = H @ prior_cov @ H.T + np.diag(noise)
    K = linalg.solve(S, H @ prior_cov, assume_a="pos").T
    mean = v + K @ (ys - v - alpha)
    cov = prior_cov - K @ H @ prior_cov
    return mean, 0.5 * (cov + cov.T)
