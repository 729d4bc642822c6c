"""Adaptive Metropolis-within-Gibbs sampler for the three poll models.

Per-contest parameters are conditionally independent given the
hyperparameters, so each scalar update proposes for every contest at once
and accepts or rejects contest by contest.

For the random-walk model the latent paths are handled in blocks: under the
plug-in likelihood (binomial variance evaluated at the observed share) the
model is linear-Gaussian, so alpha and the path can be integrated out or drawn
exactly by forward-filtering backward-sampling. In exact-likelihood mode those
draws serve as proposals and are corrected by the ratio of exact to plug-in
likelihoods.
"""
from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from typing import Callable, Optional

import numpy as np

from ..domain import PollArrays, PollDataset
from ..models import (
    GAMMA_FLOOR,
    DegenerateLikelihoodError,
    Family,
    ModelSpec,
    ParamState,
    halfnorm_logpdf,
    log_likelihood,
    log_prior,
    loglik_by_contest,
    norm_logpdf,
    walk_logprior_by_contest,
)
from . import kernels
from .result import FitResult

log = logging.getLogger(__name__)

HALFNORM_MEDIAN = 0.6744897501960817


class SamplerError(RuntimeError):
    pass


class SamplerInitError(SamplerError):
    pass


class SamplerStalledError(SamplerError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class SamplerConfig:
    chains: int = 4
    warmup_iters: int = 1000
    sampling_iters: int = 1000
    seed: int = 20221108
    target_accept_scalar: float = 0.44
    adapt_window: int = 50
    reparameterize: bool = True
    keep_latent: bool = True
    # random-walk model: collapsed (alpha, path)-marginal moves for tau, gamma
    # and the alpha hyperparameters plus joint block draws; off leaves plain
    # Gibbs on path | alpha, alpha | path and conditional variance updates
    joint_block: bool = True
    workers: int = 1

    def __post_init__(self):
        for k in ("chains", "warmup_iters", "sampling_iters", "adapt_window", "workers"):
            if getattr(self, k) < 1:
                raise ValueError(f"{k} must be positive")
        if self.warmup_iters < self.adapt_window:
            raise ValueError("warmup_iters must be >= adapt_window")
        if not 0 < self.target_accept_scalar < 1:
            raise ValueError("target_accept_scalar must be in (0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


def chain_seed(seed: int, chain: int) -> np.random.SeedSequence:
    """Per-chain stream: the chain index is mixed in as the spawn key."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(chain),))


def update_scalar(name: str, current: float, log_target: Callable[[float], float],
                  scale: float, rng: np.random.Generator, log_scale: bool = False):
    """One Gaussian random-walk Metropolis step for a single scalar.

    With ``log_scale`` the walk runs on log(x) and the Jacobian x'/x enters
    the acceptance ratio. Returns ``(value, accepted)``.
    """
    lp0 = log_target(current)
    if not math.isfinite(lp0):
        raise SamplerError(f"{name}: log target not finite at current value")
    step = scale * rng.standard_normal()
    if log_scale:
        prop = current * math.exp(step)
        jac = step
    else:
        prop = current + step
        jac = 0.0
    lp1 = log_target(prop)
    if not math.isfinite(lp1):
        return current, False
    if math.log(rng.uniform()) < lp1 - lp0 + jac:
        return prop, True
    return current, False


class _Adapter:
    """Robbins-Monro scale adaptation of a group of per-contest proposals."""

    def __init__(self, size: int, scale: float, target: float):
        self.log_scale = np.full(size, math.log(scale))
        self.target = target
        self.acc = np.zeros(size)
        self.tries = 0
        self.windows = 0
        self.last_rate = np.full(size, np.nan)

    @property
    def scale(self) -> np.ndarray:
        return np.exp(self.log_scale)

    def record(self, accepted: np.ndarray):
        self.acc += accepted
        self.tries += 1

    def adapt(self, rate_only: bool = False):
        if self.tries == 0:
            return
        rate = self.acc / self.tries
        self.last_rate = rate
        if not rate_only:
            self.windows += 1
            self.log_scale += 2.0 * (rate - self.target) / math.sqrt(self.windows)
        self.acc[:] = 0
        self.tries = 0


class _Chain:
    def __init__(self, spec: ModelSpec, arr: PollArrays, cfg: SamplerConfig, chain: int):
        self.spec = spec
        self.fam = spec.family
        self.arr = arr
        self.cfg = cfg
        self.rng = np.random.default_rng(chain_seed(cfg.seed, chain))
        self.R = arr.n_contests
        self.D = arr.max_day if spec.has_walk else 0
        self.lengths = arr.max_t.copy() if spec.has_walk else np.zeros(self.R, dtype=np.int64)
        self.starts = np.searchsorted(arr.contest, np.arange(self.R + 1)).astype(np.int64)
        self.mask = np.arange(self.D)[None, :] < self.lengths[:, None]
        self.plug = spec.plug_in
        self._fam_code = {Family.STATIC: 0, Family.LINEAR: 1, Family.RANDOM_WALK: 2}[self.fam]
        self._zeros = np.zeros(self.R)
        self._empty_theta = np.zeros((self.R, 0))
        self.clamp_warmup = 0
        self.clamp_sampling = 0
        self.state = self._initial_state()
        target = cfg.target_accept_scalar
        R = self.R
        self.adapters = {
            "alpha": _Adapter(R, 0.01, target),
            "tau": _Adapter(R, 0.3, target),
            "beta": _Adapter(R, 0.002, target),
            "shear": _Adapter(R, 0.002, target),
            "gamma": _Adapter(R, 0.5, target),
            "sigma_alpha": _Adapter(1, 0.3, target),
            "sigma_tau": _Adapter(1, 0.3, target),
            "sigma_gamma": _Adapter(1, 0.3, target),
            "sigma_beta": _Adapter(1, 0.3, target),
            "sigma_alpha_c": _Adapter(1, 0.3, target),
            "sigma_alpha_nc": _Adapter(1, 0.3, target),
            "sigma_beta_nc": _Adapter(1, 0.3, target),
            "sigma_tau_nc": _Adapter(1, 0.3, target),
            "sigma_gamma_nc": _Adapter(1, 0.3, target),
            "mu_alpha_shift": _Adapter(1, 0.005, target),
            "mu_beta_shift": _Adapter(1, 0.001, target),
        }
        self.block_acc = np.zeros(R)
        self.block_tries = 0
        lp = self.log_target()
        if not math.isfinite(lp):
            raise SamplerInitError("target density is not finite at the initial state")

    # ------------------------------------------------------------ state

    def _initial_state(self) -> ParamState:
        spec, arr, R, rng = self.spec, self.arr, self.R, self.rng
        fx = spec.fixed
        hp = spec.hyperpriors
        resid = arr.y - arr.v[arr.contest]
        counts = np.bincount(arr.contest, minlength=R)
        sums = np.bincount(arr.contest, weights=resid, minlength=R)
        alpha = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
        alpha = alpha + 0.005 * rng.standard_normal(R)
        jitter = lambda: np.exp(rng.uniform(-0.3, 0.3, R))
        tau = np.full(R, fx["tau"]) if "tau" in fx else 0.02 * jitter()
        st = ParamState(
            alpha=alpha,
            tau=tau,
            mu_alpha=fx.get("mu_alpha", 0.0),
            sigma_alpha=fx.get("sigma_alpha", HALFNORM_MEDIAN * hp.sigma_alpha_scale),
            sigma_tau=fx.get("sigma_tau", HALFNORM_MEDIAN * hp.sigma_tau_scale),
        )
        if spec.has_beta:
            st.beta = np.full(R, fx.get("beta", 0.0))
            st.mu_beta = fx.get("mu_beta", 0.0)
            st.sigma_beta = fx.get("sigma_beta", HALFNORM_MEDIAN * hp.sigma_beta_scale)
        if spec.has_walk:
            st.gamma = np.full(R, fx["gamma"]) if "gamma" in fx else 0.005 * jitter()
            st.sigma_gamma = fx.get("sigma_gamma", HALFNORM_MEDIAN * hp.sigma_gamma_scale)
            ymean = np.where(counts > 0, np.bincount(arr.contest, weights=arr.y, minlength=R)
                             / np.maximum(counts, 1), arr.v)
            L = np.maximum(self.lengths, 1)[:, None]
            days = np.arange(1, self.D + 1)[None, :]
            theta = arr.v[:, None] + (days / L) * (ymean - arr.v)[:, None]
            st.theta = np.where(self.mask, theta, np.nan)
            st.lengths = self.lengths.copy()
        return st

    def log_target(self, st: Optional[ParamState] = None) -> float:
        st = self.state if st is None else st
        lp = log_prior(self.spec, st, self.arr.v)
        if not math.isfinite(lp):
            return lp
        terms = loglik_by_contest(self.spec, self.arr, st)
        return lp + float(terms.sum())

    def _lls(self, st: ParamState):
        """(exact, plug-in) per-contest log-likelihoods and the clamp count."""
        arr = self.arr
        ex = np.empty(self.R)
        pl = np.empty(self.R)
        beta = st.beta if st.beta is not None else self._zeros
        theta = st.theta if st.theta is not None else self._empty_theta
        clamped = kernels.contest_loglik(self._fam_code, arr.v, st.alpha, beta, st.tau, theta,
                                         self.starts, arr.t, arr.y, arr.n, ex, pl)
        if np.isnan(ex).any():
            raise DegenerateLikelihoodError("zero total variance for a poll (tau = 0 and p in {0, 1})")
        return ex, pl, clamped

    def _ll(self, st: ParamState, plug_in: Optional[bool] = None) -> np.ndarray:
        ex, pl, _ = self._lls(st)
        plug = self.plug if plug_in is None else plug_in
        return pl if plug else ex

    def _with(self, **changes) -> ParamState:
        st = self.state
        out = ParamState(**{**st.__dict__, **changes})
        return out

    def _mh_accept(self, log_ratio: np.ndarray) -> np.ndarray:
        u = self.rng.uniform(size=log_ratio.shape)
        ok = np.isfinite(log_ratio)
        return ok & (np.log(u) < np.where(ok, log_ratio, -np.inf))

    # -------------------------------------------------------- per-contest MH

    def _alpha_prior(self, alpha):
        st = self.state
        return norm_logpdf(alpha, st.mu_alpha, st.sigma_alpha ** 2)

    def update_alpha(self):
        st = self.state
        ad = self.adapters["alpha"]
        prop = st.alpha + ad.scale * self.rng.standard_normal(self.R)
        if self.spec.has_walk and self.cfg.reparameterize:
            # hold z = theta + alpha fixed and move alpha
            shift = (prop - st.alpha)[:, None]
            theta_p = np.where(self.mask, st.theta - shift, np.nan)
            new = self._with(alpha=prop, theta=theta_p)
            walk0 = walk_logprior_by_contest(st.theta, self.lengths, self.arr.v, self._gamma_eff())
            walk1 = walk_logprior_by_contest(theta_p, self.lengths, self.arr.v, self._gamma_eff())
            lr = (self._ll(new) + self._alpha_prior(prop) + walk1) - (
                self._ll(st) + self._alpha_prior(st.alpha) + walk0)
            acc = self._mh_accept(lr)
            st.alpha = np.where(acc, prop, st.alpha)
            st.theta = np.where(acc[:, None], theta_p, st.theta)
        else:
            new = self._with(alpha=prop)
            lr = (self._ll(new) + self._alpha_prior(prop)) - (self._ll(st) + self._alpha_prior(st.alpha))
            acc = self._mh_accept(lr)
            st.alpha = np.where(acc, prop, st.alpha)
        ad.record(acc)

    def update_tau(self):
        st = self.state
        ad = self.adapters["tau"]
        step = ad.scale * self.rng.standard_normal(self.R)
        prop = st.tau * np.exp(step)
        new = self._with(tau=prop)
        lr = (self._ll(new) + halfnorm_logpdf(prop, st.sigma_tau)) - (
            self._ll(st) + halfnorm_logpdf(st.tau, st.sigma_tau)) + step
        acc = self._mh_accept(lr)
        st.tau = np.where(acc, prop, st.tau)
        ad.record(acc)

    def _beta_prior(self, beta):
        st = self.state
        return norm_logpdf(beta, st.mu_beta, st.sigma_beta ** 2)

    def update_beta(self):
        st = self.state
        ad = self.adapters["beta"]
        prop = st.beta + ad.scale * self.rng.standard_normal(self.R)
        new = self._with(beta=prop)
        lr = (self._ll(new) + self._beta_prior(prop)) - (self._ll(st) + self._beta_prior(st.beta))
        acc = self._mh_accept(lr)
        st.beta = np.where(acc, prop, st.beta)
        ad.record(acc)

    def update_shear(self):
        """Move beta while holding the logit mean fixed at the contest's mean poll day."""
        st = self.state
        ad = self.adapters["shear"]
        if not hasattr(self, "_tbar"):
            counts = np.bincount(self.arr.contest, minlength=self.R)
            tsum = np.bincount(self.arr.contest, weights=self.arr.t, minlength=self.R)
            self._tbar = np.where(counts > 0, tsum / np.maximum(counts, 1), 0.0)
        delta = ad.scale * self.rng.standard_normal(self.R)
        b1 = st.beta + delta
        a1 = st.alpha - delta * self._tbar
        new = self._with(alpha=a1, beta=b1)
        lr = (self._ll(new) + self._beta_prior(b1) + self._alpha_prior(a1)) - (
            self._ll(st) + self._beta_prior(st.beta) + self._alpha_prior(st.alpha))
        acc = self._mh_accept(lr)
        st.alpha = np.where(acc, a1, st.alpha)
        st.beta = np.where(acc, b1, st.beta)
        ad.record(acc)

    # ------------------------------------------------------ random-walk blocks

    def _gamma_eff(self, gamma=None):
        g = self.state.gamma if gamma is None else gamma
        return np.maximum(g, GAMMA_FLOOR)

    def _kernel(self, tau, gamma, draw: bool, alpha=None, mu=None, s2=None):
        """Filter statistics (a, b, k) and, with ``draw``, a fresh (alpha, path).

        With ``alpha`` given the path is drawn conditionally on it; otherwise
        alpha is drawn first from its conditional under N(mu, s2).
        """
        st, arr = self.state, self.arr
        R, D = self.R, self.D
        mu = st.mu_alpha if mu is None else mu
        s2 = st.sigma_alpha ** 2 if s2 is None else s2
        za = self.rng.standard_normal(R) if draw else self._zeros
        zt = self.rng.standard_normal((R, D)) if draw else self._empty_theta
        alpha_out = st.alpha.copy() if alpha is None else alpha.copy()
        theta_out = np.full((R, D), np.nan) if draw else self._empty_theta
        a, b, k = np.empty(R), np.empty(R), np.empty(R)
        bad = kernels.rw_block(
            arr.v, alpha_out, tau, self._gamma_eff(gamma), float(mu), float(s2),
            self.starts, arr.t, arr.y, arr.n, self.lengths,
            alpha is None, draw, za, zt, alpha_out, theta_out, a, b, k,
        )
        if bad >= 0:
            raise SamplerError(f"filter failure (non-positive innovation variance) in contest "
                               f"{bad}: tau={tau[bad]:.3g}, gamma={gamma[bad]:.3g}")
        return alpha_out, theta_out, (a, b, k)

    @staticmethod
    def _marginal(stats, mu, s2):
        """Per-contest log-likelihood with alpha integrated under N(mu, s2)."""
        a, b, k = stats
        prec = a + 1.0 / s2
        m = (b + mu / s2) / prec
        return k + 0.5 * prec * m * m - 0.5 * mu * mu / s2 - 0.5 * np.log(s2 * prec)

    def _log_w(self, st: ParamState) -> np.ndarray:
        """log exact / plug-in likelihood ratio per contest; zero in plug-in mode."""
        if self.plug:
            return np.zeros(self.R)
        ex, pl, _ = self._lls(st)
        return ex - pl

    def update_latent(self):
        """Draw every path given alpha (FFBS), corrected in exact mode."""
        st = self.state
        _, theta_p, _ = self._kernel(st.tau, st.gamma, True, alpha=st.alpha)
        self._accept_block(st.alpha, theta_p)

    def update_joint_block(self):
        st = self.state
        alpha_p, theta_p, _ = self._kernel(st.tau, st.gamma, True)
        self._accept_block(alpha_p, theta_p)

    def _accept_block(self, alpha_p, theta_p):
        st = self.state
        if self.plug:
            acc = np.ones(self.R, dtype=bool)
        else:
            lr = self._log_w(self._with(alpha=alpha_p, theta=theta_p)) - self._log_w(st)
            acc = self._mh_accept(lr)
        st.alpha = np.where(acc, alpha_p, st.alpha)
        st.theta = np.where(acc[:, None], theta_p, st.theta)
        self.block_acc += acc
        self.block_tries += 1

    def update_collapsed(self, name: str, stats):
        """Log-scale move on tau or gamma with alpha and the path integrated out.

        The alpha/path pair is redrawn from its plug-in conditional at the
        proposed value, so the move is a joint Metropolis-Hastings step.
        Returns the filter statistics at the post-move values.
        """
        st = self.state
        ad = self.adapters[name]
        cur = getattr(st, name)
        scale = st.sigma_tau if name == "tau" else st.sigma_gamma
        step = ad.scale * self.rng.standard_normal(self.R)
        prop = cur * np.exp(step)
        args = {"tau": st.tau, "gamma": st.gamma, name: prop}
        alpha_p, theta_p, stats1 = self._kernel(args["tau"], args["gamma"], True)
        mu, s2 = st.mu_alpha, st.sigma_alpha ** 2
        lr = (self._marginal(stats1, mu, s2) - self._marginal(stats, mu, s2)
              + halfnorm_logpdf(prop, scale) - halfnorm_logpdf(cur, scale) + step)
        if not self.plug:
            new = self._with(alpha=alpha_p, theta=theta_p, **{name: prop})
            lr = lr + self._log_w(new) - self._log_w(st)
        acc = self._mh_accept(lr)
        setattr(st, name, np.where(acc, prop, cur))
        st.alpha = np.where(acc, alpha_p, st.alpha)
        st.theta = np.where(acc[:, None], theta_p, st.theta)
        ad.record(acc)
        return tuple(np.where(acc, x1, x0) for x0, x1 in zip(stats, stats1))

    def _accept_all(self, lr: float, alpha_p, theta_p) -> bool:
        """Accept or reject a move that redrew every contest's block."""
        if not self.plug:
            lr += float(np.sum(self._log_w(self._with(alpha=alpha_p, theta=theta_p))
                               - self._log_w(self.state)))
        if math.isfinite(lr) and math.log(self.rng.uniform()) < lr:
            self.state.alpha = alpha_p
            self.state.theta = theta_p
            return True
        return False

    def update_mu_alpha_collapsed(self, stats):
        """Independence proposal for mu_alpha from its alpha-marginal conditional."""
        st, hp = self.state, self.spec.hyperpriors
        a, b, _ = stats
        s2 = st.sigma_alpha ** 2
        den = a * s2 + 1.0
        P = 1.0 / hp.mu_alpha_sd ** 2 + float(np.sum(a / den))
        M = float(np.sum(b / den)) / P
        mu_p = M + self.rng.standard_normal() / math.sqrt(P)
        alpha_p, theta_p, _ = self._kernel(st.tau, st.gamma, True, mu=mu_p, s2=s2)
        if self._accept_all(0.0, alpha_p, theta_p):
            st.mu_alpha = mu_p

    def update_sigma_alpha_collapsed(self, stats):
        st, hp = self.state, self.spec.hyperpriors
        ad = self.adapters["sigma_alpha_c"]
        step = float(ad.scale[0]) * self.rng.standard_normal()
        s0 = st.sigma_alpha
        s1 = s0 * math.exp(step)
        lr = (float(np.sum(self._marginal(stats, st.mu_alpha, s1 * s1) - self._marginal(stats, st.mu_alpha, s0 * s0)))
              + float(halfnorm_logpdf(s1, hp.sigma_alpha_scale) - halfnorm_logpdf(s0, hp.sigma_alpha_scale)) + step)
        acc = False
        if math.isfinite(lr):
            alpha_p, theta_p, _ = self._kernel(st.tau, st.gamma, True, s2=s1 * s1)
            acc = self._accept_all(lr, alpha_p, theta_p)
            if acc:
                st.sigma_alpha = s1
        ad.record(np.array([acc]))

    def update_gamma(self):
        """Conditional log-scale move on gamma given the paths."""
        st = self.state
        ad = self.adapters["gamma"]
        step = ad.scale * self.rng.standard_normal(self.R)
        prop = st.gamma * np.exp(step)
        v = self.arr.v
        lr = (walk_logprior_by_contest(st.theta, self.lengths, v, self._gamma_eff(prop))
              + halfnorm_logpdf(prop, st.sigma_gamma)
              - walk_logprior_by_contest(st.theta, self.lengths, v, self._gamma_eff(st.gamma))
              - halfnorm_logpdf(st.gamma, st.sigma_gamma) + step)
        acc = self._mh_accept(lr)
        st.gamma = np.where(acc, prop, st.gamma)
        ad.record(acc)

    # ---------------------------------------------------------- hyperparams

    def _hyper_mh(self, name: str, log_target: Callable[[float], float]):
        ad = self.adapters[name]
        val, acc = update_scalar(name, getattr(self.state, name), log_target,
                                 float(ad.scale[0]), self.rng, log_scale=True)
        setattr(self.state, name, val)
        ad.record(np.array([acc]))

    def update_hypers(self):
        st, spec, hp = self.state, self.spec, self.spec.hyperpriors
        if spec.is_free("mu_alpha"):
            prec = 1.0 / hp.mu_alpha_sd ** 2 + self.R / st.sigma_alpha ** 2
            mean = (st.alpha.sum() / st.sigma_alpha ** 2) / prec
            st.mu_alpha = mean + self.rng.standard_normal() / math.sqrt(prec)
        if spec.is_free("sigma_alpha"):
            self._hyper_mh("sigma_alpha", lambda s: float(
                norm_logpdf(st.alpha, st.mu_alpha, s * s).sum() + halfnorm_logpdf(s, hp.sigma_alpha_scale)))
        if spec.is_free("sigma_tau"):
            self._hyper_mh("sigma_tau", lambda s: float(
                halfnorm_logpdf(st.tau, s).sum() + halfnorm_logpdf(s, hp.sigma_tau_scale)))
        if spec.has_walk and spec.is_free("sigma_gamma"):
            self._hyper_mh("sigma_gamma", lambda s: float(
                halfnorm_logpdf(st.gamma, s).sum() + halfnorm_logpdf(s, hp.sigma_gamma_scale)))
        if spec.has_beta:
            if spec.is_free("mu_beta"):
                prec = 1.0 / hp.mu_beta_sd ** 2 + self.R / st.sigma_beta ** 2
                mean = (st.beta.sum() / st.sigma_beta ** 2) / prec
                st.mu_beta = mean + self.rng.standard_normal() / math.sqrt(prec)
            if spec.is_free("sigma_beta"):
                self._hyper_mh("sigma_beta", lambda s: float(
                    norm_logpdf(st.beta, st.mu_beta, s * s).sum() + halfnorm_logpdf(s, hp.sigma_beta_scale)))

    def update_rescale(self, group: str):
        """Non-centered move: stretch a group's deviations together with its scale.

        The hierarchical density and the Jacobian of the stretch cancel, leaving
        the likelihood and the scale's own prior in the ratio.
        """
        st, hp = self.state, self.spec.hyperpriors
        mu_name, sig_name = f"mu_{group}", f"sigma_{group}"
        ad = self.adapters[sig_name + "_nc"]
        step = float(ad.scale[0]) * self.rng.standard_normal()
        s0 = getattr(st, sig_name)
        s1 = s0 * math.exp(step)
        mu = getattr(st, mu_name)
        x0 = getattr(st, group)
        x1 = mu + (s1 / s0) * (x0 - mu)
        prior_scale = getattr(hp, f"sigma_{group}_scale")
        lr = (float(np.sum(self._ll(self._with(**{group: x1})) - self._ll(st)))
              + float(halfnorm_logpdf(s1, prior_scale) - halfnorm_logpdf(s0, prior_scale)) + step)
        acc = math.isfinite(lr) and math.log(self.rng.uniform()) < lr
        if acc:
            setattr(st, group, x1)
            setattr(st, sig_name, s1)
        ad.record(np.array([acc]))

    def update_shift(self, group: str):
        """Translate a group and its population mean together."""
        st, hp = self.state, self.spec.hyperpriors
        mu_name = f"mu_{group}"
        ad = self.adapters[mu_name + "_shift"]
        delta = float(ad.scale[0]) * self.rng.standard_normal()
        mu0 = getattr(st, mu_name)
        x0 = getattr(st, group)
        sd0 = getattr(hp, f"mu_{group}_sd")
        lr = (float(np.sum(self._ll(self._with(**{group: x0 + delta})) - self._ll(st)))
              + float(norm_logpdf(mu0 + delta, 0.0, sd0 ** 2) - norm_logpdf(mu0, 0.0, sd0 ** 2)))
        acc = math.isfinite(lr) and math.log(self.rng.uniform()) < lr
        if acc:
            setattr(st, group, x0 + delta)
            setattr(st, mu_name, mu0 + delta)
        ad.record(np.array([acc]))

    def update_scale_rescale(self, child: str, stats=None):
        """Stretch a half-normal group (tau or gamma) together with its scale.

        As in ``update_rescale`` the hierarchical density cancels against the
        Jacobian. For the random walk the likelihood ratio is the collapsed one
        and the latent block is redrawn at the proposal.
        """
        st, hp = self.state, self.spec.hyperpriors
        hyper = f"sigma_{child}"
        ad = self.adapters[hyper + "_nc"]
        step = float(ad.scale[0]) * self.rng.standard_normal()
        s0 = getattr(st, hyper)
        s1 = s0 * math.exp(step)
        x1 = getattr(st, child) * (s1 / s0)
        prior = float(halfnorm_logpdf(s1, getattr(hp, hyper + "_scale"))
                      - halfnorm_logpdf(s0, getattr(hp, hyper + "_scale"))) + step
        if stats is None:
            lr = float(np.sum(self._ll(self._with(**{child: x1})) - self._ll(st))) + prior
            acc = math.isfinite(lr) and math.log(self.rng.uniform()) < lr
        else:
            args = {"tau": st.tau, "gamma": st.gamma, child: x1}
            alpha_p, theta_p, stats1 = self._kernel(args["tau"], args["gamma"], True)
            mu, s2 = st.mu_alpha, st.sigma_alpha ** 2
            lr = float(np.sum(self._marginal(stats1, mu, s2) - self._marginal(stats, mu, s2))) + prior
            acc = self._accept_all(lr, alpha_p, theta_p)
            if acc:
                stats = stats1
        if acc:
            setattr(st, child, x1)
            setattr(st, hyper, s1)
        ad.record(np.array([acc]))
        return stats

    # --------------------------------------------------------------- sweep

    def sweep(self):
        spec = self.spec
        st = self.state
        if self.fam is Family.RANDOM_WALK:
            if self.cfg.joint_block:
                stats = self._kernel(st.tau, st.gamma, False)[2]
                if spec.is_free("tau"):
                    stats = self.update_collapsed("tau", stats)
                if spec.is_free("gamma"):
                    stats = self.update_collapsed("gamma", stats)
                for child in ("tau", "gamma"):
                    if spec.is_free(child) and spec.is_free(f"sigma_{child}"):
                        stats = self.update_scale_rescale(child, stats)
                if spec.is_free("sigma_alpha"):
                    self.update_sigma_alpha_collapsed(stats)
                if spec.is_free("mu_alpha"):
                    self.update_mu_alpha_collapsed(stats)
                self.update_joint_block()
            else:
                self.update_latent()
                if spec.is_free("tau"):
                    self.update_tau()
                if spec.is_free("gamma"):
                    self.update_gamma()
            self.update_alpha()
        else:
            self.update_alpha()
            if self.fam is Family.LINEAR and spec.is_free("beta"):
                self.update_beta()
                self.update_shear()
            if spec.is_free("tau"):
                self.update_tau()
                if spec.is_free("sigma_tau"):
                    self.update_scale_rescale("tau")
            for group in ("alpha", "beta") if self.fam is Family.LINEAR else ("alpha",):
                if group == "beta" and not spec.is_free("beta"):
                    continue
                if spec.is_free(f"sigma_{group}"):
                    self.update_rescale(group)
                if spec.is_free(f"mu_{group}"):
                    self.update_shift(group)
        self.update_hypers()

    def count_clamps(self) -> int:
        return int(self._lls(self.state)[2])

    def run(self) -> dict:
        cfg, spec = self.cfg, self.spec
        S = cfg.sampling_iters
        R = self.R
        out = {"alpha": np.empty((S, R)), "tau": np.empty((S, R))}
        hyper = ["mu_alpha", "sigma_alpha"]
        if "tau" not in spec.fixed:
            hyper.append("sigma_tau")
        if spec.has_beta:
            out["beta"] = np.empty((S, R))
            if "beta" not in spec.fixed:
                hyper += ["mu_beta", "sigma_beta"]
        if spec.has_walk:
            out["gamma"] = np.empty((S, R))
            if "gamma" not in spec.fixed:
                hyper.append("sigma_gamma")
            if cfg.keep_latent:
                out["theta"] = np.empty((S, R, self.D))
        for h in hyper:
            out[h] = np.empty(S)

        for it in range(cfg.warmup_iters):
            self.sweep()
            self.clamp_warmup += self.count_clamps()
            if (it + 1) % cfg.adapt_window == 0:
                for ad in self.adapters.values():
                    ad.adapt()
        self._check_stalled()
        for it in range(S):
            self.sweep()
            self.clamp_sampling += self.count_clamps()
            st = self.state
            for k, arr in out.items():
                arr[it] = getattr(st, k)
        rates = {}
        for k, ad in self.adapters.items():
            if ad.tries:
                ad.adapt(rate_only=True)
            if np.any(np.isfinite(ad.last_rate)):
                rates[k] = float(np.nanmean(ad.last_rate))
        if self.block_tries:
            rates["latent_block"] = float(self.block_acc.sum() / (self.block_tries * R))
        out["_meta"] = {
            "clamp_warmup": self.clamp_warmup,
            "clamp_sampling": self.clamp_sampling,
            "acceptance": rates,
        }
        return out

    def _check_stalled(self):
        stalled = {k: 0.0 for k, ad in self.adapters.items()
                   if ad.windows and np.all(ad.last_rate == 0)}
        if stalled:
            raise SamplerStalledError(
                f"every proposal rejected in the final warmup window for: {sorted(stalled)}",
                {"acceptance": stalled, "scales": {k: self.adapters[k].scale.tolist() for k in stalled}},
            )


def _run_chain(spec: ModelSpec, arr: PollArrays, cfg: SamplerConfig, chain: int) -> dict:
    return _Chain(spec, arr, cfg, chain).run()


def fit(spec: ModelSpec, data: PollDataset, config: SamplerConfig = SamplerConfig(),
        window=None) -> FitResult:
    """Draw from the posterior of ``spec`` given ``data``.

    Deterministic for a given (spec, data, config); the worker count only
    affects wall time.
    """
    if not data.contests:
        raise ValueError("dataset has no contests")
    if not data.polls:
        raise ValueError("dataset has no polls")
    arr = data.arrays
    t0 = time.perf_counter()
    chains = range(config.chains)
    if config.workers > 1 and config.chains > 1:
        with ProcessPoolExecutor(max_workers=min(config.workers, config.chains)) as ex:
            outs = list(ex.map(_run_chain, [spec] * config.chains, [arr] * config.chains,
                               [config] * config.chains, chains))
    else:
        outs = [_run_chain(spec, arr, config, c) for c in chains]
    wall = time.perf_counter() - t0
    metas = [o.pop("_meta") for o in outs]
    draws = {k: np.stack([o[k] for o in outs]) for k in outs[0]}
    meta = {
        "clamp_activations": int(sum(m["clamp_sampling"] for m in metas)),
        "clamp_activations_warmup": int(sum(m["clamp_warmup"] for m in metas)),
        "acceptance": [m["acceptance"] for m in metas],
        "wall_time_s": wall,
    }
    return FitResult(
        spec=spec,
        config=config,
        contest_ids=[c.contest_id for c in data.contests],
        v=arr.v.copy(),
        lengths=arr.max_t.copy(),
        n_polls=np.bincount(arr.contest, minlength=arr.n_contests),
        draws=draws,
        window=window,
        metadata=meta,
    )


def log_posterior(spec: ModelSpec, params: ParamState, data: PollDataset) -> float:
    lp = log_prior(spec, params, data.arrays.v)
    return lp + log_likelihood(spec, params, data) if math.isfinite(lp) else lp
