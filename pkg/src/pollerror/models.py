"""Static, linear-logit and random-walk poll models: means, variances, densities."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

import numpy as np
from scipy.special import expit, logit

from .domain import Poll, PollArrays, PollDataset

GAMMA_FLOOR = 1e-6
LOG_2PI = math.log(2.0 * math.pi)


class DegenerateLikelihoodError(ValueError):
    """A poll has zero total variance."""


class Family(str, enum.Enum):
    STATIC = "static"
    LINEAR = "linear"
    RANDOM_WALK = "rw"

    @classmethod
    def parse(cls, name: "str | Family") -> "Family":
        if isinstance(name, Family):
            return name
        key = str(name).strip().lower()
        aliases = {
            "m1": cls.STATIC, "static": cls.STATIC,
            "m2": cls.LINEAR, "linear": cls.LINEAR,
            "m3": cls.RANDOM_WALK, "rw": cls.RANDOM_WALK,
            "randomwalk": cls.RANDOM_WALK, "random_walk": cls.RANDOM_WALK,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown model family {name!r}") from None

    @property
    def label(self) -> str:
        return {"static": "M1", "linear": "M2", "rw": "M3"}[self.value]


@dataclass(frozen=True)
class HyperPriorConfig:
    mu_alpha_sd: float = 0.05
    sigma_alpha_scale: float = 0.2
    sigma_tau_scale: float = 0.05
    sigma_gamma_scale: float = 0.01
    # per-day logit drift, linear model only
    mu_beta_sd: float = 0.01
    sigma_beta_scale: float = 0.02

    def __post_init__(self):
        for k, v in vars(self).items():
            if not v > 0:
                raise ValueError(f"hyperprior {k} must be > 0, got {v}")


FIXABLE = (
    "tau", "gamma", "beta",
    "mu_alpha", "sigma_alpha", "sigma_tau", "sigma_gamma", "mu_beta", "sigma_beta",
)


@dataclass(frozen=True)
class ModelSpec:
    """Model family, hyperpriors, and parameters pinned to point masses.

    ``fixed`` maps a parameter name (see ``FIXABLE``) to a value; per-contest
    parameters are pinned to that value in every contest and excluded from
    both sampling and the prior.
    """

    family: Family = Family.RANDOM_WALK
    hyperpriors: HyperPriorConfig = field(default_factory=HyperPriorConfig)
    fixed: Mapping[str, float] = field(default_factory=dict)
    plug_in: bool = False

    def __post_init__(self):
        object.__setattr__(self, "family", Family.parse(self.family))
        object.__setattr__(self, "fixed", dict(self.fixed))
        for k in self.fixed:
            if k not in FIXABLE:
                raise ValueError(f"parameter {k!r} cannot be fixed")

    @property
    def has_beta(self) -> bool:
        return self.family is Family.LINEAR

    @property
    def has_walk(self) -> bool:
        return self.family is Family.RANDOM_WALK

    def is_free(self, name: str) -> bool:
        """True when ``name`` is sampled under this spec."""
        if name in self.fixed:
            return False
        if name in ("beta", "mu_beta", "sigma_beta") and not self.has_beta:
            return False
        if name in ("gamma", "sigma_gamma") and not self.has_walk:
            return False
        # a hyperparameter whose children are all pinned has no role
        child = {"sigma_tau": "tau", "sigma_gamma": "gamma", "mu_beta": "beta", "sigma_beta": "beta"}
        return not (name in child and child[name] in self.fixed)

    def with_fixed(self, **values: float) -> "ModelSpec":
        return replace(self, fixed={**self.fixed, **values})

    def to_dict(self) -> dict:
        return {
            "family": self.family.value,
            "hyperpriors": vars(self.hyperpriors).copy(),
            "fixed": dict(sorted(self.fixed.items())),
            "plug_in": self.plug_in,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSpec":
        return cls(
            family=Family.parse(d["family"]),
            hyperpriors=HyperPriorConfig(**d.get("hyperpriors", {})),
            fixed=d.get("fixed", {}),
            plug_in=bool(d.get("plug_in", False)),
        )


@dataclass
class ParamState:
    """Full parameter vector for one model over ``R`` contests.

    ``theta[r, t-1]`` holds the latent preference on day ``t``; entries past
    ``lengths[r]`` are NaN.
    """

    alpha: np.ndarray
    tau: np.ndarray
    beta: Optional[np.ndarray] = None
    gamma: Optional[np.ndarray] = None
    theta: Optional[np.ndarray] = None
    lengths: Optional[np.ndarray] = None
    mu_alpha: float = 0.0
    sigma_alpha: float = 0.05
    sigma_tau: float = 0.03
    sigma_gamma: Optional[float] = None
    mu_beta: Optional[float] = None
    sigma_beta: Optional[float] = None

    def copy(self) -> "ParamState":
        out = replace(self)
        for k in ("alpha", "tau", "beta", "gamma", "theta", "lengths"):
            a = getattr(self, k)
            if a is not None:
                setattr(out, k, np.array(a, copy=True))
        return out

    def theta_row(self, r: int) -> np.ndarray:
        return self.theta[r, : int(self.lengths[r])]


# ---------------------------------------------------------------- scalar API


def clamp(x):
    return np.minimum(np.maximum(0.0, x), 1.0)


def poll_mean(spec: ModelSpec, params: ParamState, poll: Poll, v: float, r: int = 0) -> float:
    """Expected poll share for ``poll`` in contest index ``r``."""
    fam = spec.family
    a = float(params.alpha[r])
    if fam is Family.STATIC:
        return float(clamp(v + a))
    if fam is Family.LINEAR:
        if not (0.0 < v < 1.0):
            raise ValueError(f"logit undefined for v={v}")
        return float(expit(logit(v) + a + float(params.beta[r]) * poll.t))
    theta_t = v if poll.t == 0 else float(params.theta[r, poll.t - 1])
    return float(clamp(theta_t + a))


def poll_variance(p, n, tau):
    return p * (1.0 - p) / n + tau * tau


def election_day_error(family, alpha, v):
    """Expected election-day poll minus result, in percentage points."""
    fam = Family.parse(family)
    alpha = np.asarray(alpha, dtype=float)
    if fam is Family.LINEAR:
        v = np.asarray(v, dtype=float)
        if np.any((v <= 0) | (v >= 1)):
            raise ValueError("linear-model error needs v in (0, 1)")
        out = 100.0 * (expit(logit(v) + alpha) - v)
    else:
        out = 100.0 * alpha
    return float(out) if np.ndim(out) == 0 else out


def excess_moe(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau < 0):
        raise ValueError("tau must be nonnegative")
    out = 200.0 * tau
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------- vectorized core


def norm_logpdf(x, mu, var):
    d = x - mu
    return -0.5 * (LOG_2PI + np.log(var) + d * d / var)


def halfnorm_logpdf(x, scale):
    x = np.asarray(x, dtype=float)
    out = math.log(2.0) + norm_logpdf(x, 0.0, scale * scale)
    return np.where(x >= 0, out, -np.inf)


def raw_means(family: Family, arr: PollArrays, params: ParamState) -> np.ndarray:
    """Poll means before clamping; the linear model never needs a clamp."""
    c, t = arr.contest, arr.t
    v = arr.v[c]
    if family is Family.STATIC:
        return v + params.alpha[c]
    if family is Family.LINEAR:
        return expit(logit(v) + params.alpha[c] + params.beta[c] * t)
    theta = np.where(t == 0, v, params.theta[c, np.maximum(t - 1, 0)])
    return theta + params.alpha[c]


def poll_loglik_terms(spec: ModelSpec, arr: PollArrays, params: ParamState,
                      plug_in: Optional[bool] = None):
    """Per-poll log-densities and the number of clamp activations."""
    plug = spec.plug_in if plug_in is None else plug_in
    raw = raw_means(spec.family, arr, params)
    p = clamp(raw)
    clamped = int(np.count_nonzero(raw != p))
    q = arr.y if plug else p
    var = poll_variance(q, arr.n, params.tau[arr.contest])
    if np.any(var <= 0):
        raise DegenerateLikelihoodError("zero total variance for a poll (tau = 0 and p in {0, 1})")
    return norm_logpdf(arr.y, p, var), clamped


def loglik_by_contest(spec: ModelSpec, arr: PollArrays, params: ParamState,
                      plug_in: Optional[bool] = None) -> np.ndarray:
    terms, _ = poll_loglik_terms(spec, arr, params, plug_in)
    return np.bincount(arr.contest, weights=terms, minlength=arr.n_contests)


def log_likelihood(spec: ModelSpec, params: ParamState, data: PollDataset,
                   plug_in: Optional[bool] = None) -> float:
    return float(loglik_by_contest(spec, data.arrays, params, plug_in).sum())


def walk_logprior_by_contest(theta: np.ndarray, lengths: np.ndarray, v: np.ndarray,
                             gamma: np.ndarray) -> np.ndarray:
    """Log-density of each contest's latent path under the reverse random walk."""
    R = len(v)
    if theta.shape[1] == 0:
        return np.zeros(R)
    g = np.maximum(gamma, GAMMA_FLOOR)
    full = np.concatenate([v[:, None], theta], axis=1)
    inc = np.diff(full, axis=1)
    mask = np.arange(theta.shape[1])[None, :] < lengths[:, None]
    dens = norm_logpdf(np.where(mask, inc, 0.0), 0.0, (g * g)[:, None])
    return np.where(mask, dens, 0.0).sum(axis=1)


def log_prior(spec: ModelSpec, params: ParamState, v: Optional[np.ndarray] = None) -> float:
    """Joint log prior density; ``v`` (contest results) is needed for the walk."""
    hp = spec.hyperpriors
    fx = spec.fixed
    mu_a = fx.get("mu_alpha", params.mu_alpha)
    s_a = fx.get("sigma_alpha", params.sigma_alpha)
    if s_a < 0:
        return -math.inf
    lp = float(norm_logpdf(params.alpha, mu_a, s_a * s_a).sum())
    if spec.is_free("mu_alpha"):
        lp += float(norm_logpdf(mu_a, 0.0, hp.mu_alpha_sd ** 2))
    if spec.is_free("sigma_alpha"):
        lp += float(halfnorm_logpdf(s_a, hp.sigma_alpha_scale))

    if "tau" not in fx:
        s_t = fx.get("sigma_tau", params.sigma_tau)
        if s_t < 0 or np.any(params.tau < 0):
            return -math.inf
        lp += float(halfnorm_logpdf(params.tau, s_t).sum())
        if spec.is_free("sigma_tau"):
            lp += float(halfnorm_logpdf(s_t, hp.sigma_tau_scale))

    if spec.has_beta and "beta" not in fx:
        mu_b = fx.get("mu_beta", params.mu_beta)
        s_b = fx.get("sigma_beta", params.sigma_beta)
        if s_b < 0:
            return -math.inf
        lp += float(norm_logpdf(params.beta, mu_b, s_b * s_b).sum())
        if spec.is_free("mu_beta"):
            lp += float(norm_logpdf(mu_b, 0.0, hp.mu_beta_sd ** 2))
        if spec.is_free("sigma_beta"):
            lp += float(halfnorm_logpdf(s_b, hp.sigma_beta_scale))

    if spec.has_walk:
        gamma = np.full(len(params.alpha), fx["gamma"]) if "gamma" in fx else params.gamma
        if np.any(gamma < 0):
            return -math.inf
        if "gamma" not in fx:
            s_g = fx.get("sigma_gamma", params.sigma_gamma)
            if s_g < 0:
                return -math.inf
            lp += float(halfnorm_logpdf(gamma, s_g).sum())
            if spec.is_free("sigma_gamma"):
                lp += float(halfnorm_logpdf(s_g, hp.sigma_gamma_scale))
        if params.theta is not None and params.theta.size:
            if v is None:
                raise ValueError("random-walk prior needs contest results v")
            lp += float(walk_logprior_by_contest(params.theta, params.lengths, v, gamma).sum())
    return lp
