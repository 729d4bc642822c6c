"""Split R-hat and effective sample size."""
from __future__ import annotations

import math

import numpy as np


def _as_chains(draws) -> np.ndarray:
    x = np.asarray(draws, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ValueError("draws must be 1-d or (chains, iterations)")
    return x


def _degenerate(x: np.ndarray) -> bool:
    return bool(np.all(np.ptp(x, axis=1) == 0))


def split_rhat(draws) -> float:
    """Split-chain potential scale reduction factor.

    Returns NaN (the degenerate flag) when every chain is constant.
    """
    x = _as_chains(draws)
    m, n = x.shape
    if m < 2 or n < 4:
        raise ValueError("split R-hat needs >= 2 chains of >= 4 draws")
    if _degenerate(x):
        return math.nan
    half = n // 2
    # odd lengths drop the middle draw
    halves = np.concatenate([x[:, :half], x[:, n - half:]], axis=0)
    means = halves.mean(axis=1)
    W = halves.var(axis=1, ddof=1).mean()
    B = half * means.var(ddof=1)
    if W == 0:
        return math.inf
    var_plus = (half - 1) / half * W + B / half
    return float(math.sqrt(var_plus / W))


def _autocov(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    size = 1 << (2 * n - 1).bit_length()
    xc = x - x.mean(axis=-1, keepdims=True)
    f = np.fft.rfft(xc, size, axis=-1)
    ac = np.fft.irfft(f * np.conj(f), size, axis=-1)[..., :n]
    return ac / n


def ess(draws) -> float:
    """Multi-chain effective sample size with Geyer's initial positive sequence.

    Accepts a single sequence or a (chains, iterations) array. Returns NaN when
    every chain is constant.
    """
    x = _as_chains(draws)
    m, n = x.shape
    if n < 4:
        raise ValueError("ESS needs >= 4 draws per chain")
    if _degenerate(x):
        return math.nan
    acov = _autocov(x)
    chain_var = acov[:, 0] * n / (n - 1.0)
    W = chain_var.mean()
    var_plus = W * (n - 1.0) / n
    if m > 1:
        var_plus += x.mean(axis=1).var(ddof=1)
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0

    # sum consecutive pairs while positive, enforcing monotone decrease
    total = 0.0
    prev = math.inf
    k = 0
    while k + 1 < n:
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        k += 2
    tau = -1.0 + 2.0 * total
    tau = max(tau, 1.0 / math.log10(m * n)) if m * n > 10 else max(tau, 1e-8)
    return float(m * n / tau)


def mcse_mean(draws) -> float:
    x = np.asarray(draws, dtype=float)
    e = ess(x)
    return float(x.std(ddof=1) / math.sqrt(e)) if e == e else math.nan


def mcse_sd(draws) -> float:
    """Monte-Carlo standard error of the posterior sd (normal approximation)."""
    x = np.asarray(draws, dtype=float)
    d = (x - x.mean()) ** 2
    e = ess(d if d.ndim > 1 else d[None, :])
    if not e == e:
        return math.nan
    sd = x.std(ddof=1)
    # delta method: sd = sqrt(E[d]) so se(sd) = se(E[d]) / (2 sd)
    return float(d.std(ddof=1) / math.sqrt(e) / (2.0 * sd))
