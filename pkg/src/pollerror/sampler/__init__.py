from .diagnostics import ess, mcse_mean, mcse_sd, split_rhat
from .engine import (
    SamplerConfig,
    SamplerError,
    SamplerInitError,
    SamplerStalledError,
    chain_seed,
    fit,
    log_posterior,
    update_scalar,
)
from .result import FitResult

__all__ = [
    "FitResult", "SamplerConfig", "SamplerError", "SamplerInitError", "SamplerStalledError",
    "chain_seed", "ess", "fit", "log_posterior", "mcse_mean", "mcse_sd", "split_rhat",
    "update_scalar",
]
