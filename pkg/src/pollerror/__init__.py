"""Directional polling error and excess variance under static, linear-logit
and reverse random-walk models of voter preference."""

from .domain import (
    ElectionContest,
    InvalidPollError,
    Poll,
    PollDataset,
    WindowConfig,
    filter_window,
    two_party_share,
)
from .models import Family, HyperPriorConfig, ModelSpec, ParamState
from .sampler import FitResult, SamplerConfig, fit

__version__ = "0.1.0"

__all__ = [
    "ElectionContest", "InvalidPollError", "Poll", "PollDataset", "WindowConfig", "filter_window",
    "two_party_share", "Family", "HyperPriorConfig", "ModelSpec", "ParamState", "FitResult",
    "SamplerConfig", "fit",
]
