"""Posterior draws plus their summaries and diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Optional

import numpy as np
import pandas as pd

from ..models import Family, ModelSpec, election_day_error, excess_moe
from .diagnostics import ess, split_rhat

PER_CONTEST = ("alpha", "tau", "beta", "gamma")
HYPERS = ("mu_alpha", "sigma_alpha", "sigma_tau", "sigma_gamma", "mu_beta", "sigma_beta")
QUANTILES = (2.5, 50.0, 97.5)
RHAT_WARN = 1.05


def _summarize(x: np.ndarray) -> dict:
    """Summary row for draws shaped (chains, iterations)."""
    flat = x.reshape(-1)
    q = np.percentile(flat, QUANTILES)
    row = {
        "mean": float(flat.mean()),
        "sd": float(flat.std(ddof=1)) if flat.size > 1 else 0.0,
        "q2.5": float(q[0]),
        "q50": float(q[1]),
        "q97.5": float(q[2]),
    }
    rhat = split_rhat(x) if x.shape[0] >= 2 and x.shape[1] >= 4 else math.nan
    e = ess(x) if x.shape[1] >= 4 else math.nan
    row["rhat"] = rhat
    row["ess"] = e
    row["mcse"] = row["sd"] / math.sqrt(e) if e == e and e > 0 else math.nan
    return row


@dataclass
class FitResult:
    spec: ModelSpec
    config: Any
    contest_ids: list[str]
    v: np.ndarray
    lengths: np.ndarray
    n_polls: np.ndarray
    draws: dict[str, np.ndarray]
    window: Optional[int] = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_chains(self) -> int:
        return self.draws["alpha"].shape[0]

    @property
    def n_draws(self) -> int:
        return self.draws["alpha"].shape[0] * self.draws["alpha"].shape[1]

    def contest_index(self, contest_id: str) -> int:
        return self.contest_ids.index(contest_id)

    def error_pp(self) -> np.ndarray:
        """Election-day error draws (chains, iterations, contests) in points."""
        return election_day_error(self.spec.family, self.draws["alpha"], self.v[None, None, :])

    def moe_pp(self) -> np.ndarray:
        return excess_moe(self.draws["tau"])

    def param(self, name: str, contest: Optional[str] = None) -> np.ndarray:
        """Draws of one scalar quantity as a (chains, iterations) array."""
        if name == "error_pp":
            x = self.error_pp()
        elif name == "moe_pp":
            x = self.moe_pp()
        elif name == "mu_alpha_pp":
            return 100.0 * self.draws["mu_alpha"]
        else:
            x = self.draws[name]
        if x.ndim == 3:
            if contest is None:
                raise ValueError(f"{name} is per contest; pass contest=")
            x = x[:, :, self.contest_index(contest)]
        return x

    def _is_free(self, name: str) -> bool:
        base = {"error_pp": "alpha", "moe_pp": "tau", "mu_alpha_pp": "mu_alpha"}.get(name, name)
        return base == "alpha" or self.spec.is_free(base)

    @cached_property
    def summaries(self) -> pd.DataFrame:
        rows = []
        names = [k for k in PER_CONTEST if k in self.draws] + ["error_pp", "moe_pp"]
        for name in names:
            for r, cid in enumerate(self.contest_ids):
                x = self.param(name, cid)
                rows.append({"parameter": name, "contest_id": cid, **_summarize(x),
                             "free": self._is_free(name)})
        for name in [h for h in HYPERS if h in self.draws] + (
                ["mu_alpha_pp"] if "mu_alpha" in self.draws else []):
            rows.append({"parameter": name, "contest_id": "", **_summarize(self.param(name)),
                         "free": self._is_free(name)})
        return pd.DataFrame(rows)

    def summary(self, name: str, contest: Optional[str] = None) -> dict:
        df = self.summaries
        sel = df[(df.parameter == name) & (df.contest_id == (contest or ""))]
        if sel.empty:
            raise KeyError((name, contest))
        return sel.iloc[0].to_dict()

    def latent_summary(self) -> pd.DataFrame:
        """Posterior mean and interval of each latent daily preference."""
        if "theta" not in self.draws:
            raise KeyError("fit did not keep latent draws")
        th = self.draws["theta"]
        flat = th.reshape(-1, *th.shape[2:])
        rows = []
        for r, cid in enumerate(self.contest_ids):
            for d in range(int(self.lengths[r])):
                x = flat[:, r, d]
                q = np.percentile(x, QUANTILES)
                rows.append({"contest_id": cid, "t": d + 1, "mean": float(x.mean()),
                             "sd": float(x.std(ddof=1)), "q2.5": q[0], "q50": q[1], "q97.5": q[2]})
        return pd.DataFrame(rows)

    def convergence_warnings(self, threshold: float = RHAT_WARN) -> list[str]:
        df = self.summaries
        free = df[df.free]
        bad = free[(free.rhat > threshold) | free.rhat.isna()] if self.n_chains >= 2 else free.iloc[0:0]
        return [f"{p}[{c}]" if c else p for p, c in zip(bad.parameter, bad.contest_id)]

    @property
    def family(self) -> Family:
        return self.spec.family
