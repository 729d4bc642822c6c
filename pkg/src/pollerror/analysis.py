"""Inclusion-window sweeps and the comparisons built on them."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .domain import PollDataset, WindowConfig, filter_window
from .models import Family, ModelSpec
from .sampler import FitResult, SamplerConfig, fit

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(range(10, 101, 10))
FAMILY_CODE = {Family.STATIC: 1, Family.LINEAR: 2, Family.RANDOM_WALK: 3}


def derive_seed(root: int, *keys: int) -> int:
    """63-bit seed mixed from a root seed and integer keys."""
    state = np.random.SeedSequence([int(root), *map(int, keys)]).generate_state(1, np.uint64)[0]
    return int(state >> 1)


def cell_seed(root: int, family: Family, T: int) -> int:
    return derive_seed(root, int(T), FAMILY_CODE[Family.parse(family)])


@dataclass
class SweepResult:
    cells: pd.DataFrame  # one row per (contest, model, T)
    failures: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)  # (model, T) -> FitResult, when kept

    def estimates(self, model, contest: Optional[str] = None) -> pd.DataFrame:
        fam = Family.parse(model).value
        df = self.cells[self.cells.model == fam]
        if contest is not None:
            df = df[df.contest_id == contest]
        return df.sort_values("T")

    def tidy(self) -> pd.DataFrame:
        """Long format: one row per (contest, model, T, quantity, statistic)."""
        stat_cols = {
            "error_pp": ("error_mean", "error_sd", "error_lo", "error_hi"),
            "moe_pp": ("moe_mean", "moe_sd", "moe_lo", "moe_hi"),
        }
        names = ("mean", "sd", "q2.5", "q97.5")
        rows = []
        for rec in self.cells.to_dict("records"):
            for q, cols in stat_cols.items():
                for stat, col in zip(names, cols):
                    rows.append({"contest_id": rec["contest_id"], "model": rec["model"], "T": rec["T"],
                                 "quantity": q, "statistic": stat, "value": rec[col]})
        return pd.DataFrame(rows, columns=["contest_id", "model", "T", "quantity", "statistic", "value"])


def _cell_rows(res: FitResult, fam: Family, T: int, seed: int) -> list[dict]:
    df = res.summaries.set_index(["parameter", "contest_id"])
    rhat_max = float(np.nanmax(df[df.free].rhat.to_numpy())) if res.n_chains > 1 else float("nan")
    rows = []
    for r, cid in enumerate(res.contest_ids):
        e = df.loc[("error_pp", cid)]
        m = df.loc[("moe_pp", cid)]
        rows.append({
            "contest_id": cid, "model": fam.value, "T": int(T), "n_polls": int(res.n_polls[r]),
            "error_mean": e["mean"], "error_sd": e["sd"], "error_lo": e["q2.5"], "error_hi": e["q97.5"],
            "moe_mean": m["mean"], "moe_sd": m["sd"], "moe_lo": m["q2.5"], "moe_hi": m["q97.5"],
            "rhat_max": rhat_max, "seed": seed,
        })
    return rows


def run_cell(data: PollDataset, spec: ModelSpec, T: int, config: SamplerConfig):
    """Fit one (spec, T) cell with its derived seed."""
    seed = cell_seed(config.seed, spec.family, T)
    windowed = filter_window(data, WindowConfig(T))
    cfg = replace(config, seed=seed, keep_latent=False, workers=1)
    try:
        res = fit(spec, windowed, cfg, window=T)
    except Exception as exc:  # recorded per cell
        return spec.family, T, seed, None, f"{type(exc).__name__}: {exc}"
    return spec.family, T, seed, res, None


def window_sweep(data: PollDataset, specs: Sequence[ModelSpec], Ts: Sequence[int] = DEFAULT_GRID,
                 sampler_config: SamplerConfig = SamplerConfig(), workers: int = 1,
                 per_model_T: Optional[Mapping] = None, keep_fits: bool = False) -> SweepResult:
    """Refit every spec at every window on the windowed data.

    ``per_model_T`` maps a family to its own grid, overriding ``Ts``.
    """
    Ts = [int(T) for T in Ts]
    if not Ts:
        raise ValueError("window grid is empty")
    if Ts != sorted(Ts) or len(set(Ts)) != len(Ts):
        raise ValueError("window grid must be strictly ascending")
    overrides = {Family.parse(k): [int(x) for x in (v if np.iterable(v) else [v])]
                 for k, v in (per_model_T or {}).items()}
    jobs = [(spec, T) for spec in specs for T in overrides.get(spec.family, Ts)]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(run_cell, [data] * len(jobs), [j[0] for j in jobs],
                               [j[1] for j in jobs], [sampler_config] * len(jobs)))
    else:
        outs = [run_cell(data, spec, T, sampler_config) for spec, T in jobs]
    rows, failures, fits = [], [], {}
    for fam, T, seed, res, err in outs:
        if err:
            failures.append({"model": fam.value, "T": T, "seed": seed, "error": err})
            log.warning("sweep cell %s T=%d failed: %s", fam.value, T, err)
            continue
        rows.extend(_cell_rows(res, fam, T, seed))
        if keep_fits:
            fits[(fam.value, T)] = res
    cells = pd.DataFrame(rows)
    if not cells.empty:
        cells = cells.sort_values(["contest_id", "model", "T"], kind="stable").reset_index(drop=True)
    return SweepResult(cells, failures, fits)


def estimate_range(sweep: SweepResult, contest: str, model) -> tuple[float, float]:
    est = sweep.estimates(model, contest)
    if est.empty:
        raise KeyError((contest, model))
    return float(est.error_mean.min()), float(est.error_mean.max())


def flips_sign(values: Sequence[float]) -> bool:
    x = np.asarray(values, dtype=float)
    return bool(np.any(x > 0) and np.any(x < 0))


def sign_flips(sweep: SweepResult, model) -> dict[str, bool]:
    """Per contest: does the error point estimate change sign across windows?"""
    est = sweep.estimates(model)
    if est["T"].nunique() < 2:
        raise ValueError("sign flips need at least two windows")
    return {cid: flips_sign(g.error_mean) for cid, g in est.groupby("contest_id", sort=True)}


def pooled_bias(res: FitResult) -> dict:
    """Summary of the population-level directional error, in points."""
    if len(res.contest_ids) < 2:
        raise ValueError("pooled bias needs a hierarchical fit over >= 2 contests")
    if "mu_alpha" not in res.draws:
        raise ValueError("fit has no mu_alpha draws")
    return res.summary("mu_alpha_pp")
