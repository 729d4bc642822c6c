"""Synthetic election cycles and a parameter-recovery harness."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import expit, logit

from .domain import ElectionContest, Poll, PollDataset, contest_id_for
from .models import Family, ModelSpec, ParamState, clamp, election_day_error, poll_variance

log = logging.getLogger(__name__)

DYNAMICS = ("random_walk", "static", "linear_drift", "regime_shift")


@dataclass(frozen=True)
class Normal:
    mean: float
    sd: float

    def sample(self, rng, size):
        return self.mean + self.sd * rng.standard_normal(size)


@dataclass(frozen=True)
class Uniform:
    low: float
    high: float

    def sample(self, rng, size):
        return rng.uniform(self.low, self.high, size)


@dataclass(frozen=True)
class HalfNormal:
    scale: float

    def sample(self, rng, size):
        return np.abs(self.scale * rng.standard_normal(size))


Draw = Union[float, Normal, Uniform, HalfNormal]


def _draw(spec: Draw, rng, size) -> np.ndarray:
    if isinstance(spec, (int, float)):
        return np.full(size, float(spec))
    return np.asarray(spec.sample(rng, size), dtype=float)


def draw_from_dict(d) -> Draw:
    if isinstance(d, (int, float)):
        return float(d)
    kind = d["dist"]
    args = {k: v for k, v in d.items() if k != "dist"}
    return {"normal": Normal, "uniform": Uniform, "halfnormal": HalfNormal}[kind](**args)


def draw_to_dict(x: Draw):
    if isinstance(x, (int, float)):
        return float(x)
    return {"dist": type(x).__name__.lower(), **vars(x)}


def even_schedule(n_polls: int, max_day: int, n: int = 800) -> list[tuple[int, int]]:
    """``n_polls`` slots spread evenly over days 1..max_day."""
    days = np.unique(np.linspace(1, max_day, n_polls).round().astype(int))
    if len(days) < n_polls:
        days = np.sort(np.resize(days, n_polls))
    return [(int(d), int(n)) for d in days]


@dataclass(frozen=True)
class SimConfig:
    contests: int = 10
    true_alpha: Draw = 0.0
    true_tau: Draw = 0.01
    true_gamma: Draw = 0.005
    dynamics: str = "random_walk"
    schedule: Sequence = field(default_factory=lambda: tuple(even_schedule(20, 60)))
    v: Draw = Uniform(0.4, 0.6)
    seed: int = 0
    # linear_drift: per-day logit slope
    drift: Draw = 0.0
    # regime_shift: level change in preference at and beyond ``shift_day``
    shift_day: int = 30
    shift_size: Draw = 0.04
    year: int = 2000

    def __post_init__(self):
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"dynamics must be one of {DYNAMICS}")
        if self.contests < 1:
            raise ValueError("contests must be >= 1")
        if not len(self.schedule):
            raise ValueError("schedule must be nonempty")
        for name in ("true_tau", "true_gamma"):
            val = getattr(self, name)
            if isinstance(val, (int, float)) and val < 0:
                raise ValueError(f"{name} must be >= 0")

    def schedules(self) -> list[list[tuple[int, int]]]:
        s = list(self.schedule)
        if s and isinstance(s[0], (tuple, list)) and len(s[0]) and isinstance(s[0][0], (tuple, list)):
            if len(s) != self.contests:
                raise ValueError("per-contest schedule length must equal contests")
            return [[(int(t), int(n)) for t, n in row] for row in s]
        return [[(int(t), int(n)) for t, n in s]] * self.contests

    def to_dict(self) -> dict:
        return {
            "contests": self.contests,
            "true_alpha": draw_to_dict(self.true_alpha),
            "true_tau": draw_to_dict(self.true_tau),
            "true_gamma": draw_to_dict(self.true_gamma),
            "dynamics": self.dynamics,
            "schedule": [list(x) for x in self.schedule],
            "v": draw_to_dict(self.v),
            "seed": self.seed,
            "drift": draw_to_dict(self.drift),
            "shift_day": self.shift_day,
            "shift_size": draw_to_dict(self.shift_size),
            "year": self.year,
        }

    @classmethod
    def from_dict(cls, d) -> "SimConfig":
        d = dict(d)
        for k in ("true_alpha", "true_tau", "true_gamma", "v", "drift", "shift_size"):
            if k in d:
                d[k] = draw_from_dict(d[k])
        if "schedule" in d:
            d["schedule"] = tuple(tuple(x) if not isinstance(x[0], (list, tuple)) else tuple(map(tuple, x))
                                  for x in d["schedule"])
        return cls(**d)


@dataclass
class SimTruth(ParamState):
    dynamics: str = "random_walk"
    truncated: int = 0
    contest_ids: list = field(default_factory=list)
    v: Optional[np.ndarray] = None

    def error_pp(self) -> np.ndarray:
        fam = Family.LINEAR if self.dynamics == "linear_drift" else Family.RANDOM_WALK
        return election_day_error(fam, self.alpha, self.v)


def simulate_dataset(config: SimConfig, seed: Optional[int] = None) -> tuple[PollDataset, SimTruth]:
    """Generate polls from the configured preference dynamics.

    Preferences are anchored at the result on election day (t = 0) and
    evolve backward in calendar time. Poll shares outside [0, 1] are
    truncated to the boundary and counted.
    """
    rng = np.random.default_rng(config.seed if seed is None else seed)
    R = config.contests
    v = np.clip(_draw(config.v, rng, R), 1e-4, 1 - 1e-4)
    alpha = _draw(config.true_alpha, rng, R)
    tau = _draw(config.true_tau, rng, R)
    gamma = _draw(config.true_gamma, rng, R)
    if np.any(tau < 0) or np.any(gamma < 0):
        raise ValueError("variance-like truth must be nonnegative")
    schedules = config.schedules()
    lengths = np.array([max(t for t, _ in s) for s in schedules], dtype=np.int64)
    D = int(lengths.max())

    steps = gamma[:, None] * rng.standard_normal((R, D))
    beta = None
    if config.dynamics == "random_walk":
        theta = v[:, None] + np.cumsum(steps, axis=1)
    elif config.dynamics == "static":
        theta = np.repeat(v[:, None], D, axis=1)
    elif config.dynamics == "linear_drift":
        beta = _draw(config.drift, rng, R)
        days = np.arange(1, D + 1)[None, :]
        theta = expit(logit(v)[:, None] + beta[:, None] * days)
    else:
        jump = _draw(config.shift_size, rng, R)
        days = np.arange(1, D + 1)[None, :]
        theta = v[:, None] + np.where(days >= config.shift_day, jump[:, None], 0.0) + np.cumsum(steps, axis=1)
    theta = np.where(np.arange(D)[None, :] < lengths[:, None], theta, np.nan)

    ids = [contest_id_for(f"S{r:03d}", config.year) for r in range(R)]
    contests = [ElectionContest(ids[r], f"S{r:03d}", config.year, float(v[r])) for r in range(R)]
    polls = []
    truncated = 0
    for r, sched in enumerate(schedules):
        t = np.array([x[0] for x in sched])
        n = np.array([x[1] for x in sched], dtype=float)
        pref = np.where(t == 0, v[r], theta[r, np.maximum(t - 1, 0)])
        if config.dynamics == "linear_drift":
            p = expit(logit(v[r]) + alpha[r] + beta[r] * t)
        else:
            p = clamp(pref + alpha[r])
        sd = np.sqrt(poll_variance(p, n, tau[r]))
        y = p + sd * rng.standard_normal(len(t))
        yc = np.clip(y, 0.0, 1.0)
        truncated += int(np.count_nonzero(yc != y))
        for i in range(len(t)):
            polls.append(Poll(ids[r], int(t[i]), float(yc[i]), int(n[i])))

    truth = SimTruth(
        alpha=alpha, tau=tau, beta=beta,
        gamma=gamma if config.dynamics in ("random_walk", "regime_shift") else np.zeros(R),
        theta=theta, lengths=lengths,
        mu_alpha=config.true_alpha.mean if isinstance(config.true_alpha, Normal) else float(np.mean(alpha)),
        sigma_alpha=config.true_alpha.sd if isinstance(config.true_alpha, Normal) else 0.0,
        sigma_tau=math.nan,
        dynamics=config.dynamics, truncated=truncated, contest_ids=ids, v=v,
    )
    return PollDataset(contests, polls), truth


# ---------------------------------------------------------------- recovery


@dataclass
class RecoveryReport:
    table: pd.DataFrame  # one row per quantity: bias, rmse, coverage, width
    records: pd.DataFrame  # one row per (rep, quantity, contest)
    errors: list = field(default_factory=list)

    def coverage(self, quantity: str) -> float:
        return float(self.table.set_index("quantity").loc[quantity, "coverage"])


def rep_seed(seed: int, rep: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(rep)]).generate_state(1, np.uint64)[0] >> 1)


def _one_rep(sim: SimConfig, spec: ModelSpec, sampler, rep: int):
    from dataclasses import replace

    from .sampler import fit

    seed = rep_seed(sim.seed, rep)
    try:
        data, truth = simulate_dataset(sim, seed=seed)
        res = fit(spec, data, replace(sampler, seed=seed, keep_latent=False))
    except Exception as exc:  # recorded, not fatal
        return rep, None, f"{type(exc).__name__}: {exc}"
    rows = []

    def add(q, cid, x, true):
        flat = x.reshape(-1)
        lo, hi = np.percentile(flat, [2.5, 97.5])
        rows.append({"rep": rep, "quantity": q, "contest_id": cid, "truth": float(true),
                     "mean": float(flat.mean()), "lo": float(lo), "hi": float(hi)})

    err_true = truth.error_pp()
    for r, cid in enumerate(res.contest_ids):
        add("alpha", cid, res.draws["alpha"][:, :, r], truth.alpha[r])
        add("error_pp", cid, res.error_pp()[:, :, r], err_true[r])
        add("tau", cid, res.draws["tau"][:, :, r], truth.tau[r])
        add("moe_pp", cid, res.moe_pp()[:, :, r], 200 * truth.tau[r])
        if "gamma" in res.draws:
            add("gamma", cid, res.draws["gamma"][:, :, r], truth.gamma[r])
    if "mu_alpha" in res.draws and isinstance(sim.true_alpha, Normal):
        add("mu_alpha", "", res.draws["mu_alpha"], sim.true_alpha.mean)
    return rep, rows, None


def recovery_experiment(sim: SimConfig, spec: ModelSpec, sampler, reps: int,
                        workers: int = 1) -> RecoveryReport:
    """Simulate, fit and score ``reps`` times with per-rep derived seeds."""
    if reps < 1:
        raise ValueError("reps must be >= 1")
    args = [(sim, spec, sampler, k) for k in range(reps)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            outs = list(ex.map(_one_rep, *zip(*args)))
    else:
        outs = [_one_rep(*a) for a in args]
    rows, errors = [], []
    for rep, r, err in sorted(outs, key=lambda o: o[0]):
        if err:
            errors.append((rep, err))
            log.warning("rep %d failed: %s", rep, err)
        else:
            rows.extend(r)
    rec = pd.DataFrame(rows)
    if rec.empty:
        return RecoveryReport(pd.DataFrame(), rec, errors)
    rec["covered"] = (rec.lo <= rec.truth) & (rec.truth <= rec.hi)
    rec["width"] = rec.hi - rec.lo
    rec["err"] = rec["mean"] - rec.truth
    table = rec.groupby("quantity", sort=False).agg(
        bias=("err", "mean"),
        rmse=("err", lambda e: float(np.sqrt(np.mean(e ** 2)))),
        coverage=("covered", "mean"),
        width=("width", "mean"),
        n=("err", "size"),
    ).reset_index()
    return RecoveryReport(table, rec, errors)
