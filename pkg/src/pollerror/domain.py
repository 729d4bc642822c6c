"""Core data types: polls, contests, datasets and inclusion windows."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

import numpy as np


class InvalidPollError(ValueError):
    """A poll or contest violates a domain invariant."""


@dataclass(frozen=True)
class Poll:
    contest_id: str
    t: int
    y: float
    n: int
    pollster: Optional[str] = None

    def __post_init__(self):
        if not (0.0 <= self.y <= 1.0) or math.isnan(self.y):
            raise InvalidPollError(f"poll share y={self.y} outside [0, 1]")
        if int(self.n) != self.n or self.n < 1:
            raise InvalidPollError(f"poll sample size n={self.n} must be a positive integer")
        if int(self.t) != self.t or self.t < 0:
            raise InvalidPollError(f"poll day t={self.t} must be a nonnegative integer")


@dataclass(frozen=True)
class ElectionContest:
    contest_id: str
    state: str
    year: int
    v: float

    def __post_init__(self):
        if not (0.0 < self.v < 1.0):
            raise InvalidPollError(f"contest {self.contest_id}: result v={self.v} outside (0, 1)")


@dataclass(frozen=True)
class WindowConfig:
    T: int

    def __post_init__(self):
        if int(self.T) != self.T or self.T < 1:
            raise ValueError(f"window cutoff T={self.T} must be an integer >= 1")


@dataclass(frozen=True)
class PollArrays:
    """Column view of a dataset's polls, sorted by (contest index, t)."""

    contest: np.ndarray  # int index into PollDataset.contests
    t: np.ndarray
    y: np.ndarray
    n: np.ndarray
    v: np.ndarray  # per-contest result
    max_t: np.ndarray  # per-contest largest poll day, 0 when unpolled

    @property
    def n_contests(self) -> int:
        return len(self.v)

    @property
    def max_day(self) -> int:
        return int(self.max_t.max()) if len(self.max_t) else 0


@dataclass(frozen=True)
class PollDataset:
    contests: tuple[ElectionContest, ...]
    polls: tuple[Poll, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "contests", tuple(self.contests))
        object.__setattr__(self, "polls", tuple(self.polls))
        ids = [c.contest_id for c in self.contests]
        if len(set(ids)) != len(ids):
            raise InvalidPollError("duplicate contest_id in dataset")
        keys = [(c.state, c.year) for c in self.contests]
        if len(set(keys)) != len(keys):
            raise InvalidPollError("duplicate (state, year) pair in dataset")
        known = set(ids)
        for p in self.polls:
            if p.contest_id not in known:
                raise InvalidPollError(f"poll refers to unknown contest {p.contest_id!r}")

    @cached_property
    def index(self) -> dict[str, int]:
        return {c.contest_id: i for i, c in enumerate(self.contests)}

    @cached_property
    def arrays(self) -> PollArrays:
        idx = self.index
        c = np.array([idx[p.contest_id] for p in self.polls], dtype=np.int64)
        t = np.array([p.t for p in self.polls], dtype=np.int64)
        y = np.array([p.y for p in self.polls], dtype=float)
        n = np.array([p.n for p in self.polls], dtype=float)
        order = np.lexsort((t, c))
        c, t, y, n = c[order], t[order], y[order], n[order]
        v = np.array([k.v for k in self.contests], dtype=float)
        max_t = np.zeros(len(self.contests), dtype=np.int64)
        if len(c):
            np.maximum.at(max_t, c, t)
        return PollArrays(contest=c, t=t, y=y, n=n, v=v, max_t=max_t)

    def polls_for(self, contest_id: str) -> list[Poll]:
        return [p for p in self.polls if p.contest_id == contest_id]

    def poll_counts(self) -> dict[str, int]:
        counts = {c.contest_id: 0 for c in self.contests}
        for p in self.polls:
            counts[p.contest_id] += 1
        return counts

    def restrict_years(self, years: Iterable[int]) -> "PollDataset":
        keep = set(int(y) for y in years)
        contests = [c for c in self.contests if c.year in keep]
        ids = {c.contest_id for c in contests}
        return PollDataset(contests, [p for p in self.polls if p.contest_id in ids])

    def restrict_contests(self, contest_ids: Iterable[str]) -> "PollDataset":
        ids = set(contest_ids)
        contests = [c for c in self.contests if c.contest_id in ids]
        return PollDataset(contests, [p for p in self.polls if p.contest_id in ids])


def filter_window(dataset: PollDataset, window: WindowConfig | int) -> PollDataset:
    """Keep only polls taken at most ``T`` days before the election.

    Every contest is retained, including ones left with no polls.
    """
    T = window.T if isinstance(window, WindowConfig) else WindowConfig(int(window)).T
    return replace(dataset, polls=tuple(p for p in dataset.polls if p.t <= T))


def two_party_share(rep: float, dem: float) -> float:
    if rep < 0 or dem < 0:
        raise InvalidPollError(f"negative support ({rep}, {dem})")
    total = rep + dem
    if total <= 0:
        raise InvalidPollError("no two-party support")
    return rep / total


def contest_id_for(state: str, year: int) -> str:
    return f"{state}-{int(year)}"
