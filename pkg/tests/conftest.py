import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pollerror import ElectionContest, Poll, PollDataset

settings.register_profile(
    "default", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")

BIG_N = 10 ** 9  # makes the binomial variance negligible next to tau^2


@pytest.fixture
def two_poll_rw():
    """The two-poll random-walk instance with a closed-form answer."""
    contest = ElectionContest("A-2000", "A", 2000, 0.50)
    polls = [Poll("A-2000", 1, 0.52, BIG_N), Poll("A-2000", 2, 0.55, BIG_N)]
    return PollDataset([contest], polls)


@pytest.fixture
def small_multi():
    """Three contests with a handful of polls each, one contest unpolled."""
    rng = np.random.default_rng(0)
    contests = [ElectionContest(f"S{i}-2000", f"S{i}", 2000, 0.45 + 0.05 * i) for i in range(3)]
    contests.append(ElectionContest("S9-2004", "S9", 2004, 0.5))
    polls = []
    for i in range(3):
        for t in sorted(rng.integers(0, 25, 6)):
            y = float(np.clip(0.45 + 0.05 * i + rng.normal(-0.01, 0.02), 0, 1))
            polls.append(Poll(f"S{i}-2000", int(t), y, 600))
    return PollDataset(contests, polls)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
