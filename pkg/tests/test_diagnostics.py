import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pollerror.sampler.diagnostics import ess, mcse_mean, mcse_sd, split_rhat


def _ar1(rho, n, chains, seed):
    rng = np.random.default_rng(seed)
    x = np.empty((chains, n))
    x[:, 0] = rng.standard_normal(chains) / math.sqrt(1 - rho ** 2)
    for i in range(1, n):
        x[:, i] = rho * x[:, i - 1] + rng.standard_normal(chains)
    return x


def test_iid_draws():
    x = np.random.default_rng(0).standard_normal((4, 2000))
    assert split_rhat(x) == pytest.approx(1.0, abs=0.01)
    assert 6000 < ess(x) < 10000


def test_ar1_ess_matches_theory():
    rho = 0.8
    x = _ar1(rho, 5000, 4, 1)
    theory = x.size * (1 - rho) / (1 + rho)
    assert ess(x) == pytest.approx(theory, rel=0.2)


def test_rhat_detects_disagreeing_chains():
    x = np.random.default_rng(2).standard_normal((4, 500))
    x[0] += 3
    assert split_rhat(x) > 1.5


def test_rhat_detects_trend_within_chain():
    x = np.random.default_rng(3).standard_normal((2, 1000)) + np.linspace(0, 4, 1000)
    assert split_rhat(x) > 1.2


def test_constant_chains_flag_nan():
    x = np.ones((3, 50))
    assert math.isnan(split_rhat(x)) and math.isnan(ess(x)) and math.isnan(mcse_mean(x))


def test_shape_errors():
    with pytest.raises(ValueError):
        split_rhat(np.zeros((1, 100)))
    with pytest.raises(ValueError):
        split_rhat(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        ess(np.zeros((2, 2, 2)))


def test_mcse_close_to_iid_formula():
    x = np.random.default_rng(4).standard_normal((4, 5000))
    assert mcse_mean(x) == pytest.approx(1 / math.sqrt(x.size), rel=0.1)
    # sd of a normal sample has se ~ sigma / sqrt(2 n)
    assert mcse_sd(x) == pytest.approx(1 / math.sqrt(2 * x.size), rel=0.15)


@given(st.floats(-100, 100), st.floats(0.01, 100))
def test_rhat_and_ess_are_affine_invariant(shift, scale):
    x = _ar1(0.5, 400, 3, 5)
    assert split_rhat(shift + scale * x) == pytest.approx(split_rhat(x), rel=1e-6)
    assert ess(shift + scale * x) == pytest.approx(ess(x), rel=1e-6)
