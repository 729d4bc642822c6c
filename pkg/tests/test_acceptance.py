"""Acceptance criteria, each checked at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed together at the
end of the pytest run (see ``conftest.py``) and immediately with ``-s``.
Criterion 7 needs user-supplied replication data: point
``POLLERROR_REPLICATION_DIR`` at a directory holding ``polls.csv``,
``results.csv`` and optionally ``mapping.json``.
"""
import os
import time
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pollerror import ElectionContest, ModelSpec, Poll, PollDataset, SamplerConfig, filter_window, fit
from pollerror.analysis import DEFAULT_GRID, estimate_range, pooled_bias, window_sweep
from pollerror.cli import main as cli_main
from pollerror.ingest import load_dataset
from pollerror.oracle import rw_alpha_posterior, rw_marginal_cov, single_poll_weight, static_alpha_posterior
from pollerror.sampler.diagnostics import mcse_sd
from pollerror.simulate import HalfNormal, Normal, SimConfig, Uniform, even_schedule, recovery_experiment, simulate_dataset

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []


def record(number: int, ok: bool, text: str):
    line = f"{'PASS' if ok else 'FAIL'}  [{number}] {text}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def _sd_mcse(res, name, contest):
    return mcse_sd(res.param(name, contest))


def test_1_static_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    v, tau = 0.48, 0.02
    ys = v + 0.015 + tau * rng.standard_normal(20)
    polls = [Poll("A-2000", 1 + i, float(y), 10 ** 9) for i, y in enumerate(ys)]
    ds = PollDataset([ElectionContest("A-2000", "A", 2000, v)], polls)
    spec = ModelSpec("static", fixed={"tau": tau, "mu_alpha": 0.0, "sigma_alpha": 0.05})
    res = fit(spec, ds, SamplerConfig(chains=4, warmup_iters=500, sampling_iters=2500, seed=1))
    post = static_alpha_posterior(ys, v, tau, 0.0, 0.05)
    s = res.summary("alpha", "A-2000")
    se_sd = _sd_mcse(res, "alpha", "A-2000")
    z_mean = (s["mean"] - post.mean) / s["mcse"]
    z_sd = (s["sd"] - post.sd) / se_sd
    elapsed = time.perf_counter() - t0
    ok = abs(z_mean) <= 3 and abs(z_sd) <= 3 and elapsed < 60
    record(1, ok, f"M1 vs conjugate posterior: mean {s['mean']:.6f} vs {post.mean:.6f} ({z_mean:+.2f} MCSE), "
                  f"sd {s['sd']:.6f} vs {post.sd:.6f} ({z_sd:+.2f} MCSE), ESS {s['ess']:.0f}, {elapsed:.1f}s")


def test_2_random_walk_oracle_equivalence(two_poll_rw):
    t0 = time.perf_counter()
    spec = ModelSpec("rw", fixed={"tau": 0.02, "gamma": 0.01, "mu_alpha": 0.0, "sigma_alpha": 10.0})
    res = fit(spec, two_poll_rw, SamplerConfig(chains=4, warmup_iters=500, sampling_iters=5000, seed=2))
    post = rw_alpha_posterior([0.52, 0.55], [1, 2], 0.50, 0.02, 0.01, 0.0, 10.0)
    s = res.summary("alpha", "A-2000")
    se_sd = _sd_mcse(res, "alpha", "A-2000")
    z_mean = (s["mean"] - 0.033333) / s["mcse"]
    z_sd = (s["sd"] - post.sd) / se_sd
    z_sd_quoted = (s["sd"] - 0.017945) / se_sd
    elapsed = time.perf_counter() - t0
    ok = abs(z_mean) <= 3 and abs(z_sd) <= 3 and abs(z_sd_quoted) <= 3 and elapsed < 60
    record(2, ok, f"M3 two-poll: mean {s['mean']:.6f} vs 0.033333 ({z_mean:+.2f} MCSE), sd {s['sd']:.6f} vs "
                  f"exact {post.sd:.6f} ({z_sd:+.2f}) / quoted 0.017945 ({z_sd_quoted:+.2f}), {elapsed:.1f}s")


def test_3_covariance_law():
    ts, tau, gamma, N = (5, 20), 0.02, 0.01, 100_000
    sim = SimConfig(contests=N, true_alpha=0.0, true_tau=tau, true_gamma=gamma, v=0.5,
                    schedule=tuple((t, 10 ** 12) for t in ts), seed=3)
    ds, _ = simulate_dataset(sim)
    y = ds.arrays.y.reshape(N, 2)
    emp = np.cov(y.T)
    sigma = rw_marginal_cov(ts, tau, gamma).sigma
    se = np.sqrt((sigma ** 2 + np.outer(np.diag(sigma), np.diag(sigma))) / N)
    z = (emp - sigma) / se
    ok = bool(np.all(np.abs(z) <= 3))
    record(3, ok, f"100k simulated pairs t={ts}: entrywise z = "
                  f"[{z[0, 0]:+.2f}, {z[0, 1]:+.2f}, {z[1, 1]:+.2f}] (limit 3)")


def test_4_weight_monotonicity():
    taus = (0.005, 0.01, 0.02, 0.03, 0.05)
    gammas = (0.0, 0.002, 0.005, 0.01, 0.02)
    days = (0, 10, 50, 100)
    grid = [(t, tau, g) for tau in taus for g in gammas for t in days]
    assert len(grid) == 100
    bad = []
    for tau in taus:
        for g in gammas:
            w = np.array([single_poll_weight(t, tau, g, 0.05)[0] for t in days])
            if g > 0 and not np.all(np.diff(w) < 0):
                bad.append((tau, g))
            if g == 0 and not np.all(w == w[0]):
                bad.append((tau, g))
    record(4, not bad, f"single-poll weight over {len(grid)} (t, tau, gamma) points: "
                       f"{len(bad)} violations of strict decrease (gamma>0) / constancy (gamma=0)")


@given(st.floats(0.001, 0.1), st.floats(1e-4, 0.05), st.floats(0.005, 1.0),
       st.integers(0, 200), st.integers(1, 100))
@settings(max_examples=200)
def test_4b_weight_monotonicity_property(tau, gamma, sigma_alpha, t, dt):
    w1, _ = single_poll_weight(t, tau, gamma, sigma_alpha)
    w2, _ = single_poll_weight(t + dt, tau, gamma, sigma_alpha)
    w0, _ = single_poll_weight(t + dt, tau, 0.0, sigma_alpha)
    assert w2 < w1
    assert w0 == single_poll_weight(t, tau, 0.0, sigma_alpha)[0]


CALIBRATION_SIM = SimConfig(
    contests=50, true_alpha=Normal(-0.02, 0.01), true_tau=HalfNormal(0.01), true_gamma=HalfNormal(0.003),
    dynamics="random_walk", schedule=tuple(even_schedule(30, 60, n=800)), seed=20221108,
)
CALIBRATION_SAMPLER = SamplerConfig(chains=2, warmup_iters=400, sampling_iters=600, keep_latent=False)


def test_5_calibration():
    t0 = time.perf_counter()
    rep = recovery_experiment(CALIBRATION_SIM, ModelSpec("rw"), CALIBRATION_SAMPLER, reps=200)
    elapsed = time.perf_counter() - t0
    cov = rep.coverage("alpha")
    mu = rep.records[rep.records.quantity == "mu_alpha"]
    mu_pp = 100 * mu["mean"].mean()
    within = float(np.mean(np.abs(100 * mu["mean"] - (-2.0)) <= 0.5))
    ok = 0.90 <= cov <= 0.99 and abs(mu_pp - (-2.0)) <= 0.5 and elapsed <= 1800 and not rep.errors
    record(5, ok, f"200 reps x 50 contests x 30 polls: alpha 95% coverage {cov:.4f} (need [0.90, 0.99]), "
                  f"mean mu_alpha {mu_pp:+.3f} pp vs -2 pp (reps within 0.5 pp: {within:.3f}), "
                  f"{len(rep.errors)} failed reps, {elapsed / 60:.1f} min")


def test_6_misspecification():
    sim = SimConfig(contests=20, true_alpha=Normal(0.0, 0.01), true_tau=0.005, true_gamma=0.001,
                    dynamics="regime_shift", shift_day=30, shift_size=Uniform(0.03, 0.06),
                    schedule=tuple(even_schedule(60, 100, n=800)), seed=6)
    ds, _ = simulate_dataset(sim)
    specs = [ModelSpec("linear"), ModelSpec("rw")]
    sweep = window_sweep(ds, specs, DEFAULT_GRID, SamplerConfig(chains=2, warmup_iters=500, sampling_iters=500,
                                                                seed=6))
    cells = sweep.cells
    at100 = cells[cells["T"] == 100].groupby("model").moe_mean.mean()
    ratio = at100["linear"] / at100["rw"]
    paired = (cells[(cells.model == "linear") & (cells["T"] == 20)].moe_mean.mean()
            / cells[(cells.model == "rw") & (cells["T"] == 50)].moe_mean.mean())
    narrower = []
    for cid in sorted(cells.contest_id.unique()):
        lo3, hi3 = estimate_range(sweep, cid, "rw")
        lo2, hi2 = estimate_range(sweep, cid, "linear")
        narrower.append(hi3 - lo3 < hi2 - lo2)
    frac = float(np.mean(narrower))
    ok = ratio >= 1.5 and frac >= 0.70 and not sweep.failures
    record(6, ok, f"regime shift, 20 contests: mean excess MoE at T=100 M2 {at100['linear']:.2f} pp vs "
                  f"M3 {at100['rw']:.2f} pp (ratio {ratio:.2f}, need >= 1.5; M2@T=20 / M3@T=50 ratio "
                  f"{paired:.2f}); M3 range narrower for {frac:.0%} of contests (need >= 70%)")


def test_7_replication_data(tmp_path):
    root = os.environ.get("POLLERROR_REPLICATION_DIR")
    if not root or not (Path(root) / "polls.csv").exists():
        RESULTS.append("SKIP  [7] replication data absent (set POLLERROR_REPLICATION_DIR)")
        pytest.skip("replication data not supplied")
    root = Path(root)
    args = ["ingest", "--polls", str(root / "polls.csv"), "--results", str(root / "results.csv"),
            "--out-root", str(tmp_path / "ingest")]
    if (root / "mapping.json").exists():
        args += ["--mapping", str(root / "mapping.json")]
    assert cli_main(args) == 0
    ds = load_dataset(next((tmp_path / "ingest").iterdir()) / "dataset.json")
    cfg = SamplerConfig(chains=4, warmup_iters=1000, sampling_iters=1000, seed=7)
    joint = pooled_bias(fit(ModelSpec("rw"), filter_window(ds.restrict_years([2016, 2020]), 50), cfg))
    ok = -3.0 <= joint["mean"] <= -1.0
    parts = [f"2016+2020 joint: {joint['mean']:+.2f} pp [{joint['q2.5']:+.2f}, {joint['q97.5']:+.2f}]"]
    for year in (2016, 2020):
        s = pooled_bias(fit(ModelSpec("rw"), filter_window(ds.restrict_years([year]), 50), cfg))
        parts.append(f"{year} alone: {s['mean']:+.2f} pp")
    record(7, ok, "pooled M3 election-day error (T=50) " + "; ".join(parts) + " (joint mean must be in [-3, -1])")


@given(seed=st.integers(0, 2 ** 31), workers=st.sampled_from([2, 3]))
@settings(max_examples=3)
def test_8_determinism(tmp_path_factory, seed, workers):
    tmp = tmp_path_factory.mktemp("det")
    assert cli_main(["simulate", "--contests", "4", "--polls", "10", "--max-day", "40", "--seed", str(seed),
                     "--out-root", str(tmp / "sim")]) == 0
    data = next((tmp / "sim").iterdir()) / "dataset.json"
    mismatches = []
    for sub, extra in (("fit", ["--model", "all", "--window", "30"]), ("sweep", ["--grid", "20:40:20"])):
        code = cli_main([sub, "--data", str(data), *extra, "--chains", "2", "--iters", "60", "--warmup", "50",
                         "--seed", str(seed), "--workers", "1", "--out-root", str(tmp / sub)])
        manifest = next((tmp / sub).iterdir()) / "manifest.json"
        replay = cli_main(["replay", str(manifest), "--workers", str(workers), "--out-root", str(tmp / f"{sub}-r")])
        if code not in (0, 3) or replay != code:
            mismatches.append(sub)
    record(8, not mismatches, f"seed {seed}: fit and sweep replayed with {workers} workers, "
                              f"summary files bit-identical: {not mismatches}")
