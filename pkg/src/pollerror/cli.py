"""Command-line entry point: ingest, fit, sweep, simulate, oracle and replay.

Every run writes into a fresh directory under ``--out-root`` together with a
``manifest.json`` holding the fully resolved configuration, input digests and
output digests. ``pollerror replay manifest.json`` re-executes the run and
checks that every summary file comes out byte-identical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import pandas as pd

from . import __version__
from .analysis import DEFAULT_GRID, cell_seed, estimate_range, sign_flips, window_sweep
from .domain import InvalidPollError, PollDataset, WindowConfig, filter_window
from .ingest import (
    IngestError,
    RawPollRecord,
    build_dataset,
    load_dataset,
    load_mapping,
    parse_polls,
    parse_results,
    save_dataset,
    write_issues,
    write_polls_csv,
    write_results_csv,
)
from .models import FIXABLE, Family, HyperPriorConfig, ModelSpec
from .oracle import rw_alpha_posterior, static_alpha_posterior
from .sampler import SamplerConfig, SamplerError, fit
from .simulate import DYNAMICS, Normal, SimConfig, even_schedule, simulate_dataset

log = logging.getLogger("pollerror")

EXIT_OK = 0
EXIT_FATAL = 2
EXIT_CONVERGENCE = 3
RHAT_LIMIT = 1.05
MANIFEST = "manifest.json"


class ConfigError(ValueError):
    pass


@dataclass
class RunManifest:
    subcommand: str
    config: dict
    inputs: dict = field(default_factory=dict)  # name -> {"path", "sha256"}
    outputs: dict = field(default_factory=dict)  # file name -> sha256
    version: str = __version__
    created: str = ""
    exit_code: int = 0

    def to_dict(self) -> dict:
        return dict(vars(self))

    @classmethod
    def load(cls, path) -> "RunManifest":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(**d)
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def make_run_dir(root, label: str, seed: Optional[int]) -> Path:
    """New directory named by timestamp and seed; never reuses an existing one."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now().strftime("%Y%m%dT%H%M%S")
    base = f"{stamp}-{label}" + (f"-seed{seed}" if seed is not None else "")
    for k in range(10000):
        path = root / (base if k == 0 else f"{base}-{k}")
        try:
            path.mkdir()
            return path
        except FileExistsError:
            continue
    raise ConfigError(f"could not create a fresh run directory under {root}")


# ------------------------------------------------------------ config parsing


def parse_grid(text: str) -> list[int]:
    """``a:b:step`` (inclusive) or a comma list."""
    try:
        if ":" in text:
            a, b, step = (int(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError
            grid = list(range(a, b + 1, step))
        else:
            grid = [int(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}; expected a:b:step or a comma list") from exc
    if not grid:
        raise ConfigError(f"grid {text!r} is empty")
    return grid


def parse_per_model_T(text: str) -> dict[str, list[int]]:
    """``"M2=20,M3=50"``; several windows for one model are joined with ``|``."""
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise ConfigError(f"bad per-model window {part!r}; expected MODEL=T")
        name, val = part.split("=", 1)
        try:
            fam = Family.parse(name.strip())
            out[fam.value] = [int(x) for x in val.split("|")]
        except ValueError as exc:
            raise ConfigError(f"bad per-model window {part!r}: {exc}") from exc
    return out


def parse_fixed(items) -> dict[str, float]:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"bad --fix {item!r}; expected name=value")
        k, v = item.split("=", 1)
        if k not in FIXABLE:
            raise ConfigError(f"cannot fix {k!r}; choose from {FIXABLE}")
        out[k] = float(v)
    return out


def load_config_file(path) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object")
    return cfg


FIT_DEFAULTS = {
    "data": None, "model": "rw", "window": None, "chains": 4, "iters": 1000, "warmup": 1000,
    "seed": 20221108, "workers": None, "plug_in_likelihood": False, "year": None,
    "fixed": {}, "hyperpriors": {}, "joint_block": True,
}
SWEEP_DEFAULTS = {**FIT_DEFAULTS, "model": "all", "grid": list(DEFAULT_GRID), "per_model_T": {}}
SWEEP_DEFAULTS.pop("window")
SIM_DEFAULTS = {
    "contests": 20, "polls": 30, "max_day": 100, "sample_size": 800, "dynamics": "random_walk",
    "alpha_mean": -0.02, "alpha_sd": 0.01, "tau": 0.01, "gamma": 0.005, "drift": 0.0,
    "shift_day": 30, "shift_size": 0.04, "seed": 1, "year": 2000,
}
INGEST_DEFAULTS = {"polls": None, "results": None, "mapping": None}
ORACLE_DEFAULTS = {"data": None, "model": "static", "window": None, "year": None, "fixed": {}}
DEFAULTS = {"fit": FIT_DEFAULTS, "sweep": SWEEP_DEFAULTS, "simulate": SIM_DEFAULTS,
            "ingest": INGEST_DEFAULTS, "oracle": ORACLE_DEFAULTS}


def resolve_config(sub: str, args: argparse.Namespace) -> dict:
    """Flags over config file over defaults."""
    defaults = DEFAULTS[sub]
    file_cfg = load_config_file(getattr(args, "config", None))
    unknown = set(file_cfg) - set(defaults)
    if unknown:
        raise ConfigError(f"unknown {sub} config keys: {sorted(unknown)}")
    cfg = {**defaults, **file_cfg}
    for key in defaults:
        val = getattr(args, key, None)
        if val is None:
            continue
        if key == "grid" and isinstance(val, str):
            val = parse_grid(val)
        elif key == "per_model_T" and isinstance(val, str):
            val = parse_per_model_T(val)
        elif key == "fixed":
            val = {**cfg["fixed"], **parse_fixed(val)}
        cfg[key] = val
    for key in ("data", "polls", "results", "mapping"):
        if sub != "simulate" and cfg.get(key):
            cfg[key] = str(Path(cfg[key]).resolve())
    if "workers" in cfg and cfg["workers"] is None:
        cfg["workers"] = os.cpu_count() or 1
    return cfg


def _specs(cfg: dict) -> list[ModelSpec]:
    names = ["static", "linear", "rw"] if cfg["model"] == "all" else [cfg["model"]]
    try:
        hp = HyperPriorConfig(**cfg.get("hyperpriors", {}))
        return [ModelSpec(Family.parse(m), hp, dict(cfg.get("fixed", {})), bool(cfg.get("plug_in_likelihood")))
                for m in names]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad model configuration: {exc}") from exc


def _sampler(cfg: dict, seed: Optional[int] = None) -> SamplerConfig:
    try:
        return SamplerConfig(chains=int(cfg["chains"]), warmup_iters=int(cfg["warmup"]),
                             sampling_iters=int(cfg["iters"]), seed=int(cfg["seed"] if seed is None else seed),
                             workers=int(cfg["workers"]), joint_block=bool(cfg.get("joint_block", True)))
    except ValueError as exc:
        raise ConfigError(f"bad sampler configuration: {exc}") from exc


def _load(cfg: dict, inputs: dict) -> PollDataset:
    if not cfg.get("data"):
        raise ConfigError("--data is required")
    inputs["data"] = {"path": str(cfg["data"]), "sha256": sha256_file(cfg["data"])}
    ds = load_dataset(cfg["data"])
    if cfg.get("year") is not None:
        ds = ds.restrict_years([int(cfg["year"])])
        if not ds.contests:
            raise ConfigError(f"no contests in year {cfg['year']}")
    return ds


def _write_csv(df: pd.DataFrame, path: Path):
    df.to_csv(path, index=False, float_format="%.10g", lineterminator="\n")


def _write_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return None if not math.isfinite(x) else float(x)
    if isinstance(x, np.ndarray):
        return [_json_default(v) if isinstance(v, (np.floating, float)) else v for v in x.tolist()]
    raise TypeError(type(x))


def _nan_to_none(values):
    return [None if (v is None or (isinstance(v, float) and not math.isfinite(v))) else v for v in values]


# ----------------------------------------------------------------- commands


def cmd_ingest(cfg: dict, out: Path, inputs: dict) -> int:
    for key in ("polls", "results"):
        if not cfg.get(key):
            raise ConfigError(f"--{key} is required")
        inputs[key] = {"path": str(cfg[key]), "sha256": sha256_file(cfg[key])}
    mapping = None
    if cfg.get("mapping"):
        inputs["mapping"] = {"path": str(cfg["mapping"]), "sha256": sha256_file(cfg["mapping"])}
        mapping = load_mapping(cfg["mapping"])
    records, issues = parse_polls(cfg["polls"], mapping)
    ds = build_dataset(records, parse_results(cfg["results"], mapping))
    save_dataset(ds, out / "dataset.json")
    write_issues(issues, out / "issues.csv")
    counts = pd.Series([c.year for c in ds.contests for _ in ds.polls_for(c.contest_id)], dtype=int)
    _write_json({"contests": len(ds.contests), "polls": len(ds.polls), "issues": len(issues),
                 "polls_by_year": {str(k): int(v) for k, v in counts.value_counts().sort_index().items()}},
                out / "ingest_summary.json")
    print(f"ingested {len(ds.polls)} polls in {len(ds.contests)} contests; {len(issues)} rows rejected")
    return EXIT_OK


def cmd_fit(cfg: dict, out: Path, inputs: dict) -> int:
    ds = _load(cfg, inputs)
    if cfg.get("window") is not None:
        ds = filter_window(ds, WindowConfig(int(cfg["window"])))
    if not ds.polls:
        raise ConfigError("no polls left after windowing")
    warned = False
    specs = _specs(cfg)
    diagnostics = {}
    for spec in specs:
        seed = cell_seed(cfg["seed"], spec.family, cfg["window"]) if cfg.get("window") else cfg["seed"]
        res = fit(spec, ds, _sampler(cfg, seed), window=cfg.get("window"))
        suffix = "" if len(specs) == 1 else f"_{spec.family.value}"
        _write_csv(res.summaries, out / f"summary{suffix}.csv")
        if spec.has_walk and "theta" in res.draws:
            _write_csv(res.latent_summary(), out / f"latent{suffix}.csv")
        warnings = res.convergence_warnings(RHAT_LIMIT)
        warned |= bool(warnings)
        diagnostics[spec.family.value] = {
            "seed": seed,
            "convergence_warnings": warnings,
            "clamp_activations": res.metadata["clamp_activations"],
            "acceptance": res.metadata["acceptance"],
            "max_rhat": _nan_to_none([float(res.summaries.loc[res.summaries.free, "rhat"].max())])[0],
            "min_ess": float(res.summaries.loc[res.summaries.free, "ess"].min()),
        }
        for w in warnings:
            log.warning("%s: %s", spec.family.label, w)
    _write_json(diagnostics, out / "diagnostics.json")
    return EXIT_CONVERGENCE if warned else EXIT_OK


def cmd_sweep(cfg: dict, out: Path, inputs: dict) -> int:
    ds = _load(cfg, inputs)
    specs = _specs(cfg)
    grid = sorted(set(int(t) for t in cfg["grid"]))
    per_model = {Family.parse(k): v for k, v in (cfg.get("per_model_T") or {}).items()}
    sampler = _sampler(cfg)
    res = window_sweep(ds, specs, grid, sampler, workers=sampler.workers, per_model_T=per_model)
    if res.cells.empty:
        _write_json({"failures": res.failures}, out / "failures.json")
        raise ConfigError("every sweep cell failed")
    _write_csv(res.cells, out / "cells.csv")
    _write_csv(res.tidy(), out / "sweep_tidy.csv")
    rows = []
    for spec in specs:
        fam = spec.family.value
        est = res.estimates(fam)
        multi = est["T"].nunique() >= 2
        flips = sign_flips(res, fam) if multi else {}
        for cid in sorted(est.contest_id.unique()):
            lo, hi = estimate_range(res, cid, fam)
            rows.append({"contest_id": cid, "model": fam, "error_min": lo, "error_max": hi,
                         "range_width": hi - lo, "sign_flip": flips.get(cid) if multi else None})
    _write_csv(pd.DataFrame(rows), out / "ranges.csv")
    by_model = res.cells.groupby("model").agg(moe_mean=("moe_mean", "mean"), rhat_max=("rhat_max", "max"))
    summary = {
        "grid": grid,
        "per_model_T": {k.value: v for k, v in per_model.items()},
        "models": [s.to_dict() for s in specs],
        "seed": cfg["seed"],
        "cell_seeds": {f"{s.family.value}:{T}": cell_seed(cfg["seed"], s.family, T)
                       for s in specs for T in per_model.get(s.family, grid)},
        "mean_moe_pp": {m: float(r.moe_mean) for m, r in by_model.iterrows()},
        "rhat_max": {m: _nan_to_none([float(r.rhat_max)])[0] for m, r in by_model.iterrows()},
        "failures": res.failures,
    }
    _write_json(summary, out / "sweep_summary.json")
    bad = res.cells.rhat_max > RHAT_LIMIT
    if bad.any() or res.failures:
        log.warning("%d cells with R-hat > %.2f; %d failed cells", int(bad.sum()), RHAT_LIMIT, len(res.failures))
        return EXIT_CONVERGENCE
    return EXIT_OK


def election_day(year: int) -> date:
    """US general election: the Tuesday after the first Monday in November."""
    d = date(year, 11, 1)
    first_monday = d + timedelta(days=(0 - d.weekday()) % 7)
    return first_monday + timedelta(days=1)


def sim_config_from(cfg: dict) -> SimConfig:
    try:
        if cfg["dynamics"] not in DYNAMICS:
            raise ValueError(f"dynamics must be one of {DYNAMICS}")
        if cfg["polls"] < 1 or cfg["max_day"] < 1:
            raise ValueError("polls and max_day must be >= 1")
        alpha = Normal(cfg["alpha_mean"], cfg["alpha_sd"]) if cfg["alpha_sd"] > 0 else float(cfg["alpha_mean"])
        return SimConfig(
            contests=int(cfg["contests"]), true_alpha=alpha, true_tau=float(cfg["tau"]),
            true_gamma=float(cfg["gamma"]), dynamics=cfg["dynamics"],
            schedule=tuple(even_schedule(int(cfg["polls"]), int(cfg["max_day"]), int(cfg["sample_size"]))),
            seed=int(cfg["seed"]), drift=float(cfg["drift"]), shift_day=int(cfg["shift_day"]),
            shift_size=float(cfg["shift_size"]), year=int(cfg["year"]),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad simulation configuration: {exc}") from exc


def cmd_simulate(cfg: dict, out: Path, inputs: dict) -> int:
    sim = sim_config_from(cfg)
    ds, truth = simulate_dataset(sim)
    eday = election_day(sim.year)
    records = [
        RawPollRecord(state=ds.contests[ds.index[p.contest_id]].state, year=sim.year, election_date=eday,
                      field_end=eday - timedelta(days=p.t), rep_pct=100.0 * p.y, dem_pct=100.0 * (1.0 - p.y),
                      sample_size=p.n, field_start=eday - timedelta(days=p.t))
        for p in ds.polls
    ]
    write_polls_csv(records, out / "polls.csv")
    write_results_csv({(c.state, c.year): c.v for c in ds.contests}, out / "results.csv")
    save_dataset(ds, out / "dataset.json")
    truth_doc = {
        "config": sim.to_dict(),
        "contest_ids": truth.contest_ids,
        "v": truth.v.tolist(),
        "alpha": truth.alpha.tolist(),
        "tau": truth.tau.tolist(),
        "gamma": truth.gamma.tolist(),
        "beta": None if truth.beta is None else truth.beta.tolist(),
        "theta": [_nan_to_none(row) for row in truth.theta.tolist()],
        "mu_alpha": truth.mu_alpha,
        "sigma_alpha": truth.sigma_alpha,
        "error_pp": truth.error_pp().tolist(),
        "truncated": truth.truncated,
    }
    _write_json(truth_doc, out / "truth.json")
    print(f"simulated {len(ds.polls)} polls in {len(ds.contests)} contests ({sim.dynamics})")
    return EXIT_OK


def cmd_oracle(cfg: dict, out: Path, inputs: dict) -> int:
    """Closed-form alpha posteriors at fixed tau (and gamma) for each contest."""
    ds = _load(cfg, inputs)
    if cfg.get("window") is not None:
        ds = filter_window(ds, WindowConfig(int(cfg["window"])))
    fam = Family.parse(cfg["model"])
    fx = cfg.get("fixed", {})
    need = ["tau", "mu_alpha", "sigma_alpha"] + (["gamma"] if fam is Family.RANDOM_WALK else [])
    missing = [k for k in need if k not in fx]
    if fam is Family.LINEAR or missing:
        raise ConfigError(f"oracle covers static and rw models with {need} fixed; missing {missing}")
    rows = []
    for c in ds.contests:
        polls = ds.polls_for(c.contest_id)
        if not polls:
            continue
        ys = [p.y for p in polls]
        if fam is Family.STATIC:
            post = static_alpha_posterior(ys, c.v, fx["tau"], fx["mu_alpha"], fx["sigma_alpha"])
        else:
            post = rw_alpha_posterior(ys, [p.t for p in polls], c.v, fx["tau"], fx["gamma"],
                                      fx["mu_alpha"], fx["sigma_alpha"])
        rows.append({"contest_id": c.contest_id, "mean": post.mean, "sd": post.sd})
    _write_csv(pd.DataFrame(rows, columns=["contest_id", "mean", "sd"]), out / "oracle.csv")
    return EXIT_OK


COMMANDS: dict[str, Callable[[dict, Path, dict], int]] = {
    "ingest": cmd_ingest, "fit": cmd_fit, "sweep": cmd_sweep, "simulate": cmd_simulate, "oracle": cmd_oracle,
}


def execute(sub: str, cfg: dict, out_root, inputs_check: Optional[dict] = None) -> tuple[int, Path, RunManifest]:
    """Run one resolved subcommand into a fresh directory and write its manifest."""
    out = make_run_dir(out_root, sub, cfg.get("seed"))
    inputs: dict = {}
    manifest = RunManifest(subcommand=sub, config=cfg, created=datetime.now().isoformat(timespec="seconds"))
    code = COMMANDS[sub](cfg, out, inputs)
    if inputs_check is not None:
        for name, rec in inputs_check.items():
            if inputs.get(name, {}).get("sha256") != rec["sha256"]:
                raise ConfigError(f"input {name!r} ({rec['path']}) changed since the original run")
    manifest.inputs = inputs
    manifest.outputs = {p.name: sha256_file(p) for p in sorted(out.iterdir()) if p.name != MANIFEST}
    manifest.exit_code = code
    _write_json(manifest.to_dict(), out / MANIFEST)
    return code, out, manifest


def cmd_replay(manifest_path, out_root, workers: Optional[int]) -> int:
    orig = RunManifest.load(manifest_path)
    if orig.subcommand not in COMMANDS:
        raise ConfigError(f"manifest names unknown subcommand {orig.subcommand!r}")
    cfg = dict(orig.config)
    if workers is not None and "workers" in cfg:
        cfg["workers"] = workers  # output does not depend on it
    if orig.version != __version__:
        log.warning("manifest written by version %s, replaying with %s", orig.version, __version__)
    for name, rec in orig.inputs.items():
        if sha256_file(rec["path"]) != rec["sha256"]:
            raise ConfigError(f"input {name!r} ({rec['path']}) changed since the original run")
    code, out, new = execute(orig.subcommand, cfg, out_root, orig.inputs)
    diff = sorted(k for k in set(orig.outputs) | set(new.outputs) if orig.outputs.get(k) != new.outputs.get(k))
    if diff:
        print(f"replay in {out} differs from the original in: {', '.join(diff)}", file=sys.stderr)
        return EXIT_FATAL
    print(f"replay in {out}: all {len(new.outputs)} output files identical")
    return code


# ------------------------------------------------------------------- parser


def _add_sampler_flags(p: argparse.ArgumentParser):
    p.add_argument("--data", help="canonical dataset JSON (from ingest or simulate)")
    p.add_argument("--model", choices=["static", "linear", "rw", "all"])
    p.add_argument("--chains", type=int)
    p.add_argument("--iters", type=int, help="post-warmup draws per chain")
    p.add_argument("--warmup", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int, help="parallel processes (default: all cores)")
    p.add_argument("--plug-in-likelihood", dest="plug_in_likelihood", action="store_true", default=None)
    p.add_argument("--year", type=int, help="restrict to contests in one election year")
    p.add_argument("--fix", dest="fixed", action="append", metavar="NAME=VALUE",
                   help="hold a parameter at a value (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pollerror", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file of option values (flags take precedence)")
        p.add_argument("--out-root", default="runs", help="parent directory for run directories")

    p = sub.add_parser("ingest", help="parse poll and result files into a dataset")
    common(p)
    p.add_argument("--polls")
    p.add_argument("--results")
    p.add_argument("--mapping", help="JSON column mapping")

    p = sub.add_parser("fit", help="fit one or more models at one window")
    common(p)
    _add_sampler_flags(p)
    p.add_argument("--window", type=int, help="inclusion window T in days")

    p = sub.add_parser("sweep", help="refit across a grid of inclusion windows")
    common(p)
    _add_sampler_flags(p)
    p.add_argument("--grid", help="a:b:step, default 10:100:10")
    p.add_argument("--per-model-T", dest="per_model_T", help='e.g. "M2=20,M3=50"')

    p = sub.add_parser("simulate", help="generate a synthetic dataset with known truth")
    common(p)
    p.add_argument("--contests", type=int)
    p.add_argument("--polls", type=int, help="polls per contest")
    p.add_argument("--max-day", dest="max_day", type=int)
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--dynamics", choices=DYNAMICS)
    p.add_argument("--alpha-mean", dest="alpha_mean", type=float)
    p.add_argument("--alpha-sd", dest="alpha_sd", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--drift", type=float, help="logit slope per day (linear_drift)")
    p.add_argument("--shift-day", dest="shift_day", type=int)
    p.add_argument("--shift-size", dest="shift_size", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--year", type=int)

    p = sub.add_parser("oracle", help="closed-form alpha posteriors at fixed variances")
    common(p)
    p.add_argument("--data")
    p.add_argument("--model", choices=["static", "rw"])
    p.add_argument("--window", type=int)
    p.add_argument("--year", type=int)
    p.add_argument("--fix", dest="fixed", action="append", metavar="NAME=VALUE")

    p = sub.add_parser("replay", help="re-run a manifest and compare outputs")
    p.add_argument("manifest")
    p.add_argument("--out-root", default="runs")
    p.add_argument("--workers", type=int)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.subcommand == "replay":
            return cmd_replay(args.manifest, args.out_root, args.workers)
        cfg = resolve_config(args.subcommand, args)
        code, out, _ = execute(args.subcommand, cfg, args.out_root)
        print(f"outputs in {out}")
        if code == EXIT_CONVERGENCE:
            print(f"warning: R-hat above {RHAT_LIMIT} for some parameters; see diagnostics", file=sys.stderr)
        return code
    except (ConfigError, IngestError, InvalidPollError, SamplerError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FATAL


if __name__ == "__main__":
    sys.exit(main())
