"""Compare the linear-logit model at a short window with the random-walk
model at a longer one, contest by contest.

Works on any canonical dataset (from ``pollerror ingest`` or
``pollerror simulate``). The default pairing is linear at 20 days against
random walk at 50 days.

    python scripts/window_pairing.py runs/<ingest-run>/dataset.json --year 2016
"""
import argparse
from pathlib import Path

import pandas as pd

from pollerror import ModelSpec, SamplerConfig, filter_window, fit
from pollerror.ingest import load_dataset


def contest_table(res, label):
    s = res.summaries
    out = s[s.parameter.isin(["error_pp", "moe_pp"])].pivot(index="contest_id", columns="parameter",
                                                             values="mean")
    return out.add_prefix(f"{label}_")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("dataset", type=Path)
    ap.add_argument("--year", type=int, action="append")
    ap.add_argument("--linear-T", type=int, default=20)
    ap.add_argument("--rw-T", type=int, default=50)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--out", type=Path, default=Path("window_pairing.csv"))
    args = ap.parse_args()

    ds = load_dataset(args.dataset)
    if args.year:
        ds = ds.restrict_years(args.year)
    cfg = SamplerConfig(chains=4, warmup_iters=1000, sampling_iters=1000, seed=args.seed)
    lin = fit(ModelSpec("linear"), filter_window(ds, args.linear_T), cfg, window=args.linear_T)
    rw = fit(ModelSpec("rw"), filter_window(ds, args.rw_T), cfg, window=args.rw_T)
    table = pd.concat([contest_table(lin, f"linear_T{args.linear_T}"),
                       contest_table(rw, f"rw_T{args.rw_T}")], axis=1)
    table.to_csv(args.out)
    print(table.round(2).to_string())
    print("\ncolumn means:\n" + table.mean().round(3).to_string())


if __name__ == "__main__":
    main()
