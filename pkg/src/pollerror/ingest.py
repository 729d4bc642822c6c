"""Poll and election-result file parsing into a validated PollDataset."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, fields
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .domain import ElectionContest, InvalidPollError, Poll, PollDataset, contest_id_for, two_party_share


class IngestError(Exception):
    """Fatal problem with an input file or mapping."""


@dataclass(frozen=True)
class RawPollRecord:
    state: str
    year: int
    election_date: date
    field_end: date
    rep_pct: float
    dem_pct: float
    sample_size: int
    field_start: Optional[date] = None
    pollster: Optional[str] = None
    row: int = 0


@dataclass(frozen=True)
class Issue:
    row: int
    field: str
    reason: str


POLL_FIELDS = ("state", "year", "election_date", "field_start", "field_end",
               "rep_pct", "dem_pct", "sample_size", "pollster")
POLL_REQUIRED = ("state", "year", "election_date", "field_end", "rep_pct", "dem_pct", "sample_size")
RESULT_FIELDS = ("state", "year", "rep_votes", "dem_votes")


def load_mapping(path) -> dict:
    """Read a column-mapping file: ``{"polls": {field: column}, "results": {...}}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IngestError(f"cannot read mapping file {path}: {exc}") from exc
    for section, known in (("polls", POLL_FIELDS), ("results", RESULT_FIELDS)):
        for key in m.get(section, {}):
            if key not in known:
                raise IngestError(f"mapping section {section!r} names unknown field {key!r}")
    return m


def _open_rows(path, mapping: Mapping[str, str], known: tuple, required: tuple):
    try:
        fh = open(path, newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames
        if not header:
            raise IngestError(f"{path}: missing header row")
        cols = {f: mapping.get(f, f) for f in known}
        for f, col in mapping.items():
            if col not in header:
                raise IngestError(f"{path}: mapped column {col!r} (for {f}) not in header")
        missing = [f for f in required if cols[f] not in header]
        if missing:
            raise IngestError(f"{path}: missing required columns {missing}")
        rows = []
        for lineno, raw in enumerate(reader, start=2):
            rows.append((lineno, {f: (raw.get(c) or "").strip() for f, c in cols.items() if c in header}))
    return rows


def parse_polls(path, mapping: Optional[Mapping] = None) -> tuple[list[RawPollRecord], list[Issue]]:
    """Parse a poll file; every rejected row yields an Issue."""
    colmap = (mapping or {}).get("polls", {})
    rows = _open_rows(path, colmap, POLL_FIELDS, POLL_REQUIRED)
    records, issues = [], []
    for lineno, r in rows:
        rec, problem = _parse_poll_row(lineno, r)
        if problem:
            issues.append(problem)
        else:
            records.append(rec)
    return records, issues


def _parse_poll_row(lineno: int, r: dict):
    def bad(field, reason):
        return None, Issue(lineno, field, reason)

    if not r.get("state"):
        return bad("state", "missing state")
    try:
        year = int(r["year"])
    except ValueError:
        return bad("year", "unparseable year")
    dates = {}
    for f in ("election_date", "field_end", "field_start"):
        val = r.get(f, "")
        if not val:
            dates[f] = None
            continue
        try:
            dates[f] = date.fromisoformat(val)
        except ValueError:
            return bad(f, f"unparseable date {val!r}")
    if dates["election_date"] is None:
        return bad("election_date", "missing election date")
    if dates["field_end"] is None:
        return bad("field_end", "missing field end date")
    if r["rep_pct"] == "" or r["dem_pct"] == "":
        return bad("rep_pct" if r["rep_pct"] == "" else "dem_pct", "missing candidate share")
    try:
        rep, dem = float(r["rep_pct"]), float(r["dem_pct"])
    except ValueError:
        return bad("rep_pct", "unparseable candidate share")
    if not (math.isfinite(rep) and math.isfinite(dem)) or rep < 0 or dem < 0:
        return bad("rep_pct", "negative or non-finite candidate share")
    if rep + dem <= 0:
        return bad("rep_pct", "no two-party support")
    try:
        size = float(r["sample_size"])
    except ValueError:
        return bad("sample_size", "unparseable sample size")
    if not size >= 1 or size != int(size):
        return bad("sample_size", "sample size must be a positive integer")
    if dates["field_end"] > dates["election_date"]:
        return bad("field_end", "post-election field date")
    if dates["field_start"] and dates["field_start"] > dates["field_end"]:
        return bad("field_start", "field start after field end")
    return RawPollRecord(
        state=r["state"], year=year, election_date=dates["election_date"],
        field_end=dates["field_end"], rep_pct=rep, dem_pct=dem, sample_size=int(size),
        field_start=dates["field_start"], pollster=r.get("pollster") or None, row=lineno,
    ), None


def write_polls_csv(records: Iterable[RawPollRecord], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(POLL_FIELDS)
        for rec in records:
            w.writerow([
                rec.state, rec.year, rec.election_date.isoformat(),
                rec.field_start.isoformat() if rec.field_start else "",
                rec.field_end.isoformat(), repr(rec.rep_pct), repr(rec.dem_pct),
                rec.sample_size, rec.pollster or "",
            ])


def parse_results(path, mapping: Optional[Mapping] = None) -> dict[tuple[str, int], float]:
    """Two-party Republican share for every (state, year) in a results file."""
    colmap = (mapping or {}).get("results", {})
    rows = _open_rows(path, colmap, RESULT_FIELDS, RESULT_FIELDS)
    out = {}
    for lineno, r in rows:
        try:
            key = (r["state"], int(r["year"]))
            v = two_party_share(float(r["rep_votes"]), float(r["dem_votes"]))
        except (ValueError, InvalidPollError) as exc:
            raise IngestError(f"{path}:{lineno}: bad result row ({exc})") from exc
        if key in out:
            raise IngestError(f"{path}:{lineno}: duplicate result for {key}")
        if not 0 < v < 1:
            raise IngestError(f"{path}:{lineno}: two-party result {v} outside (0, 1)")
        out[key] = v
    return out


def write_results_csv(results: Mapping[tuple[str, int], float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_FIELDS)
        for (state, year), v in results.items():
            w.writerow([state, year, repr(100.0 * v), repr(100.0 * (1.0 - v))])


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def poll_day(rec: RawPollRecord) -> int:
    """Days before the election of the field period's midpoint, rounded down."""
    start = rec.field_start or rec.field_end
    t_start = (rec.election_date - start).days
    t_end = (rec.election_date - rec.field_end).days
    return (t_start + t_end) // 2


def two_party_n(rec: RawPollRecord) -> int:
    frac = min((rec.rep_pct + rec.dem_pct) / 100.0, 1.0)
    return max(1, round_half_up(rec.sample_size * frac))


def build_dataset(records: Iterable[RawPollRecord], results) -> PollDataset:
    """Join polls to results. ``results`` is a path or a {(state, year): v} map."""
    if not isinstance(results, Mapping):
        results = parse_results(results)
    records = list(records)
    missing = sorted({(r.state, r.year) for r in records} - set(results))
    if missing:
        raise IngestError("no election result for: " + ", ".join(f"{s} {y}" for s, y in missing))
    contests = [ElectionContest(contest_id_for(s, y), s, y, v) for (s, y), v in sorted(results.items())]
    polls = [
        Poll(contest_id_for(r.state, r.year), poll_day(r), two_party_share(r.rep_pct, r.dem_pct),
             two_party_n(r), r.pollster)
        for r in records
    ]
    return PollDataset(contests, polls)


# ------------------------------------------------------- canonical dataset


def dataset_to_dict(ds: PollDataset) -> dict:
    return {
        "contests": [asdict(c) for c in ds.contests],
        "polls": [asdict(p) for p in ds.polls],
    }


def dataset_from_dict(d: Mapping) -> PollDataset:
    contests = [ElectionContest(**c) for c in d["contests"]]
    polls = [Poll(**p) for p in d["polls"]]
    return PollDataset(contests, polls)


def save_dataset(ds: PollDataset, path) -> None:
    Path(path).write_text(json.dumps(dataset_to_dict(ds), indent=1), encoding="utf-8")


def load_dataset(path) -> PollDataset:
    try:
        d = json.loads(Path(path).read_text(encoding="utf-8"))
        return dataset_from_dict(d)
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise IngestError(f"cannot load dataset {path}: {exc}") from exc
    except InvalidPollError as exc:
        raise IngestError(f"invalid dataset {path}: {exc}") from exc


def write_issues(issues: Iterable[Issue], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([f.name for f in fields(Issue)])
        for i in issues:
            w.writerow([i.row, i.field, i.reason])
