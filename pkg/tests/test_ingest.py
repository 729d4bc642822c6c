import json
from datetime import date

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pollerror import filter_window
from pollerror.ingest import (
    IngestError,
    RawPollRecord,
    build_dataset,
    load_dataset,
    load_mapping,
    parse_polls,
    parse_results,
    poll_day,
    round_half_up,
    save_dataset,
    two_party_n,
    write_issues,
    write_polls_csv,
    write_results_csv,
)

HEADER = "state,year,election_date,field_start,field_end,rep_pct,dem_pct,sample_size,pollster\n"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


@pytest.fixture
def results_file(tmp_path):
    return _write(tmp_path, "results.csv", "state,year,rep_votes,dem_votes\nPA,2008,2586496,3276363\nOH,2008,2677820,2940044\n")


def test_well_formed_file(tmp_path):
    p = _write(tmp_path, "polls.csv", HEADER
               + "PA,2008,2008-11-04,2008-10-20,2008-10-22,46,44,1000,Alpha\n"
               + "PA,2008,2008-11-04,,2008-11-01,45,50,600,\n"
               + "OH,2008,2008-11-04,2008-09-01,2008-09-03,48,47,800,Beta\n")
    recs, issues = parse_polls(p)
    assert len(recs) == 3 and issues == []
    assert recs[0].pollster == "Alpha" and recs[1].field_start is None and recs[1].pollster is None


@pytest.mark.parametrize("row,reason", [
    ("PA,2008,2008-11-04,,2008-10-22,0,0,1000,", "no two-party support"),
    ("PA,2008,2008-11-04,,2008-11-05,45,45,1000,", "post-election field date"),
    ("PA,2008,2008-11-04,,2008-10-22,,45,1000,", "missing candidate share"),
    ("PA,2008,2008-11-04,,2008-13-22,45,45,1000,", "unparseable date"),
    ("PA,2008,2008-11-04,2008-10-25,2008-10-22,45,45,1000,", "field start after field end"),
    ("PA,2008,2008-11-04,,2008-10-22,45,45,0,", "sample size"),
    ("PA,20x8,2008-11-04,,2008-10-22,45,45,10,", "unparseable year"),
])
def test_bad_rows_become_issues(tmp_path, row, reason):
    p = _write(tmp_path, "polls.csv", HEADER + row + "\n" + "PA,2008,2008-11-04,,2008-10-22,46,44,1000,\n")
    recs, issues = parse_polls(p)
    assert len(recs) == 1 and len(issues) == 1
    assert reason in issues[0].reason and issues[0].row == 2


def test_fatal_file_problems(tmp_path):
    with pytest.raises(IngestError):
        parse_polls(tmp_path / "missing.csv")
    with pytest.raises(IngestError, match="missing required"):
        parse_polls(_write(tmp_path, "p.csv", "state,year\nPA,2008\n"))
    with pytest.raises(IngestError, match="header"):
        parse_polls(_write(tmp_path, "e.csv", ""))


def test_mapping(tmp_path):
    p = _write(tmp_path, "polls.csv", "st,yr,eday,end,r,d,n\nPA,2008,2008-11-04,2008-10-22,46,44,1000\n")
    m = _write(tmp_path, "map.json", json.dumps({"polls": {"state": "st", "year": "yr", "election_date": "eday",
                                                          "field_end": "end", "rep_pct": "r", "dem_pct": "d",
                                                          "sample_size": "n"}}))
    recs, issues = parse_polls(p, load_mapping(m))
    assert len(recs) == 1 and recs[0].sample_size == 1000
    bad = _write(tmp_path, "bad.json", json.dumps({"polls": {"colour": "x"}}))
    with pytest.raises(IngestError, match="unknown field"):
        load_mapping(bad)
    absent = _write(tmp_path, "absent.json", json.dumps({"polls": {"state": "nope"}}))
    with pytest.raises(IngestError, match="not in header"):
        parse_polls(p, load_mapping(absent))


def _rec(**kw):
    base = dict(state="PA", year=2008, election_date=date(2008, 11, 4), field_end=date(2008, 10, 21),
                rep_pct=46.0, dem_pct=44.0, sample_size=1000, field_start=date(2008, 10, 19))
    return RawPollRecord(**(base | kw))


def test_derived_quantities():
    # fielded 14..16 days out, the median day is 15; 12..14 gives 13
    assert poll_day(_rec()) == 15
    assert poll_day(_rec(field_start=date(2008, 10, 21), field_end=date(2008, 10, 23))) == 13
    assert poll_day(_rec(field_start=date(2008, 10, 21), field_end=date(2008, 10, 22))) == 13  # floor of 13.5
    assert two_party_n(_rec()) == 900
    assert two_party_n(_rec(rep_pct=0.01, dem_pct=0.01, sample_size=10)) == 1
    assert two_party_n(_rec(rep_pct=60.0, dem_pct=45.0)) == 1000
    assert round_half_up(2.5) == 3 and round_half_up(3.5) == 4


def test_build_dataset(results_file):
    ds = build_dataset([_rec(), _rec(state="OH", rep_pct=48, dem_pct=47)], results_file)
    assert len(ds.contests) == 2
    pa = ds.polls_for("PA-2008")[0]
    assert pa.y == pytest.approx(0.5111, abs=1e-4) and pa.n == 900 and pa.t == 15
    assert ds.contests[ds.index["PA-2008"]].v == pytest.approx(2586496 / (2586496 + 3276363))


def test_contest_without_polls_retained(results_file):
    ds = build_dataset([_rec()], results_file)
    assert ds.poll_counts() == {"OH-2008": 0, "PA-2008": 1}


def test_missing_result_is_fatal(results_file):
    with pytest.raises(IngestError, match="FL 2008"):
        build_dataset([_rec(state="FL")], results_file)


def test_results_file_errors(tmp_path):
    with pytest.raises(IngestError, match="duplicate"):
        parse_results(_write(tmp_path, "r.csv", "state,year,rep_votes,dem_votes\nPA,2008,1,1\nPA,2008,2,2\n"))
    with pytest.raises(IngestError):
        parse_results(_write(tmp_path, "r2.csv", "state,year,rep_votes,dem_votes\nPA,2008,0,0\n"))


records = st.builds(
    _rec,
    state=st.sampled_from(["PA", "OH"]),
    rep_pct=st.floats(0.5, 99, allow_nan=False).map(lambda x: round(x, 3)),
    dem_pct=st.floats(0.5, 99, allow_nan=False).map(lambda x: round(x, 3)),
    sample_size=st.integers(1, 5000),
    field_end=st.dates(date(2008, 7, 1), date(2008, 11, 4)),
    field_start=st.none(),
)


@given(st.lists(records, max_size=15))
def test_parse_serialize_roundtrip(tmp_path_factory, recs):
    d = tmp_path_factory.mktemp("rt")
    write_polls_csv(recs, d / "polls.csv")
    back, issues = parse_polls(d / "polls.csv")
    assert issues == []
    strip = lambda r: r.__class__(**{**vars(r), "row": 0})
    assert [strip(r) for r in back] == [strip(r) for r in recs]


def test_dataset_json_roundtrip_and_year_counts(tmp_path, results_file):
    recs = [_rec(), _rec(field_end=date(2008, 8, 1), field_start=None), _rec(state="OH")]
    ds = build_dataset(recs, results_file)
    save_dataset(ds, tmp_path / "d.json")
    assert load_dataset(tmp_path / "d.json") == ds
    by_year = {}
    for c in ds.contests:
        by_year[c.year] = by_year.get(c.year, 0) + len(filter_window(ds, 100).polls_for(c.contest_id))
    assert sum(by_year.values()) == len(filter_window(ds, 100).polls)
    with pytest.raises(IngestError):
        load_dataset(_write(tmp_path, "bad.json", "{"))


def test_issue_report_and_results_roundtrip(tmp_path):
    from pollerror.ingest import Issue
    write_issues([Issue(3, "rep_pct", "no two-party support")], tmp_path / "issues.csv")
    assert (tmp_path / "issues.csv").read_text().splitlines() == ["row,field,reason", "3,rep_pct,no two-party support"]
    write_results_csv({("PA", 2008): 0.45}, tmp_path / "res.csv")
    assert parse_results(tmp_path / "res.csv")[("PA", 2008)] == pytest.approx(0.45, abs=1e-15)
