"""CSV/JSONL persistence formats and timestamp handling."""
from __future__ import annotations

from datetime import date, datetime, timezone

import pytest

from disclosure_index.elo import Firm, ReplayOrderError
from disclosure_index.votelog import (
    format_timestamp,
    parse_timestamp,
    read_firms_csv,
    read_ranking_csv,
    read_vote_log,
    vote_log_line,
    write_firms_csv,
    write_ranking_csv,
    write_vote_log,
)

from helpers import make_event


def test_timestamp_round_trip():
    ts = datetime(2016, 10, 6, 15, 30, 0, tzinfo=timezone.utc)
    assert parse_timestamp(format_timestamp(ts)) == ts


def test_parse_timestamp_accepts_zulu_suffix():
    ts = parse_timestamp("2016-10-06T15:30:00Z")
    assert ts == datetime(2016, 10, 6, 15, 30, 0, tzinfo=timezone.utc)


def test_parse_timestamp_naive_is_utc():
    ts = parse_timestamp("2016-10-06T15:30:00")
    assert ts.tzinfo == timezone.utc


def test_vote_log_round_trip(tmp_path):
    events = [make_event(i + 1, "A", "B", "A") for i in range(5)]
    path = tmp_path / "votes.csv"
    write_vote_log(path, events, comments=["generated for a test"])
    assert read_vote_log(path) == events
    # comment lines survive as comments, not data
    assert path.read_text().startswith("# generated for a test\n")


def test_vote_log_line_matches_writer(tmp_path):
    event = make_event(1, "A", "B", "B")
    path = tmp_path / "votes.csv"
    write_vote_log(path, [])
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(vote_log_line(event))
    assert read_vote_log(path) == [event]


def test_vote_log_rejects_bad_header(tmp_path):
    path = tmp_path / "votes.csv"
    path.write_text("seq,when,who\n")
    with pytest.raises(ValueError):
        read_vote_log(path)


def test_vote_log_rejects_gaps(tmp_path):
    events = [make_event(1, "A", "B", "A"), make_event(3, "A", "B", "A")]
    path = tmp_path / "votes.csv"
    write_vote_log(path, events)
    with pytest.raises(ReplayOrderError):
        read_vote_log(path)


def test_ranking_round_trip(tmp_path):
    rows = [("F2", 1512.48, 1), ("F1", 1487.5201, 2)]
    firms = {
        "F1": Firm(firm_id="F1", ticker="AAA", name="Alpha"),
        "F2": Firm(firm_id="F2", ticker="BBB", name="Beta"),
    }
    path = tmp_path / "ranking.csv"
    write_ranking_csv(path, rows, firms=firms)
    loaded = read_ranking_csv(path)
    assert loaded == [(1, "F2", "BBB", 1512.48), (2, "F1", "AAA", 1487.5201)]


def test_ranking_serializes_four_decimals(tmp_path):
    path = tmp_path / "ranking.csv"
    write_ranking_csv(path, [("F1", 1500.123456, 1)])
    assert "1500.1235" in path.read_text()


def test_firms_round_trip(tmp_path):
    firms = [
        Firm(firm_id="F1", ticker="AAA", name="Alpha",
             active_from=date(2016, 1, 1), active_to=date(2018, 1, 1)),
        Firm(firm_id="F2", ticker="BBB", name="Beta"),
    ]
    path = tmp_path / "firms.csv"
    write_firms_csv(path, firms)
    assert read_firms_csv(path) == firms


def test_firms_duplicate_id_rejected(tmp_path):
    path = tmp_path / "firms.csv"
    path.write_text(
        "firm_id,ticker,name,active_from,active_to\n"
        "F1,AAA,Alpha,,\n"
        "F1,BBB,Beta,,\n"
    )
    with pytest.raises(ValueError):
        read_firms_csv(path)
