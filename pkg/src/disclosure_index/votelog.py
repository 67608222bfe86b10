"""File formats shared across the pipeline: vote log, rankings, firms.

All CSVs are UTF-8 with a header row.  Lines starting with ``#`` are
metadata comments (tool version, parameters) and are skipped on read.
Ratings are serialized with 4 decimal places.
"""
from __future__ import annotations

import csv
import io
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence, TextIO

from .elo import ContractViolationError, Firm, ReplayOrderError, VoteEvent

VOTE_LOG_HEADER = [
    "seq", "timestamp_iso8601", "session_id", "analyst_id",
    "firm_a", "firm_b", "winner",
]
RANKING_HEADER = ["rank", "firm_id", "ticker", "rating"]
FIRMS_HEADER = ["firm_id", "ticker", "name", "active_from", "active_to"]


def parse_timestamp(raw: str) -> datetime:
    """Parse an ISO-8601 instant, accepting a trailing Z for UTC."""
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts


def format_timestamp(ts: datetime) -> str:
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).isoformat()


def _data_rows(handle: TextIO) -> Iterable[list[str]]:
    for row in csv.reader(line for line in handle if not line.startswith("#")):
        if row:
            yield row


def _check_header(row: list[str], expected: list[str], what: str) -> None:
    if row != expected:
        raise ContractViolationError(
            f"{what} header mismatch: expected {expected}, got {row}"
        )


def read_vote_log(path: str | Path) -> list[VoteEvent]:
    """Load and validate a vote-log CSV (seq must be gapless from 1)."""
    events: list[VoteEvent] = []
    with open(path, newline="", encoding="utf-8") as handle:
        rows = _data_rows(handle)
        _check_header(next(rows, []), VOTE_LOG_HEADER, "vote log")
        for row in rows:
            seq, ts, session_id, analyst_id, firm_a, firm_b, winner = row
            events.append(
                VoteEvent(
                    seq=int(seq),
                    timestamp=parse_timestamp(ts),
                    session_id=session_id,
                    analyst_id=analyst_id,
                    firm_a=firm_a,
                    firm_b=firm_b,
                    winner=winner,
                )
            )
    for i, event in enumerate(events):
        if event.seq != i + 1:
            raise ReplayOrderError(
                f"vote log {path}: position {i} holds seq {event.seq}"
            )
    return events


def write_vote_log(
    target: str | Path | TextIO,
    events: Iterable[VoteEvent],
    comments: Sequence[str] = (),
) -> None:
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as handle:
            write_vote_log(handle, events, comments)
        return
    for comment in comments:
        target.write(f"# {comment}\n")
    writer = csv.writer(target)
    writer.writerow(VOTE_LOG_HEADER)
    for e in events:
        writer.writerow(
            [e.seq, format_timestamp(e.timestamp), e.session_id, e.analyst_id,
             e.firm_a, e.firm_b, e.winner]
        )


def vote_log_line(event: VoteEvent) -> str:
    """One CSV data line (with newline) for appending to a live log."""
    buf = io.StringIO()
    csv.writer(buf).writerow(
        [event.seq, format_timestamp(event.timestamp), event.session_id,
         event.analyst_id, event.firm_a, event.firm_b, event.winner]
    )
    return buf.getvalue()


def write_ranking_csv(
    target: str | Path | TextIO,
    rows: Iterable[tuple[str, float, int]],
    firms: dict[str, Firm] | None = None,
    comments: Sequence[str] = (),
) -> None:
    """Write ranking rows ``(firm_id, rating, rank)`` as rank,firm_id,ticker,rating."""
    if isinstance(target, (str, Path)):
        with open(target, "w", newline="", encoding="utf-8") as handle:
            write_ranking_csv(handle, rows, firms, comments)
        return
    for comment in comments:
        target.write(f"# {comment}\n")
    writer = csv.writer(target)
    writer.writerow(RANKING_HEADER)
    for firm_id, rating, rank in rows:
        ticker = firms[firm_id].ticker if firms and firm_id in firms else ""
        writer.writerow([rank, firm_id, ticker, f"{rating:.4f}"])


def read_ranking_csv(path: str | Path) -> list[tuple[int, str, str, float]]:
    """Load ranking rows as ``(rank, firm_id, ticker, rating)``."""
    out: list[tuple[int, str, str, float]] = []
    with open(path, newline="", encoding="utf-8") as handle:
        rows = _data_rows(handle)
        _check_header(next(rows, []), RANKING_HEADER, "ranking")
        for rank, firm_id, ticker, rating in rows:
            out.append((int(rank), firm_id, ticker, float(rating)))
    return out


def _parse_date(raw: str) -> date | None:
    raw = raw.strip()
    return date.fromisoformat(raw) if raw else None


def read_firms_csv(path: str | Path) -> list[Firm]:
    """Load the firm universe: firm_id,ticker,name,active_from,active_to."""
    firms: list[Firm] = []
    seen: set[str] = set()
    with open(path, newline="", encoding="utf-8") as handle:
        rows = _data_rows(handle)
        _check_header(next(rows, []), FIRMS_HEADER, "firms")
        for firm_id, ticker, name, active_from, active_to in rows:
            if firm_id in seen:
                raise ContractViolationError(f"duplicate firm_id {firm_id!r}")
            seen.add(firm_id)
            firms.append(
                Firm(
                    firm_id=firm_id,
                    ticker=ticker,
                    name=name,
                    active_from=_parse_date(active_from),
                    active_to=_parse_date(active_to),
                )
            )
    return firms


def write_firms_csv(path: str | Path, firms: Iterable[Firm]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(FIRMS_HEADER)
        for f in firms:
            writer.writerow(
                [f.firm_id, f.ticker, f.name,
                 f.active_from.isoformat() if f.active_from else "",
                 f.active_to.isoformat() if f.active_to else ""]
            )
