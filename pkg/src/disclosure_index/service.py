"""HTTP survey service: registration, ten-pair voting sessions, live ratings.

The vote log is the single source of truth.  Analysts and sessions live in
append-only JSONL files; a session's progress is never stored, it is derived
from how many of its votes reached the log.  Every acknowledged write is
fsynced first, so a hard kill loses nothing that a client saw confirmed.
"""
from __future__ import annotations

import io
import json
import os
import random
import threading
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal, Sequence

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .elo import (
    DEFAULT_INITIAL_RATING,
    DEFAULT_K_FACTOR,
    EloConfig,
    Firm,
    VoteEvent,
    replay,
    snapshot_ranking,
    with_universe,
)
from .votelog import (
    format_timestamp,
    parse_timestamp,
    read_vote_log,
    vote_log_line,
    write_vote_log,
)

SESSION_PAIRS = 10


class UnknownAnalystError(KeyError):
    pass


class UnknownSessionError(KeyError):
    pass


class CapacityError(RuntimeError):
    """Active universe too small to build a session."""


class OrderingError(RuntimeError):
    """Vote for a pair index the session is not at (client must refetch)."""


class VoteContractError(ValueError):
    """Winner is not one of the two firms at the given index."""


@dataclass(frozen=True)
class SessionRecord:
    session_id: str
    analyst_id: str
    pairs: tuple[tuple[str, str], ...]
    created_at: datetime


class SurveyStore:
    """Durable state behind the HTTP endpoints.

    All mutation goes through one lock; seq numbers are assigned under it
    and the CSV line hits disk (fsync) before the caller gets the ack.
    """

    def __init__(
        self,
        data_dir: str | Path,
        firms: Sequence[Firm],
        *,
        seed: int | None = 42,
        pairing: Literal["uniform", "proximity"] = "uniform",
        k_factor: float = DEFAULT_K_FACTOR,
        initial_rating: float = DEFAULT_INITIAL_RATING,
        expectation_mode: Literal["table", "logistic"] = "table",
    ):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.firms = {f.firm_id: f for f in firms}
        if len(self.firms) != len(firms):
            raise ValueError("duplicate firm_id in universe")
        self.pairing = pairing
        self.k_factor = k_factor
        self.initial_rating = initial_rating
        self.expectation_mode = expectation_mode
        self._rng = random.Random(seed)
        self._lock = threading.Lock()

        self.votes_path = self.data_dir / "votes.csv"
        self.analysts_path = self.data_dir / "analysts.jsonl"
        self.sessions_path = self.data_dir / "sessions.jsonl"

        self._events: list[VoteEvent] = (
            read_vote_log(self.votes_path) if self.votes_path.exists() else []
        )
        self._analysts = {
            rec["analyst_id"]: rec for rec in _read_jsonl(self.analysts_path)
        }
        self._sessions: dict[str, SessionRecord] = {}
        for rec in _read_jsonl(self.sessions_path):
            self._sessions[rec["session_id"]] = SessionRecord(
                session_id=rec["session_id"],
                analyst_id=rec["analyst_id"],
                pairs=tuple((a, b) for a, b in rec["pairs"]),
                created_at=parse_timestamp(rec["created_at"]),
            )
        # per-session progress, derived from the durable log
        self._votes_by_session: dict[str, list[VoteEvent]] = {}
        for event in self._events:
            self._votes_by_session.setdefault(event.session_id, []).append(event)

        self._vote_handle = open(self.votes_path, "a", encoding="utf-8")
        if not self._events and self._vote_handle.tell() == 0:
            self._vote_handle.write(
                "seq,timestamp_iso8601,session_id,analyst_id,firm_a,firm_b,winner\n"
            )
            _sync(self._vote_handle)

    def close(self) -> None:
        self._vote_handle.close()

    # -- analysts ------------------------------------------------------------

    def register_analyst(self, certified: bool, state: str) -> dict:
        with self._lock:
            record = {
                "analyst_id": uuid.uuid4().hex[:12],
                "certified": bool(certified),
                "state": state,
                "created_at": format_timestamp(_now()),
            }
            _append_jsonl(self.analysts_path, record)
            self._analysts[record["analyst_id"]] = record
            return dict(record)

    # -- sessions ------------------------------------------------------------

    def create_session(self, analyst_id: str) -> SessionRecord:
        with self._lock:
            if analyst_id not in self._analysts:
                raise UnknownAnalystError(analyst_id)
            now = _now()
            active = sorted(
                f.firm_id for f in self.firms.values() if f.is_active(now.date())
            )
            if len(active) < 5:
                raise CapacityError(
                    f"{len(active)} active firms; need at least 5"
                )
            pairs = self._draw_pairs(active, analyst_id)
            session = SessionRecord(
                session_id=uuid.uuid4().hex[:12],
                analyst_id=analyst_id,
                pairs=pairs,
                created_at=now,
            )
            _append_jsonl(
                self.sessions_path,
                {
                    "session_id": session.session_id,
                    "analyst_id": session.analyst_id,
                    "pairs": [list(p) for p in session.pairs],
                    "created_at": format_timestamp(session.created_at),
                },
            )
            self._sessions[session.session_id] = session
            return session

    def _draw_pairs(
        self, active: list[str], analyst_id: str
    ) -> tuple[tuple[str, str], ...]:
        seen = {
            frozenset(pair)
            for s in self._sessions.values()
            if s.analyst_id == analyst_id
            for pair in s.pairs
        }
        ratings = self._ratings_map() if self.pairing == "proximity" else {}
        chosen: list[tuple[str, str]] = []
        taken: set[frozenset] = set()
        # two passes: first avoid pairs this analyst already saw, then give up
        # on that constraint (a small universe can exhaust the unseen pairs)
        for avoid_seen in (True, False):
            attempts = 0
            while len(chosen) < SESSION_PAIRS and attempts < 2000:
                attempts += 1
                a = self._rng.choice(active)
                b = self._pick_partner(a, active, ratings)
                key = frozenset((a, b))
                if key in taken or (avoid_seen and key in seen):
                    continue
                chosen.append((a, b))
                taken.add(key)
            if len(chosen) == SESSION_PAIRS:
                break
        if len(chosen) < SESSION_PAIRS:
            raise CapacityError(
                f"could not draw {SESSION_PAIRS} distinct pairs "
                f"from {len(active)} active firms"
            )
        return tuple(chosen)

    def _pick_partner(
        self, a: str, active: list[str], ratings: dict[str, float]
    ) -> str:
        others = [f for f in active if f != a]
        if self.pairing != "proximity":
            return self._rng.choice(others)
        base = ratings.get(a, self.initial_rating)
        weights = [
            2.0 ** (-abs(ratings.get(f, self.initial_rating) - base) / 50.0)
            for f in others
        ]
        return self._rng.choices(others, weights=weights, k=1)[0]

    def get_session(self, session_id: str) -> SessionRecord:
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSessionError(session_id)
        return session

    def next_index(self, session_id: str) -> int:
        return len(self._votes_by_session.get(session_id, []))

    # -- votes ---------------------------------------------------------------

    def submit_vote(self, session_id: str, pair_index: int, winner: str) -> VoteEvent:
        with self._lock:
            session = self.get_session(session_id)
            if not 0 <= pair_index < SESSION_PAIRS:
                raise VoteContractError(
                    f"pair_index {pair_index} outside 0..{SESSION_PAIRS - 1}"
                )
            pair = session.pairs[pair_index]
            if winner not in pair:
                raise VoteContractError(
                    f"winner {winner!r} is not in pair {pair}"
                )
            recorded = self._votes_by_session.get(session_id, [])
            current = len(recorded)
            if pair_index < current:
                original = recorded[pair_index]
                if original.winner == winner:
                    return original  # idempotent replay, log untouched
                raise OrderingError(
                    f"pair {pair_index} already decided for {original.winner!r}"
                )
            if pair_index > current:
                raise OrderingError(
                    f"session is at pair {current}, got vote for {pair_index}"
                )
            event = VoteEvent(
                seq=(self._events[-1].seq + 1) if self._events else 1,
                timestamp=_now(),
                session_id=session_id,
                analyst_id=session.analyst_id,
                firm_a=pair[0],
                firm_b=pair[1],
                winner=winner,
            )
            self._vote_handle.write(vote_log_line(event))
            _sync(self._vote_handle)  # durable before the ack
            self._events.append(event)
            self._votes_by_session.setdefault(session_id, []).append(event)
            return event

    # -- views ---------------------------------------------------------------

    def events_snapshot(self) -> list[VoteEvent]:
        with self._lock:
            return list(self._events)

    def _ratings_map(self) -> dict[str, float]:
        state = replay(list(self._events), self._config(self.k_factor))
        return dict(state.scores)

    def _config(self, k: float) -> EloConfig:
        return EloConfig(
            k_factor=k,
            initial_rating=self.initial_rating,
            expectation_mode=self.expectation_mode,
        )

    def ratings(
        self, k: float | None = None, cutoff: datetime | None = None
    ) -> list[dict]:
        events = self.events_snapshot()
        config = self._config(self.k_factor if k is None else k)
        state = with_universe(
            replay(events, config, cutoff=cutoff), self.firms, config
        )
        return [
            {
                "rank": rank,
                "firm_id": firm_id,
                "ticker": self.firms[firm_id].ticker
                if firm_id in self.firms
                else "",
                "name": self.firms[firm_id].name if firm_id in self.firms else "",
                "rating": rating,
            }
            for firm_id, rating, rank in snapshot_ranking(state)
        ]

    def export_csv(self) -> str:
        buffer = io.StringIO()
        write_vote_log(buffer, self.events_snapshot())
        return buffer.getvalue()


def _now() -> datetime:
    return datetime.now(timezone.utc).replace(microsecond=0)


def _sync(handle) -> None:
    handle.flush()
    os.fsync(handle.fileno())


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path, encoding="utf-8") as handle:
        return [json.loads(line) for line in handle if line.strip()]


def _append_jsonl(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8") as handle:
        handle.write(json.dumps(record, separators=(",", ":")) + "\n")
        _sync(handle)


# --- HTTP layer ---------------------------------------------------------------


class RegisterRequest(BaseModel):
    certified: bool
    state: str = ""


class SessionRequest(BaseModel):
    analyst_id: str


class VoteRequest(BaseModel):
    pair_index: int = Field(ge=0)
    winner: str


def _firm_json(store: SurveyStore, firm_id: str) -> dict:
    firm = store.firms[firm_id]
    return {"id": firm.firm_id, "ticker": firm.ticker, "name": firm.name}


def create_app(store: SurveyStore, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="disclosure-index survey", docs_url=None, redoc_url=None)

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "votes": len(store.events_snapshot())}

    @app.post("/api/analysts")
    def register(body: RegisterRequest) -> dict:
        record = store.register_analyst(body.certified, body.state)
        return {
            "analyst_id": record["analyst_id"],
            "certified": record["certified"],
            "state": record["state"],
        }

    @app.post("/api/sessions")
    def create_session(body: SessionRequest) -> dict:
        try:
            session = store.create_session(body.analyst_id)
        except UnknownAnalystError:
            raise HTTPException(404, detail="unknown analyst")
        except CapacityError as exc:
            raise HTTPException(409, detail=str(exc))
        return {"session_id": session.session_id, "analyst_id": session.analyst_id}

    @app.get("/api/sessions/{session_id}/next")
    def next_pair(session_id: str) -> dict:
        try:
            session = store.get_session(session_id)
        except UnknownSessionError:
            raise HTTPException(404, detail="unknown session")
        index = store.next_index(session_id)
        if index >= SESSION_PAIRS:
            return {"complete": True}
        a, b = session.pairs[index]
        return {
            "pair_index": index,
            "firm_a": _firm_json(store, a),
            "firm_b": _firm_json(store, b),
        }

    @app.post("/api/sessions/{session_id}/votes")
    def submit_vote(session_id: str, body: VoteRequest) -> dict:
        try:
            event = store.submit_vote(session_id, body.pair_index, body.winner)
        except UnknownSessionError:
            raise HTTPException(404, detail="unknown session")
        except VoteContractError as exc:
            raise HTTPException(422, detail=str(exc))
        except OrderingError as exc:
            raise HTTPException(409, detail=str(exc))
        return {"seq": event.seq}

    @app.get("/api/ratings")
    def ratings(
        k: float | None = Query(default=None, gt=0),
        cutoff: str | None = Query(default=None),
    ) -> list[dict]:
        cut = None
        if cutoff is not None:
            try:
                cut = parse_timestamp(cutoff)
            except ValueError as exc:
                raise HTTPException(422, detail=f"bad cutoff: {exc}")
        return store.ratings(k=k, cutoff=cut)

    @app.get("/api/export/votes.csv")
    def export_votes() -> Response:
        return Response(content=store.export_csv(), media_type="text/csv")

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app


def run_server(
    store: SurveyStore,
    host: str = "127.0.0.1",
    port: int = 8000,
    static_dir: str | Path | None = None,
) -> None:
    import uvicorn

    uvicorn.run(
        create_app(store, static_dir=static_dir),
        host=host,
        port=port,
        log_level="warning",
    )
