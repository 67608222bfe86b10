"""Deterministic Elo rating engine behind the disclosure index.

Ratings live in a plain ``RatingState`` and change only through
``apply_vote``; ``replay`` reconstructs any historical snapshot from the
append-only vote log, so the state can always be thrown away and rebuilt.
The points exchanged per vote come from a banded win-expectation table
(the default) or from the standard logistic curve.
"""
from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from typing import Iterable, Literal, Mapping, Sequence

DEFAULT_K_FACTOR = 24.0
DEFAULT_INITIAL_RATING = 1500.0

ExpectationMode = Literal["table", "logistic"]


class ContractViolationError(ValueError):
    """An argument broke a documented precondition."""


class ReplayOrderError(ValueError):
    """Vote events arrived out of sequence or with gaps."""


# Win-expectation bands for the favourite. Entry i is the largest rating
# difference that still maps to expectation 0.50 + 0.01*i; differences of
# 736 and above map to 1.00.
_BAND_UPPER: tuple[int, ...] = (
    3, 10, 17, 25, 32, 39, 46, 53, 61, 68,
    76, 83, 91, 98, 106, 113, 121, 129, 137, 145,
    153, 162, 170, 179, 188, 197, 206, 215, 225, 235,
    245, 256, 267, 278, 290, 302, 315, 328, 344, 357,
    374, 391, 411, 432, 456, 484, 517, 559, 619, 735,
)
CERTAIN_WIN_DIFF = 736


@dataclass(frozen=True)
class Firm:
    """One listed firm in the rating universe.

    ``active_from``/``active_to`` bound the window in which the firm may be
    drawn into new voting pairs; an absent bound is open-ended.
    """

    firm_id: str
    ticker: str = ""
    name: str = ""
    active_from: date | None = None
    active_to: date | None = None

    def __post_init__(self) -> None:
        if not self.firm_id:
            raise ContractViolationError("firm_id must be non-empty")
        if (
            self.active_from is not None
            and self.active_to is not None
            and self.active_from > self.active_to
        ):
            raise ContractViolationError(
                f"firm {self.firm_id}: active_from after active_to"
            )

    def is_active(self, on: date) -> bool:
        if self.active_from is not None and on < self.active_from:
            return False
        if self.active_to is not None and on > self.active_to:
            return False
        return True


@dataclass(frozen=True)
class EloConfig:
    k_factor: float = DEFAULT_K_FACTOR
    initial_rating: float = DEFAULT_INITIAL_RATING
    expectation_mode: ExpectationMode = "table"

    def __post_init__(self) -> None:
        if not self.k_factor > 0:
            raise ContractViolationError(f"k_factor must be > 0, got {self.k_factor}")
        if self.expectation_mode not in ("table", "logistic"):
            raise ContractViolationError(
                f"unknown expectation_mode {self.expectation_mode!r}"
            )


@dataclass(frozen=True)
class VoteEvent:
    """One analyst choice between two firms, as recorded in the log."""

    seq: int
    timestamp: datetime
    session_id: str
    analyst_id: str
    firm_a: str
    firm_b: str
    winner: str

    def __post_init__(self) -> None:
        if self.seq < 1:
            raise ContractViolationError(f"seq must be >= 1, got {self.seq}")
        if self.firm_a == self.firm_b:
            raise ContractViolationError(f"vote {self.seq}: firm paired with itself")
        if self.winner not in (self.firm_a, self.firm_b):
            raise ContractViolationError(
                f"vote {self.seq}: winner {self.winner!r} not in pair"
            )

    @property
    def loser(self) -> str:
        return self.firm_b if self.winner == self.firm_a else self.firm_a


@dataclass(frozen=True)
class RatingState:
    """Scores for every firm seen so far, plus the replay cursor."""

    scores: Mapping[str, float] = field(default_factory=dict)
    last_applied: int = 0

    def total(self) -> float:
        return sum(self.scores.values())


def expected_win_probability(diff: float, mode: ExpectationMode = "table") -> float:
    """Win probability of the higher-rated side given the rating gap.

    ``diff`` must be the non-negative difference (higher minus lower).  Table
    mode rounds the gap to the nearest integer and looks up the band value;
    logistic mode evaluates 1 / (1 + 10^(-diff/400)) on the raw gap.
    """
    if diff < 0:
        raise ContractViolationError(f"diff must be >= 0, got {diff}")
    if mode == "logistic":
        return 1.0 / (1.0 + 10.0 ** (-diff / 400.0))
    if mode != "table":
        raise ContractViolationError(f"unknown expectation mode {mode!r}")
    gap = math.floor(diff + 0.5)  # nearest integer, halves round up
    if gap >= CERTAIN_WIN_DIFF:
        return 1.0
    # integer arithmetic first so each band value is the exact two-decimal float
    return (50 + bisect_left(_BAND_UPPER, gap)) / 100.0


def _exchange(
    winner_rating: float, loser_rating: float, config: EloConfig
) -> float:
    """Points the winner gains (and the loser loses) for this outcome."""
    diff = abs(winner_rating - loser_rating)
    p_favorite = expected_win_probability(diff, config.expectation_mode)
    p_winner = p_favorite if winner_rating >= loser_rating else 1.0 - p_favorite
    return (1.0 - p_winner) * config.k_factor


def _apply_in_place(
    scores: dict[str, float], event: VoteEvent, config: EloConfig
) -> None:
    r_winner = scores.setdefault(event.winner, config.initial_rating)
    r_loser = scores.setdefault(event.loser, config.initial_rating)
    delta = _exchange(r_winner, r_loser, config)
    # The same computed quantity is added and subtracted: zero-sum by
    # construction, never via a second expectation lookup for the loser.
    scores[event.winner] = r_winner + delta
    scores[event.loser] = r_loser - delta


def apply_vote(state: RatingState, event: VoteEvent, config: EloConfig) -> RatingState:
    """Fold one vote into the state, returning the successor state.

    Firms first seen in this vote start at ``config.initial_rating``.
    The winner gains ``(1 - p) * k`` points, where p is the winner's own win
    expectation; the loser loses exactly the same amount.
    """
    if event.seq != state.last_applied + 1:
        raise ReplayOrderError(
            f"expected seq {state.last_applied + 1}, got {event.seq}"
        )
    scores = dict(state.scores)
    _apply_in_place(scores, event, config)
    return RatingState(scores=scores, last_applied=event.seq)


def replay(
    events: Sequence[VoteEvent],
    config: EloConfig | None = None,
    cutoff: datetime | None = None,
) -> RatingState:
    """Rebuild the rating state by folding the log from scratch.

    The log must be seq-sorted and gapless from 1.  With ``cutoff`` set, only
    events stamped at or before it are applied; those events must form a
    prefix of the log (timestamps inconsistent with seq order around the
    cutoff indicate a corrupt log).
    """
    if config is None:
        config = EloConfig()
    for i, event in enumerate(events):
        if event.seq != i + 1:
            raise ReplayOrderError(
                f"log unsorted or gapped: position {i} holds seq {event.seq}"
            )
    selected = events
    if cutoff is not None:
        cutoff = _as_utc(cutoff)
        selected = [e for e in events if _as_utc(e.timestamp) <= cutoff]
        for i, event in enumerate(selected):
            if event.seq != i + 1:
                raise ReplayOrderError(
                    "timestamps around the cutoff are inconsistent with seq order"
                )
    scores: dict[str, float] = {}
    for event in selected:
        _apply_in_place(scores, event, config)
    return RatingState(scores=scores, last_applied=len(selected))


def snapshot_ranking(state: RatingState) -> list[tuple[str, float, int]]:
    """Ranking rows ``(firm_id, rating, rank)``, best first.

    Sorted by rating descending, ties broken by firm id; ranks are the
    1-based positions in that order.
    """
    ordered = sorted(state.scores.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(firm_id, rating, i + 1) for i, (firm_id, rating) in enumerate(ordered)]


def with_universe(
    state: RatingState, firm_ids: Iterable[str], config: EloConfig | None = None
) -> RatingState:
    """Extend a state so every declared firm has a score.

    Firms never seen in a vote sit at the initial rating; rated firms keep
    their replayed score.  ``last_applied`` is unchanged.
    """
    if config is None:
        config = EloConfig()
    scores = {firm_id: config.initial_rating for firm_id in firm_ids}
    scores.update(state.scores)
    return RatingState(scores=scores, last_applied=state.last_applied)


def _as_utc(ts: datetime) -> datetime:
    """Treat naive datetimes as UTC so log/cutoff comparisons never fail."""
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)
