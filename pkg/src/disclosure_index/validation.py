"""Statistical validation of the index and the reusable predictor.

Covers rank-correlation stability across rating waves and k-factors,
pooled OLS of the index on the market proxies, backward elimination down
to the significant set, and a frozen four-variable linear predictor for
consumers who cannot run their own survey.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .elo import EloConfig, VoteEvent, replay
from .votelog import parse_timestamp


class RankingMismatchError(ValueError):
    """The two rankings do not cover the same firm set."""


class CollinearityError(ValueError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, columns: list[str]):
        super().__init__(f"collinear design columns: {columns}")
        self.columns = columns


class DegenerateModelError(ValueError):
    """No usable model remains (all regressors eliminated, or n too small)."""


@dataclass(frozen=True)
class WaveCut:
    """A named rating wave: all votes at or before ``cutoff`` belong to it."""

    name: str
    cutoff: datetime


@dataclass(frozen=True)
class RegressionFit:
    coefficients: dict[str, float]
    std_errors: dict[str, float]
    t_stats: dict[str, float]
    p_values: dict[str, float]
    r2: float
    adj_r2: float
    rmse: float
    n_obs: int
    dropped_order: list[str] = field(default_factory=list)


def ranks_from_scores(
    scores: Mapping[str, float], *, descending: bool = True
) -> dict[str, float]:
    """1-based ranks from scores, ties resolved by average rank."""
    keys = list(scores)
    values = np.array([scores[k] for k in keys], dtype=float)
    ranks = stats.rankdata(-values if descending else values, method="average")
    return {k: float(r) for k, r in zip(keys, ranks)}


def spearman_rho(
    a: Mapping[str, float] | Sequence[tuple[str, float]],
    b: Mapping[str, float] | Sequence[tuple[str, float]],
) -> float:
    """Rank correlation 1 - 6*sum(d^2) / (n(n^2-1)) over a shared firm set.

    Inputs are firm -> rank mappings (or (firm, rank) pairs).  Tied ranks
    are re-averaged before the formula is applied.
    """
    rank_a = dict(a)
    rank_b = dict(b)
    if set(rank_a) != set(rank_b):
        raise RankingMismatchError(
            "rankings cover different firm sets "
            f"({len(rank_a)} vs {len(rank_b)} firms, "
            f"{len(set(rank_a) & set(rank_b))} shared)"
        )
    n = len(rank_a)
    if n < 2:
        raise RankingMismatchError(f"need at least 2 firms, got {n}")
    # Re-rank so tied inputs carry average ranks, then apply the formula.
    ra = ranks_from_scores(rank_a, descending=False)
    rb = ranks_from_scores(rank_b, descending=False)
    d2 = sum((ra[f] - rb[f]) ** 2 for f in ra)
    return 1.0 - 6.0 * d2 / (n * (n * n - 1))


@dataclass(frozen=True)
class KSweepResult:
    k_values: list[float]
    wave_names: list[str]
    # rhos[k][i] correlates wave i with wave i+1
    rhos: dict[float, list[float]]
    mean_rho: dict[float, float]
    recommended_k: float


def sweep_k(
    events: Sequence[VoteEvent],
    k_values: Sequence[float],
    waves: Sequence[WaveCut],
    *,
    initial_rating: float = 1500.0,
    expectation_mode: str = "table",
) -> KSweepResult:
    """Replay each wave's vote segment per k and correlate adjacent waves.

    Waves partition the log by timestamp: wave i holds the votes after
    wave i-1's cutoff up to its own.  Each segment is replayed from scratch
    so adjacent waves are independent samples of the same latent ordering;
    the recommended k maximizes the mean adjacent-wave Spearman rho, ties
    going to the smallest k.
    """
    if len(waves) < 2:
        raise DegenerateModelError(f"need at least 2 waves, got {len(waves)}")
    for prev, cur in zip(waves, waves[1:]):
        if cur.cutoff <= prev.cutoff:
            raise DegenerateModelError(
                f"wave cutoffs must increase: {prev.name} -> {cur.name}"
            )
    segments = _wave_segments(events, waves)
    rhos: dict[float, list[float]] = {}
    means: dict[float, float] = {}
    for k in k_values:
        config = EloConfig(
            k_factor=k,
            initial_rating=initial_rating,
            expectation_mode=expectation_mode,  # type: ignore[arg-type]
        )
        wave_scores = [replay(seg, config).scores for seg in segments]
        pair_rhos = []
        for left, right in zip(wave_scores, wave_scores[1:]):
            common = sorted(set(left) & set(right))
            if len(common) < 2:
                raise DegenerateModelError(
                    "fewer than 2 firms rated in adjacent waves"
                )
            pair_rhos.append(
                spearman_rho(
                    ranks_from_scores({f: left[f] for f in common}),
                    ranks_from_scores({f: right[f] for f in common}),
                )
            )
        rhos[k] = pair_rhos
        means[k] = float(np.mean(pair_rhos))
    recommended = min(k_values, key=lambda k: (-means[k], k))
    return KSweepResult(
        k_values=list(k_values),
        wave_names=[w.name for w in waves],
        rhos=rhos,
        mean_rho=means,
        recommended_k=recommended,
    )


def _wave_segments(
    events: Sequence[VoteEvent], waves: Sequence[WaveCut]
) -> list[list[VoteEvent]]:
    """Split the log into per-wave slices, renumbered for standalone replay."""
    segments = []
    prev_cutoff: datetime | None = None
    for wave in waves:
        slice_ = [
            e
            for e in events
            if (prev_cutoff is None or e.timestamp > prev_cutoff)
            and e.timestamp <= wave.cutoff
        ]
        segments.append(
            [replace(e, seq=i + 1) for i, e in enumerate(slice_)]
        )
        prev_cutoff = wave.cutoff
    return segments


def load_waves_csv(path: str | Path) -> list[WaveCut]:
    """Load the wave schedule: name,cutoff with strictly increasing cutoffs."""
    waves: list[WaveCut] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(line for line in handle if not line.startswith("#"))
        header = next(reader, [])
        if header != ["name", "cutoff"]:
            raise DegenerateModelError(
                f"waves file header mismatch: expected name,cutoff, got {header}"
            )
        for name, cutoff in reader:
            waves.append(WaveCut(name=name, cutoff=parse_timestamp(cutoff)))
    for prev, cur in zip(waves, waves[1:]):
        if cur.cutoff <= prev.cutoff:
            raise DegenerateModelError(
                f"wave cutoffs must strictly increase ({prev.name} -> {cur.name})"
            )
    return waves


# --- ordinary least squares --------------------------------------------------

INTERCEPT = "intercept"


def _value(row, name: str):
    if isinstance(row, Mapping):
        return row.get(name)
    return getattr(row, name)


def _present(value) -> bool:
    if value is None:
        return False
    if isinstance(value, float) and math.isnan(value):
        return False
    return True


def listwise_delete(rows: Iterable, names: Sequence[str]) -> list:
    """Rows with every requested variable present."""
    return [
        row for row in rows if all(_present(_value(row, n)) for n in names)
    ]


def ols_fit(
    rows: Iterable,
    dependent: str,
    regressors: Sequence[str],
) -> RegressionFit:
    """Pooled OLS with intercept and homoskedastic standard errors.

    Rows missing any requested variable are dropped first (listwise
    deletion).  Two-sided p-values use the t distribution with n - p - 1
    degrees of freedom.
    """
    regressors = list(regressors)
    if len(set(regressors)) != len(regressors):
        raise DegenerateModelError(f"duplicate regressors in {regressors}")
    kept = listwise_delete(rows, [dependent, *regressors])
    n = len(kept)
    p = len(regressors)
    if n <= p + 1:
        raise DegenerateModelError(
            f"{n} complete observations cannot support {p} regressors"
        )
    y = np.array([float(_value(r, dependent)) for r in kept])
    X = np.column_stack(
        [np.ones(n)]
        + [np.array([float(_value(r, name)) for r in kept]) for name in regressors]
    )
    names = [INTERCEPT, *regressors]
    _check_rank(X, names)

    beta, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    df = n - p - 1
    sigma2 = ssr / df
    cov = sigma2 * np.linalg.inv(X.T @ X)
    se = np.sqrt(np.diag(cov))
    t_stats = beta / se
    p_values = 2.0 * stats.t.sf(np.abs(t_stats), df)
    r2 = 1.0 - ssr / sst if sst > 0 else 1.0
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df
    return RegressionFit(
        coefficients=dict(zip(names, beta.tolist())),
        std_errors=dict(zip(names, se.tolist())),
        t_stats=dict(zip(names, t_stats.tolist())),
        p_values=dict(zip(names, p_values.tolist())),
        r2=r2,
        adj_r2=adj_r2,
        rmse=math.sqrt(sigma2),
        n_obs=n,
    )


def _check_rank(X: np.ndarray, names: Sequence[str]) -> None:
    rank = np.linalg.matrix_rank(X)
    if rank == X.shape[1]:
        return
    # Pivoted QR: the columns pivoted past the numerical rank are the
    # linearly dependent ones.
    _, _, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    offenders = sorted(names[j] for j in piv[rank:])
    raise CollinearityError(offenders)


def backward_eliminate(
    rows: Iterable,
    dependent: str,
    regressors: Sequence[str],
    p_threshold: float = 0.05,
) -> RegressionFit:
    """Drop the least significant regressor until all survive the threshold.

    After each drop the listwise deletion is recomputed from the full row
    set, so removing a sparsely observed variable restores its rows.  Ties
    on the p-value break alphabetically.  The drop order is recorded on the
    returned fit.
    """
    rows = list(rows)
    remaining = list(regressors)
    dropped: list[str] = []
    while True:
        if not remaining:
            raise DegenerateModelError(
                f"every regressor eliminated (order: {dropped})"
            )
        fit = ols_fit(rows, dependent, remaining)
        candidates = {name: fit.p_values[name] for name in remaining}
        worst = max(sorted(candidates), key=lambda name: candidates[name])
        if candidates[worst] <= p_threshold:
            return RegressionFit(
                coefficients=fit.coefficients,
                std_errors=fit.std_errors,
                t_stats=fit.t_stats,
                p_values=fit.p_values,
                r2=fit.r2,
                adj_r2=fit.adj_r2,
                rmse=fit.rmse,
                n_obs=fit.n_obs,
                dropped_order=dropped,
            )
        remaining.remove(worst)
        dropped.append(worst)


# --- the frozen predictor ----------------------------------------------------

# Four-variable model estimated on the original 339-observation panel.
PUBLISHED_MODEL = RegressionFit(
    coefficients={
        INTERCEPT: 1012.343,
        "coverage": 2.23952,
        "vol": -0.8197953,
        "ln_size": 20.01405,
        "qtobin": 23.09268,
    },
    std_errors={
        INTERCEPT: 62.89146,
        "coverage": 0.8365905,
        "vol": 0.198787,
        "ln_size": 2.65614,
        "qtobin": 3.529336,
    },
    t_stats={
        INTERCEPT: 16.10,
        "coverage": 2.68,
        "vol": -4.12,
        "ln_size": 7.54,
        "qtobin": 6.54,
    },
    p_values={
        INTERCEPT: 0.000,
        "coverage": 0.008,
        "vol": 0.000,
        "ln_size": 0.000,
        "qtobin": 0.000,
    },
    r2=0.2847,
    adj_r2=0.2761,
    rmse=68.769,
    n_obs=339,
)

# Observed min/max in the calibration sample; predictions outside these
# ranges extrapolate and only trigger a warning.
_SANE_RANGES = {
    "coverage": (0.0, 21.0),
    "vol": (1.67, 145.593),
    "ln_size": (19.10888, 28.05268),
    "qtobin": (0.5829, 11.2332),
}


def predict_iai(
    coverage: float,
    vol: float,
    ln_size: float,
    qtobin: float,
    model: RegressionFit | None = None,
) -> float:
    """Predicted index level from the four retained proxies.

    Uses the frozen published model unless a refitted ``model`` (with the
    same coefficient names) is supplied.
    """
    if model is None:
        model = PUBLISHED_MODEL
    inputs = {
        "coverage": coverage, "vol": vol, "ln_size": ln_size, "qtobin": qtobin
    }
    for name, value in inputs.items():
        lo, hi = _SANE_RANGES[name]
        if not lo <= value <= hi:
            warnings.warn(
                f"{name}={value} outside the calibrated range [{lo}, {hi}]; "
                "prediction extrapolates",
                stacklevel=2,
            )
    coef = model.coefficients
    return coef[INTERCEPT] + sum(coef[n] * v for n, v in inputs.items())


# --- reporting ----------------------------------------------------------------

def format_fit(fit: RegressionFit, dependent: str = "ranking") -> str:
    """Aligned plain-text coefficient table."""
    lines = [
        f"dependent: {dependent}    n = {fit.n_obs}",
        f"R-squared = {fit.r2:.4f}    Adj R-squared = {fit.adj_r2:.4f}    "
        f"Root MSE = {fit.rmse:.4f}",
    ]
    if fit.dropped_order:
        lines.append(f"dropped (in order): {', '.join(fit.dropped_order)}")
    lines.append("")
    lines.append(f"{'variable':<12} {'coef':>12} {'std err':>12} {'t':>8} {'P>|t|':>8}")
    ordered = [n for n in fit.coefficients if n != INTERCEPT] + [INTERCEPT]
    for name in ordered:
        lines.append(
            f"{name:<12} {fit.coefficients[name]:>12.5f} "
            f"{fit.std_errors[name]:>12.5f} {fit.t_stats[name]:>8.2f} "
            f"{fit.p_values[name]:>8.3f}"
        )
    return "\n".join(lines)


def fit_to_json(fit: RegressionFit) -> dict:
    return {
        "coefficients": fit.coefficients,
        "std_errors": fit.std_errors,
        "t_stats": fit.t_stats,
        "p_values": fit.p_values,
        "r2": fit.r2,
        "adj_r2": fit.adj_r2,
        "rmse": fit.rmse,
        "n_obs": fit.n_obs,
        "dropped_order": fit.dropped_order,
    }


def fit_from_json(data: Mapping) -> RegressionFit:
    return RegressionFit(
        coefficients=dict(data["coefficients"]),
        std_errors=dict(data.get("std_errors", {})),
        t_stats=dict(data.get("t_stats", {})),
        p_values=dict(data.get("p_values", {})),
        r2=float(data.get("r2", float("nan"))),
        adj_r2=float(data.get("adj_r2", float("nan"))),
        rmse=float(data.get("rmse", float("nan"))),
        n_obs=int(data.get("n_obs", 0)),
        dropped_order=list(data.get("dropped_order", [])),
    )
