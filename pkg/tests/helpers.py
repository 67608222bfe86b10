"""Shared synthetic-data generators and independent oracles.

The oracles here deliberately take different computational routes than the
library (normal-equations solve vs lstsq, scalar Poisson products vs
vectorized log-space sums) so agreement is evidence, not tautology.
"""
from __future__ import annotations

import random
from datetime import datetime, timedelta, timezone

import numpy as np
from scipy import stats

from disclosure_index.elo import VoteEvent
from disclosure_index.validation import WaveCut

UTC = timezone.utc
T0 = datetime(2016, 1, 4, 12, 0, tzinfo=UTC)


def make_event(
    seq: int,
    firm_a: str,
    firm_b: str,
    winner: str,
    *,
    ts: datetime | None = None,
    session: str = "s1",
    analyst: str = "an1",
) -> VoteEvent:
    return VoteEvent(
        seq=seq,
        timestamp=ts if ts is not None else T0 + timedelta(minutes=seq),
        session_id=session,
        analyst_id=analyst,
        firm_a=firm_a,
        firm_b=firm_b,
        winner=winner,
    )


def synthetic_vote_log(
    n_firms: int,
    votes_per_wave: list[int],
    noise: float,
    seed: int,
) -> tuple[list[str], list[VoteEvent], list[WaveCut]]:
    """Votes driven by a fixed latent ordering (firm index: lower is better).

    With probability ``noise`` the worse firm wins instead.  noise=0.5 is a
    pure coin flip.  One cutoff per wave, placed between wave segments.
    """
    rng = random.Random(seed)
    firms = [f"F{i:03d}" for i in range(n_firms)]
    events: list[VoteEvent] = []
    cuts: list[WaveCut] = []
    ts = T0
    seq = 0
    for w, n_votes in enumerate(votes_per_wave):
        for _ in range(n_votes):
            seq += 1
            i, j = rng.sample(range(n_firms), 2)
            better, worse = min(i, j), max(i, j)
            win = better if rng.random() >= noise else worse
            events.append(
                VoteEvent(
                    seq=seq,
                    timestamp=ts,
                    session_id=f"s{w}",
                    analyst_id="synth",
                    firm_a=firms[i],
                    firm_b=firms[j],
                    winner=firms[win],
                )
            )
            ts += timedelta(minutes=1)
        cuts.append(WaveCut(name=f"wave{w + 1}", cutoff=ts - timedelta(seconds=30)))
    return firms, events, cuts


def ols_oracle(y: np.ndarray, X: np.ndarray) -> dict:
    """Plain normal-equations OLS (X already includes the intercept column)."""
    n, p_plus_1 = X.shape
    beta = np.linalg.solve(X.T @ X, X.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sst = float(np.sum((y - y.mean()) ** 2))
    df = n - p_plus_1
    sigma2 = ssr / df
    se = np.sqrt(np.diag(sigma2 * np.linalg.inv(X.T @ X)))
    t = beta / se
    p = 2.0 * stats.t.sf(np.abs(t), df)
    r2 = 1.0 - ssr / sst
    return {
        "beta": beta,
        "se": se,
        "t": t,
        "p": p,
        "r2": r2,
        "adj_r2": 1.0 - (1.0 - r2) * (n - 1) / df,
        "rmse": float(np.sqrt(sigma2)),
    }


ELIMINATION_REGRESSORS = [
    "coverage", "error", "vol", "baa", "ln_volume", "ln_size", "ff", "qtobin",
]


def elimination_panel(seed: int = 11, n: int = 342) -> list[dict]:
    """Panel whose full fit carries the published noise-variable p-values.

    Four regressors genuinely drive the outcome; the other four get their
    coefficients nudged so the full-model t statistics land exactly on
    p = .892 (ff), .968 (baa), .328 (error), .149 (ln_volume).  Nudging a
    column coefficient shifts only that estimate, leaving residuals and
    standard errors untouched, so the targets are hit exactly.
    """
    rng = np.random.default_rng(seed)
    coverage = rng.poisson(10, n).astype(float)
    vol = np.clip(rng.normal(40, 15, n), 2.0, 146.0)
    ln_size = rng.normal(23, 1.5, n)
    qtobin = np.clip(rng.lognormal(0.3, 0.5, n), 0.58, 11.2)
    ff = rng.uniform(20, 100, n)
    baa = rng.lognormal(0.0, 0.6, n)
    error = np.abs(rng.normal(0.05, 0.04, n))
    ln_volume = rng.normal(13, 2, n)
    y = (
        1000.0
        + 6.0 * coverage
        - 0.8 * vol
        + 20.0 * ln_size
        + 23.0 * qtobin
        + rng.normal(0, 65, n)
    )
    names = ["intercept"] + ELIMINATION_REGRESSORS
    X = np.column_stack(
        [np.ones(n), coverage, error, vol, baa, ln_volume, ln_size, ff, qtobin]
    )
    df = n - X.shape[1]
    targets = {
        "ff": stats.t.isf(0.892 / 2, df),
        "baa": stats.t.isf(0.968 / 2, df),
        "error": stats.t.isf(0.328 / 2, df),
        "ln_volume": -stats.t.isf(0.149 / 2, df),
    }
    XtX_inv = np.linalg.inv(X.T @ X)
    beta0 = XtX_inv @ (X.T @ y)
    resid = y - X @ beta0
    sigma2 = resid @ resid / df
    se = np.sqrt(sigma2 * np.diag(XtX_inv))
    for name, t in targets.items():
        j = names.index(name)
        y = y + (t * se[j] - beta0[j]) * X[:, j]
    cols = dict(zip(ELIMINATION_REGRESSORS, X.T[1:]))
    return [
        {"ranking": float(y[i]), **{k: float(cols[k][i]) for k in cols}}
        for i in range(n)
    ]
