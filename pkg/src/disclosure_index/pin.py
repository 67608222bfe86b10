"""Probability-of-informed-trading estimator.

Daily buy/sell counts are modelled as a three-branch Poisson mixture: with
probability ``alpha`` an information event occurs, good news with
probability ``delta`` (informed traders then buy at extra rate ``mu``) and
bad news with probability ``1 - delta`` (informed traders sell at rate
``mu``); uninformed buyers and sellers always arrive at rates ``eps_b`` and
``eps_s``.  Note the sign convention: ``delta`` is the GOOD-news
probability.  Parts of the literature use the opposite convention, so check
before comparing fitted deltas across studies.

The headline quantity is the informed-trading share

    pin = alpha * mu / (alpha * mu + eps_b + eps_s)

estimated by maximum likelihood over a window of trade days.  Two
likelihood routes are provided: a direct per-day mixture density (readable,
overflows for large counts) and a factorized log-likelihood that stays
finite for counts up to at least 1e5.  Both include the full Poisson
normalization, so they agree exactly, not just up to a constant.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from datetime import date, timedelta
from pathlib import Path
from typing import Iterable, Literal, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln, logsumexp


class PinDomainError(ValueError):
    """Parameters outside the model's domain."""


class DegenerateInputError(ValueError):
    """Trade data carries no usable signal (e.g. every count is zero)."""


class NumericalOverflowError(ArithmeticError):
    """A likelihood evaluation produced a non-finite value."""


class EstimationFailureError(RuntimeError):
    """Every optimizer start failed; carries per-start diagnostics."""

    def __init__(self, message: str, diagnostics: list[dict]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class TradeDay:
    day: date
    buys: int
    sells: int

    def __post_init__(self) -> None:
        if self.buys < 0 or self.sells < 0:
            raise PinDomainError(
                f"{self.day}: counts must be non-negative, got "
                f"buys={self.buys} sells={self.sells}"
            )


@dataclass(frozen=True)
class PinParams:
    """Parameter vector (mu, eps_b, eps_s, alpha, delta).

    mu      informed arrival rate, trades/day
    eps_b   uninformed buy rate
    eps_s   uninformed sell rate
    alpha   probability of an information event per day
    delta   probability the event is good news
    """

    mu: float
    eps_b: float
    eps_s: float
    alpha: float
    delta: float

    def __post_init__(self) -> None:
        # Boundary values (mu = 0, alpha/delta in {0, 1}) are legal for
        # evaluation and simulation; fitted parameters land strictly inside.
        if not (self.mu >= 0 and math.isfinite(self.mu)):
            raise PinDomainError(f"mu must be >= 0, got {self.mu}")
        if not (self.eps_b > 0 and self.eps_s > 0):
            raise PinDomainError(
                f"uninformed rates must be > 0, got eps_b={self.eps_b} "
                f"eps_s={self.eps_s}"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise PinDomainError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.delta <= 1.0:
            raise PinDomainError(f"delta must be in [0, 1], got {self.delta}")

    @property
    def x_b(self) -> float:
        return self.eps_b / (self.mu + self.eps_b)

    @property
    def x_s(self) -> float:
        return self.eps_s / (self.mu + self.eps_s)


@dataclass(frozen=True)
class PinFit:
    params: PinParams
    pin: float
    log_likelihood: float
    converged: bool
    starts_tried: int
    warnings: tuple[str, ...] = ()


def pin_ratio(params: PinParams) -> float:
    informed = params.alpha * params.mu
    return informed / (informed + params.eps_b + params.eps_s)


def _log_poisson(n: float, lam: float) -> float:
    return n * math.log(lam) - lam - math.lgamma(n + 1)


def day_likelihood_direct(day: TradeDay, params: PinParams) -> float:
    """Mixture density of one day's (buys, sells) under the model.

    Evaluates the three branches literally:

        alpha*delta     * Pois(B; mu+eps_b) * Pois(S; eps_s)      good news
      + alpha*(1-delta) * Pois(B; eps_b)    * Pois(S; mu+eps_s)   bad news
      + (1-alpha)       * Pois(B; eps_b)    * Pois(S; eps_s)      no news

    Underflows to 0.0 for large counts; use the factorized form there.
    """
    b, s = day.buys, day.sells
    mu, eb, es = params.mu, params.eps_b, params.eps_s
    alpha, delta = params.alpha, params.delta
    good = alpha * delta * math.exp(_log_poisson(b, mu + eb) + _log_poisson(s, es))
    bad = (
        alpha * (1.0 - delta)
        * math.exp(_log_poisson(b, eb) + _log_poisson(s, mu + es))
    )
    none = (1.0 - alpha) * math.exp(_log_poisson(b, eb) + _log_poisson(s, es))
    return good + bad + none


def log_likelihood_factorized(
    days: Sequence[TradeDay], params: PinParams
) -> float:
    """Joint log-likelihood of the window, safe for counts up to 1e5.

    Factorizes each day around m = min(B, S) + max(B, S)/2 so that only
    bounded powers of x_b = eps_b/(mu+eps_b) and x_s = eps_s/(mu+eps_s)
    enter the mixture, which is then collapsed with log-sum-exp.  Includes
    the -ln B! - ln S! normalization so the result equals the sum of
    ``log(day_likelihood_direct)`` exactly.
    """
    if not days:
        raise PinDomainError("days must be non-empty")
    b = np.array([d.buys for d in days], dtype=float)
    s = np.array([d.sells for d in days], dtype=float)
    mu, eb, es = params.mu, params.eps_b, params.eps_s
    alpha, delta = params.alpha, params.delta

    log_xb = math.log(params.x_b)
    log_xs = math.log(params.x_s)
    m = np.minimum(b, s) + np.maximum(b, s) / 2.0

    base = (
        -(eb + es)
        + m * (log_xb + log_xs)
        + b * math.log(mu + eb)
        + s * math.log(mu + es)
        - gammaln(b + 1.0)
        - gammaln(s + 1.0)
    )
    with np.errstate(divide="ignore"):  # log(0) -> -inf kills a dead branch
        log_good = math.log(alpha * delta) if alpha * delta > 0 else -math.inf
        log_bad = (
            math.log(alpha * (1.0 - delta))
            if alpha * (1.0 - delta) > 0
            else -math.inf
        )
        log_none = math.log(1.0 - alpha) if alpha < 1.0 else -math.inf
    branches = np.stack(
        [
            log_good - mu + (-m) * log_xb + (s - m) * log_xs,
            log_bad - mu + (b - m) * log_xb + (-m) * log_xs,
            log_none + (b - m) * log_xb + (s - m) * log_xs,
        ]
    )
    total = float(np.sum(base + logsumexp(branches, axis=0)))
    if not math.isfinite(total):
        raise NumericalOverflowError(
            f"log-likelihood is {total} at {params}"
        )
    return total


def simulate_trades(
    params: PinParams,
    n_days: int,
    seed: int,
    start: date = date(2016, 1, 4),
) -> list[TradeDay]:
    """Draw i.i.d. trade days from the mixture, reproducible per seed."""
    if n_days < 1:
        raise PinDomainError(f"n_days must be >= 1, got {n_days}")
    rng = np.random.default_rng(seed)
    u = rng.random(n_days)
    good = u < params.alpha * params.delta
    bad = (~good) & (u < params.alpha)
    lam_b = np.where(good, params.mu + params.eps_b, params.eps_b)
    lam_s = np.where(bad, params.mu + params.eps_s, params.eps_s)
    buys = rng.poisson(lam_b)
    sells = rng.poisson(lam_s)
    return [
        TradeDay(day=start + timedelta(days=i), buys=int(buys[i]), sells=int(sells[i]))
        for i in range(n_days)
    ]


# --- maximum likelihood ----------------------------------------------------

_LOGIT_CLIP = 35.0  # keeps expit/logit finite in float64


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _expit(z: float) -> float:
    z = max(-_LOGIT_CLIP, min(_LOGIT_CLIP, z))
    return 1.0 / (1.0 + math.exp(-z))


def _to_unconstrained(params: PinParams) -> np.ndarray:
    return np.array(
        [
            math.log(params.mu),
            math.log(params.eps_b),
            math.log(params.eps_s),
            _logit(params.alpha),
            _logit(params.delta),
        ]
    )


def _from_unconstrained(z: np.ndarray) -> PinParams:
    return PinParams(
        mu=math.exp(min(z[0], 50.0)),
        eps_b=math.exp(min(z[1], 50.0)),
        eps_s=math.exp(min(z[2], 50.0)),
        alpha=_expit(z[3]),
        delta=_expit(z[4]),
    )


def _start_grid(days: Sequence[TradeDay], rng: np.random.Generator, jitter: float):
    """Multi-start grid: method-of-moments rates crossed with a 3x3
    probability lattice.  The likelihood is multi-modal; a single start is
    not trustworthy."""
    b_mean = float(np.mean([d.buys for d in days]))
    s_mean = float(np.mean([d.sells for d in days]))
    mu0 = max(float(np.mean([abs(d.buys - d.sells) for d in days])), 0.1)
    eb0 = max(b_mean, 0.1)
    es0 = max(s_mean, 0.1)
    starts = []
    for alpha0 in (0.2, 0.5, 0.8):
        for delta0 in (0.2, 0.5, 0.8):
            z = _to_unconstrained(
                PinParams(mu=mu0, eps_b=eb0, eps_s=es0, alpha=alpha0, delta=delta0)
            )
            if jitter > 0.0:
                z = z + rng.normal(scale=jitter, size=z.shape)
            starts.append(z)
    return starts


def estimate_pin(
    days: Sequence[TradeDay],
    *,
    method: Literal["nelder-mead", "l-bfgs-b"] = "nelder-mead",
    seed: int = 42,
    jitter: float = 0.0,
    max_iter: int = 500,
    tol: float = 1e-8,
) -> PinFit:
    """Fit the mixture by multi-start maximum likelihood.

    Rates are optimized through a log transform and probabilities through a
    logit transform, so the search space is unconstrained.  Nine starts
    (alpha, delta in {0.2, 0.5, 0.8}; rates from sample moments) are run and
    the best final log-likelihood wins, ties going to the earliest start.
    With ``jitter`` left at 0 the result is fully deterministic; a positive
    jitter perturbs the start points using ``seed``.
    """
    days = list(days)
    if not days:
        raise DegenerateInputError("no trade days supplied")
    if all(d.buys == 0 and d.sells == 0 for d in days):
        raise DegenerateInputError("all trade days have zero counts")
    notes: list[str] = []
    if len(days) < 20:
        msg = f"only {len(days)} trade days; estimates will be imprecise"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    if len({(d.buys, d.sells) for d in days}) == 1:
        notes.append("all trade days identical; fit is low-confidence")

    def objective(z: np.ndarray) -> float:
        try:
            return -log_likelihood_factorized(days, _from_unconstrained(z))
        except NumericalOverflowError:
            return math.inf

    rng = np.random.default_rng(seed)
    results = []
    diagnostics = []
    for z0 in _start_grid(days, rng, jitter):
        if method == "nelder-mead":
            res = minimize(
                objective, z0, method="Nelder-Mead",
                options={"maxiter": max_iter, "fatol": tol, "xatol": 1e-6},
            )
        elif method == "l-bfgs-b":
            res = minimize(
                objective, z0, method="L-BFGS-B",
                options={"maxiter": max_iter, "ftol": tol},
            )
        else:
            raise PinDomainError(f"unknown method {method!r}")
        results.append(res)
        diagnostics.append(
            {
                "start": [float(v) for v in z0],
                "loglik": -float(res.fun),
                "converged": bool(res.success),
                "message": str(res.message),
            }
        )
    # a start that hit the iteration cap stopped mid-path, not at a maximum;
    # only converged starts are candidate fits
    best = None
    for res in results:
        if (
            res.success
            and math.isfinite(res.fun)
            and (best is None or res.fun < best.fun)
        ):
            best = res
    if best is None:
        raise EstimationFailureError(
            f"none of {len(results)} starts converged", diagnostics
        )
    params = _from_unconstrained(best.x)
    return PinFit(
        params=params,
        pin=pin_ratio(params),
        log_likelihood=-float(best.fun),
        converged=bool(best.success),
        starts_tried=len(results),
        warnings=tuple(notes),
    )


# --- file formats ----------------------------------------------------------

TRADES_HEADER = ["firm_id", "date", "buys", "sells"]


def read_trades_csv(path: str | Path) -> dict[str, list[TradeDay]]:
    """Load per-firm trade days from firm_id,date,buys,sells."""
    by_firm: dict[str, list[TradeDay]] = {}
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(line for line in handle if not line.startswith("#"))
        header = next(reader, [])
        if header != TRADES_HEADER:
            raise PinDomainError(
                f"trade file header mismatch: expected {TRADES_HEADER}, got {header}"
            )
        for firm_id, day, buys, sells in reader:
            by_firm.setdefault(firm_id, []).append(
                TradeDay(day=date.fromisoformat(day), buys=int(buys), sells=int(sells))
            )
    for rows in by_firm.values():
        rows.sort(key=lambda d: d.day)
    return by_firm


def write_trades_csv(
    path: str | Path,
    by_firm: dict[str, Iterable[TradeDay]],
    comments: Sequence[str] = (),
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for comment in comments:
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle)
        writer.writerow(TRADES_HEADER)
        for firm_id in sorted(by_firm):
            for d in by_firm[firm_id]:
                writer.writerow([firm_id, d.day.isoformat(), d.buys, d.sells])


def fit_to_json(firm_id: str, fit: PinFit) -> dict:
    """Wire format for one fitted firm."""
    return {
        "firm_id": firm_id,
        "mu": fit.params.mu,
        "eps_b": fit.params.eps_b,
        "eps_s": fit.params.eps_s,
        "alpha": fit.params.alpha,
        "delta": fit.params.delta,
        "pin": fit.pin,
        "loglik": fit.log_likelihood,
        "converged": fit.converged,
        "starts_tried": fit.starts_tried,
    }
