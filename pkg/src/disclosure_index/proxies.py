"""Market and accounting proxies joined into the regression panel.

Scalar proxy definitions:

    error   |actual eps - median forecast| / price five days before the
            announcement
    vol     100 * sd(firm daily log returns) / sd(index daily log returns)
    baa     window mean of daily (ask - bid) / price, times 100
    qtobin  (market cap + total liabilities) / total assets

VOL and BaA are scaled by 100 so the panel columns land in conventional
percent-like magnitudes; the scaling is recorded in output headers.
"coverage" is a plain analyst count read from its input file, and size and
volume enter the panel as natural logs.  Missing inputs stay missing in the
panel; nothing is imputed.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, fields
from datetime import date
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import pandas as pd


class ProxyDomainError(ValueError):
    """Scalar input outside a proxy's domain."""


class DegenerateWindowError(ValueError):
    """A window has no usable observations (e.g. zero index variance)."""


class CrossedQuotesError(ValueError):
    """Ask below bid: a data-quality problem, not a computable spread."""


class PanelJoinError(ValueError):
    """Panel assembly hit a duplicate or unknown (firm, wave) key."""


def compute_error(
    actual_eps: float, median_forecast: float, price_5d_before: float
) -> float:
    """Absolute forecast miss deflated by the pre-announcement price."""
    if not price_5d_before > 0:
        raise ProxyDomainError(
            f"price_5d_before must be > 0, got {price_5d_before}"
        )
    return abs(actual_eps - median_forecast) / price_5d_before


def log_returns(prices: Sequence[float]) -> np.ndarray:
    arr = np.asarray(prices, dtype=float)
    if np.any(arr <= 0):
        raise ProxyDomainError("prices must be positive to take log returns")
    return np.diff(np.log(arr))


def compute_vol(
    firm_returns: Sequence[float], index_returns: Sequence[float]
) -> float:
    """Firm-to-index ratio of daily return standard deviations, x100."""
    firm = np.asarray(firm_returns, dtype=float)
    index = np.asarray(index_returns, dtype=float)
    if len(firm) < 20 or len(index) < 20:
        raise ProxyDomainError(
            f"need >= 20 return observations per series, got "
            f"{len(firm)} and {len(index)}"
        )
    sd_index = float(np.std(index, ddof=1))
    if sd_index == 0.0:
        raise DegenerateWindowError("index returns have zero variance")
    return 100.0 * float(np.std(firm, ddof=1)) / sd_index


def compute_baa(bid: float, ask: float, price: float) -> float:
    """One day's relative spread (ask - bid) / price."""
    if not (bid > 0 and price > 0):
        raise ProxyDomainError(f"bid and price must be > 0, got {bid}, {price}")
    if ask < bid:
        raise CrossedQuotesError(f"crossed quotes: ask {ask} < bid {bid}")
    return (ask - bid) / price


def window_baa(
    bids: Sequence[float], asks: Sequence[float], prices: Sequence[float]
) -> float:
    """Window mean of daily relative spreads, x100.

    Crossed-quote days are skipped with a warning; an all-bad window raises.
    """
    spreads = []
    for bid, ask, price in zip(bids, asks, prices):
        try:
            spreads.append(compute_baa(bid, ask, price))
        except CrossedQuotesError as exc:
            warnings.warn(f"skipping day: {exc}", stacklevel=2)
    if not spreads:
        raise DegenerateWindowError("no usable quote days in window")
    return 100.0 * float(np.mean(spreads))


def compute_tobinq(
    market_cap: float, total_liabilities: float, total_assets: float
) -> float:
    """(market value of equity + total liabilities) / total assets."""
    if not total_assets > 0:
        raise ProxyDomainError(f"total_assets must be > 0, got {total_assets}")
    if total_liabilities < 0:
        raise ProxyDomainError(
            f"total_liabilities must be >= 0, got {total_liabilities}"
        )
    return (market_cap + total_liabilities) / total_assets


@dataclass(frozen=True)
class FirmPanelRow:
    """One firm x wave observation; None marks a missing value."""

    firm_id: str
    wave: str
    ranking: float
    coverage: int | None = None
    error: float | None = None
    vol: float | None = None
    baa: float | None = None
    ln_volume: float | None = None
    ln_size: float | None = None
    ff: float | None = None
    qtobin: float | None = None

    def __post_init__(self) -> None:
        if self.coverage is not None and self.coverage < 0:
            raise ProxyDomainError(f"coverage must be >= 0, got {self.coverage}")
        if self.ff is not None and not 0 < self.ff <= 100:
            raise ProxyDomainError(f"free float must be in (0, 100], got {self.ff}")
        if self.qtobin is not None and not self.qtobin > 0:
            raise ProxyDomainError(f"qtobin must be > 0, got {self.qtobin}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


PANEL_COLUMNS = [f.name for f in fields(FirmPanelRow)]


def assemble_panel(
    ratings_by_wave: Mapping[str, Mapping[str, float] | Iterable[tuple[str, float]]],
    proxies_by_wave: Mapping[str, Mapping[str, Mapping[str, float | None]]],
    universe: Iterable[str] | None = None,
) -> list[FirmPanelRow]:
    """Join per-wave ratings with per-wave proxy inputs into panel rows.

    Ratings per wave may be a firm -> rating mapping or (firm, rating)
    pairs.  ``proxies_by_wave[wave][firm_id]`` may carry coverage, error,
    vol, baa, volume, total_assets, ff and qtobin; volume and total_assets
    are log-transformed here.  Every rated firm yields a row; absent proxy
    fields stay None.
    """
    known = set(universe) if universe is not None else None
    rows: list[FirmPanelRow] = []
    for wave in ratings_by_wave:
        ratings = ratings_by_wave[wave]
        items = (
            ratings.items() if isinstance(ratings, Mapping) else list(ratings)
        )
        proxies = proxies_by_wave.get(wave, {})
        seen: set[str] = set()
        for firm_id, rating in sorted(items):
            if firm_id in seen:
                raise PanelJoinError(f"duplicate ({firm_id}, {wave})")
            seen.add(firm_id)
            if known is not None and firm_id not in known:
                raise PanelJoinError(f"rated firm {firm_id!r} not in universe")
            p = dict(proxies.get(firm_id, {}))
            rows.append(
                FirmPanelRow(
                    firm_id=firm_id,
                    wave=wave,
                    ranking=float(rating),
                    coverage=_opt_int(p.get("coverage")),
                    error=_opt_float(p.get("error")),
                    vol=_opt_float(p.get("vol")),
                    baa=_opt_float(p.get("baa")),
                    ln_volume=_opt_log(p.get("volume"), firm_id, "volume"),
                    ln_size=_opt_log(p.get("total_assets"), firm_id, "total_assets"),
                    ff=_opt_float(p.get("ff")),
                    qtobin=_opt_float(p.get("qtobin")),
                )
            )
    return rows


def _missing(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def _opt_float(value) -> float | None:
    return None if _missing(value) else float(value)


def _opt_int(value) -> int | None:
    return None if _missing(value) else int(value)


def _opt_log(value, firm_id: str, what: str) -> float | None:
    if _missing(value):
        return None
    value = float(value)
    if value <= 0:
        warnings.warn(
            f"{firm_id}: non-positive {what} {value}; marking missing",
            stacklevel=2,
        )
        return None
    return math.log(value)


# --- wave-level reduction from raw market files -----------------------------

def wave_proxy_inputs(
    prices: pd.DataFrame,
    index_prices: pd.DataFrame,
    fundamentals: pd.DataFrame,
    coverage: pd.DataFrame,
    earnings: pd.DataFrame,
    wave: str,
    cutoff: date,
    *,
    window: int = 252,
) -> dict[str, dict[str, float | None]]:
    """Reduce the raw input files to one proxy dict per firm for a wave.

    The window is the last ``window`` trading days at or before ``cutoff``.
    Firms lacking a series or a fundamentals row simply lack those fields.
    """
    out: dict[str, dict[str, float | None]] = {}
    cutoff_ts = pd.Timestamp(cutoff)

    idx_window = index_prices[index_prices["date"] <= cutoff_ts].tail(window)
    idx_returns = (
        log_returns(idx_window["close"].to_numpy())
        if len(idx_window) >= 2
        else np.array([])
    )

    for firm_id, group in prices.groupby("firm_id"):
        fw = group[group["date"] <= cutoff_ts].sort_values("date").tail(window)
        if fw.empty:
            continue
        entry = out.setdefault(str(firm_id), {})
        try:
            entry["vol"] = compute_vol(
                log_returns(fw["close"].to_numpy()), idx_returns
            )
        except (ProxyDomainError, DegenerateWindowError):
            pass
        try:
            entry["baa"] = window_baa(
                fw["bid"].to_numpy(), fw["ask"].to_numpy(), fw["close"].to_numpy()
            )
        except (ProxyDomainError, DegenerateWindowError):
            pass
        volume = fw["volume"].mean()
        if np.isfinite(volume) and volume > 0:
            entry["volume"] = float(volume)

    fund_wave = fundamentals[fundamentals["wave"] == wave]
    if fund_wave["firm_id"].duplicated().any():
        dupes = fund_wave[fund_wave["firm_id"].duplicated()]["firm_id"].tolist()
        raise PanelJoinError(f"duplicate fundamentals for wave {wave}: {dupes}")
    for row in fund_wave.itertuples():
        entry = out.setdefault(str(row.firm_id), {})
        if not _missing(row.total_assets):
            entry["total_assets"] = float(row.total_assets)
            if not (_missing(row.market_cap) or _missing(row.total_liabilities)):
                try:
                    entry["qtobin"] = compute_tobinq(
                        float(row.market_cap),
                        float(row.total_liabilities),
                        float(row.total_assets),
                    )
                except ProxyDomainError:
                    pass
        if not _missing(row.free_float_pct):
            entry["ff"] = float(row.free_float_pct)

    cov_wave = coverage[coverage["wave"] == wave]
    for row in cov_wave.itertuples():
        out.setdefault(str(row.firm_id), {})["coverage"] = int(row.analyst_count)

    for firm_id, group in earnings.groupby("firm_id"):
        past = group[group["date"] <= cutoff_ts].sort_values("date")
        if past.empty:
            continue
        latest = past.iloc[-1]
        if _missing(latest["actual_eps"]) or _missing(latest["median_forecast_eps"]):
            continue
        ref_price = _price_5d_before(prices, str(firm_id), latest["date"])
        if ref_price is None:
            continue
        out.setdefault(str(firm_id), {})["error"] = compute_error(
            float(latest["actual_eps"]),
            float(latest["median_forecast_eps"]),
            ref_price,
        )
    return out


def _price_5d_before(
    prices: pd.DataFrame, firm_id: str, announce: pd.Timestamp
) -> float | None:
    series = prices[(prices["firm_id"] == firm_id) & (prices["date"] < announce)]
    if len(series) < 5:
        return None
    return float(series.sort_values("date")["close"].iloc[-5])


# --- CSV loading and panel serialization ------------------------------------

def load_prices_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    _require_columns(df, ["firm_id", "date", "close", "bid", "ask", "volume"], path)
    df["date"] = pd.to_datetime(df["date"])
    return df.sort_values(["firm_id", "date"]).reset_index(drop=True)


def load_index_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    _require_columns(df, ["date", "close"], path)
    df["date"] = pd.to_datetime(df["date"])
    return df.sort_values("date").reset_index(drop=True)


def load_fundamentals_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    _require_columns(
        df,
        ["firm_id", "wave", "market_cap", "total_liabilities", "total_assets",
         "free_float_pct"],
        path,
    )
    return df


def load_coverage_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    _require_columns(df, ["firm_id", "wave", "analyst_count"], path)
    return df


def load_earnings_csv(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, comment="#")
    _require_columns(
        df, ["firm_id", "announce_date", "actual_eps", "median_forecast_eps"], path
    )
    df["announce_date"] = pd.to_datetime(df["announce_date"])
    return df.rename(columns={"announce_date": "date"})


def _require_columns(df: pd.DataFrame, cols: Sequence[str], path) -> None:
    missing = [c for c in cols if c not in df.columns]
    if missing:
        raise ProxyDomainError(f"{path}: missing columns {missing}")


def write_panel_csv(
    path: str | Path, rows: Sequence[FirmPanelRow], comments: Sequence[str] = ()
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        for comment in comments:
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle)
        writer.writerow(PANEL_COLUMNS)
        for row in rows:
            record = row.as_dict()
            writer.writerow(
                ["" if record[c] is None else record[c] for c in PANEL_COLUMNS]
            )


def read_panel_csv(path: str | Path) -> list[FirmPanelRow]:
    rows: list[FirmPanelRow] = []
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(line for line in handle if not line.startswith("#"))
        if reader.fieldnames != PANEL_COLUMNS:
            raise ProxyDomainError(
                f"{path}: header mismatch, expected {PANEL_COLUMNS}"
            )
        for record in reader:
            rows.append(
                FirmPanelRow(
                    firm_id=record["firm_id"],
                    wave=record["wave"],
                    ranking=float(record["ranking"]),
                    coverage=_parse_cell(record["coverage"], int),
                    error=_parse_cell(record["error"], float),
                    vol=_parse_cell(record["vol"], float),
                    baa=_parse_cell(record["baa"], float),
                    ln_volume=_parse_cell(record["ln_volume"], float),
                    ln_size=_parse_cell(record["ln_size"], float),
                    ff=_parse_cell(record["ff"], float),
                    qtobin=_parse_cell(record["qtobin"], float),
                )
            )
    return rows


def _parse_cell(text: str, cast):
    return cast(text) if text not in ("", None) else None
