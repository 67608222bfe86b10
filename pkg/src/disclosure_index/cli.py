"""Command-line front end for the whole pipeline.

One subcommand per stage: serve the survey, replay or snapshot the vote log
into rankings, sweep k-factors across waves, correlate rankings, estimate
and simulate the trade mixture, assemble the proxy panel, regress, run the
elimination path, and apply the frozen predictor.

Exit codes: 0 success, 1 domain error (one line on stderr), 2 bad usage.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .elo import EloConfig, replay, snapshot_ranking, with_universe
from .pin import (
    PinParams,
    estimate_pin,
    fit_to_json as pin_fit_json,
    read_trades_csv,
    simulate_trades,
    write_trades_csv,
)
from .proxies import (
    assemble_panel,
    load_coverage_csv,
    load_earnings_csv,
    load_fundamentals_csv,
    load_index_csv,
    load_prices_csv,
    read_panel_csv,
    wave_proxy_inputs,
    write_panel_csv,
)
from .validation import (
    backward_eliminate,
    fit_from_json,
    fit_to_json as regression_fit_json,
    format_fit,
    load_waves_csv,
    ols_fit,
    predict_iai,
    ranks_from_scores,
    spearman_rho,
    sweep_k,
)
from .votelog import (
    parse_timestamp,
    read_firms_csv,
    read_ranking_csv,
    read_vote_log,
    write_ranking_csv,
)

log = logging.getLogger("disclosure_index")

# failures of input data or numerics, as opposed to bugs: exit 1, no traceback
DOMAIN_ERRORS = (ValueError, KeyError, ArithmeticError, RuntimeError, OSError)


def _digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _log_run(args: argparse.Namespace, *input_paths) -> None:
    params = {
        k: v for k, v in vars(args).items() if k != "func" and v is not None
    }
    log.info("disclosure-index %s: %s", __version__, params)
    for path in input_paths:
        if path is not None:
            log.info("input %s sha256=%s", path, _digest(path))


def _headers(args: argparse.Namespace) -> list[str]:
    # skip presentation flags and the output's own name so identical inputs
    # always produce byte-identical files
    skipped = ("func", "subcommand", "out", "json", "quiet")
    params = " ".join(
        f"{k}={v}"
        for k, v in sorted(vars(args).items())
        if k not in skipped and v is not None
    )
    return [f"disclosure-index {__version__} {args.subcommand}", params]


def _elo_config(args: argparse.Namespace) -> EloConfig:
    return EloConfig(k_factor=args.k, expectation_mode=args.expectation)


def _write_json(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        print(text)
    else:
        Path(out).write_text(text + "\n", encoding="utf-8")


# --- subcommands ---------------------------------------------------------------


def cmd_serve(args) -> int:
    from .service import SurveyStore, run_server

    _log_run(args, args.firms)
    store = SurveyStore(
        args.data_dir,
        read_firms_csv(args.firms),
        seed=args.seed,
        pairing=args.pairing,
        k_factor=args.k,
        expectation_mode=args.expectation,
    )
    log.info("listening on %s:%d, data in %s", args.host, args.port, args.data_dir)
    run_server(store, host=args.host, port=args.port, static_dir=args.static_dir)
    return 0


def _load_votes(args) -> list:
    events = read_vote_log(args.votes)
    if getattr(args, "certified_only", False):
        if not args.analysts:
            raise ValueError("--certified-only requires --analysts")
        with open(args.analysts, encoding="utf-8") as handle:
            certified = {
                rec["analyst_id"]
                for rec in map(json.loads, filter(str.strip, handle))
                if rec.get("certified")
            }
        kept = [e for e in events if e.analyst_id in certified]
        log.info("certified filter kept %d of %d votes", len(kept), len(events))
        # renumber so the filtered log is replayable on its own
        events = [dataclasses.replace(e, seq=i + 1) for i, e in enumerate(kept)]
    return events


def _ranking_cmd(args) -> int:
    _log_run(args, args.votes, getattr(args, "firms", None))
    events = _load_votes(args)
    cutoff = parse_timestamp(args.cutoff) if args.cutoff else None
    state = replay(events, _elo_config(args), cutoff=cutoff)
    firms = None
    if args.firms:
        firms = {f.firm_id: f for f in read_firms_csv(args.firms)}
        state = with_universe(state, firms, _elo_config(args))
    write_ranking_csv(
        args.out, snapshot_ranking(state), firms=firms, comments=_headers(args)
    )
    log.info("wrote %s (%d firms)", args.out, len(state.scores))
    return 0


def cmd_sweep_k(args) -> int:
    _log_run(args, args.votes, args.cutoffs)
    events = _load_votes(args)
    waves = load_waves_csv(args.cutoffs)
    k_values = [float(tok) for tok in args.k.split(",") if tok]
    result = sweep_k(events, k_values, waves, expectation_mode=args.expectation)
    payload = {
        "tool": f"disclosure-index {__version__}",
        "k_values": result.k_values,
        "waves": result.wave_names,
        "rho_by_k": {str(k): result.rhos[k] for k in result.k_values},
        "mean_rho_by_k": {str(k): result.mean_rho[k] for k in result.k_values},
        "recommended_k": result.recommended_k,
    }
    _write_json(payload, args.out)
    return 0


def cmd_spearman(args) -> int:
    _log_run(args, args.left, args.right)
    left = {firm: rating for _, firm, _, rating in read_ranking_csv(args.left)}
    right = {firm: rating for _, firm, _, rating in read_ranking_csv(args.right)}
    rho = spearman_rho(ranks_from_scores(left), ranks_from_scores(right))
    print(f"{rho:.6f}")
    return 0


def cmd_pin_estimate(args) -> int:
    _log_run(args, args.trades)
    by_firm = read_trades_csv(args.trades)
    fits = []
    for firm_id in sorted(by_firm):
        try:
            fit = estimate_pin(
                by_firm[firm_id],
                method=args.method,
                seed=args.seed,
                jitter=args.jitter,
                max_iter=args.max_iter,
                tol=args.tol,
            )
        except DOMAIN_ERRORS as exc:
            raise RuntimeError(f"estimation failed for {firm_id}: {exc}") from exc
        fits.append(pin_fit_json(firm_id, fit))
        log.info("%s: pin=%.4f loglik=%.3f", firm_id, fit.pin, fit.log_likelihood)
    payload = {
        "tool": f"disclosure-index {__version__}",
        "method": args.method,
        "seed": args.seed,
        "fits": fits,
    }
    _write_json(payload, args.out)
    return 0


def cmd_pin_simulate(args) -> int:
    _log_run(args)
    params = PinParams(
        mu=args.mu,
        eps_b=args.eps_b,
        eps_s=args.eps_s,
        alpha=args.alpha,
        delta=args.delta,
    )
    days = simulate_trades(params, args.days, args.seed)
    write_trades_csv(args.out, {args.firm_id: days}, comments=_headers(args))
    log.info("wrote %s (%d days)", args.out, args.days)
    return 0


def cmd_panel(args) -> int:
    _log_run(
        args, args.votes, args.cutoffs, args.prices, args.index,
        args.fundamentals, args.coverage, args.earnings,
    )
    events = _load_votes(args)
    waves = load_waves_csv(args.cutoffs)
    prices = load_prices_csv(args.prices)
    index_prices = load_index_csv(args.index)
    fundamentals = load_fundamentals_csv(args.fundamentals)
    coverage = load_coverage_csv(args.coverage)
    earnings = load_earnings_csv(args.earnings)
    config = _elo_config(args)
    ratings_by_wave = {}
    proxies_by_wave = {}
    for wave in waves:
        state = replay(events, config, cutoff=wave.cutoff)
        ratings_by_wave[wave.name] = dict(state.scores)
        proxies_by_wave[wave.name] = wave_proxy_inputs(
            prices, index_prices, fundamentals, coverage, earnings,
            wave.name, wave.cutoff.date(), window=args.window,
        )
    universe = None
    if args.firms:
        universe = [f.firm_id for f in read_firms_csv(args.firms)]
    rows = assemble_panel(ratings_by_wave, proxies_by_wave, universe=universe)
    write_panel_csv(args.out, rows, comments=_headers(args))
    log.info("wrote %s (%d rows)", args.out, len(rows))
    return 0


def _regressors(raw: str) -> list[str]:
    return [tok for tok in raw.split(",") if tok]


def cmd_regress(args) -> int:
    _log_run(args, args.panel)
    rows = read_panel_csv(args.panel)
    fit = ols_fit(rows, args.dependent, _regressors(args.regressors))
    print(format_fit(fit, args.dependent))
    if args.json:
        _write_json(regression_fit_json(fit), args.json)
    return 0


def cmd_eliminate(args) -> int:
    _log_run(args, args.panel)
    rows = read_panel_csv(args.panel)
    fit = backward_eliminate(
        rows, args.dependent, _regressors(args.regressors), args.p_threshold
    )
    print(format_fit(fit, args.dependent))
    if args.json:
        _write_json(regression_fit_json(fit), args.json)
    return 0


def cmd_predict(args) -> int:
    _log_run(args, args.model)
    model = None
    if args.model:
        model = fit_from_json(json.loads(Path(args.model).read_text("utf-8")))
    value = predict_iai(
        args.coverage, args.vol, args.lnsize, args.qtobin, model=model
    )
    print(f"{value:.2f}")
    return 0


# --- parser ----------------------------------------------------------------


def _add_votes_flags(
    p: argparse.ArgumentParser, *, scalar_k: bool = True, cutoff: str | None = None
) -> None:
    p.add_argument("--votes", required=True, help="vote log CSV")
    if scalar_k:
        p.add_argument("--k", type=float, default=24.0, help="k-factor (default 24)")
    p.add_argument(
        "--expectation", choices=["table", "logistic"], default="table",
        help="win-expectation curve",
    )
    p.add_argument(
        "--analysts", help="analysts JSONL (needed for --certified-only)"
    )
    p.add_argument(
        "--certified-only", action="store_true",
        help="keep only votes from certified analysts",
    )
    if cutoff is not None:
        p.add_argument(
            "--cutoff", required=(cutoff == "required"),
            help="ISO-8601 instant; ignore later votes",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="disclosure-index",
        description="Survey-driven firm disclosure ranking and validation pipeline.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument(
        "-q", "--quiet", action="store_true", help="suppress info logging"
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("serve", help="run the survey HTTP service")
    p.add_argument("--firms", required=True, help="firm universe CSV")
    p.add_argument("--data-dir", required=True, help="durable state directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--k", type=float, default=24.0)
    p.add_argument("--expectation", choices=["table", "logistic"], default="table")
    p.add_argument("--pairing", choices=["uniform", "proximity"], default="uniform")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--static-dir", help="serve these files at / (the voting UI)")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("replay", help="rebuild ratings from a vote log")
    _add_votes_flags(p, cutoff="optional")
    p.add_argument("--firms", help="include unrated firms and tickers")
    p.add_argument("--out", required=True, help="ranking CSV to write")
    p.set_defaults(func=_ranking_cmd)

    p = sub.add_parser("snapshot", help="ranking at a wave cutoff")
    _add_votes_flags(p, cutoff="required")
    p.add_argument("--firms", help="include unrated firms and tickers")
    p.add_argument("--out", required=True, help="ranking CSV to write")
    p.set_defaults(func=_ranking_cmd)

    p = sub.add_parser("sweep-k", help="adjacent-wave rank stability per k")
    _add_votes_flags(p, scalar_k=False)
    p.add_argument(
        "--k", default="16,24,36,64,80",
        help="comma-separated k-factors (default 16,24,36,64,80)",
    )
    p.add_argument("--cutoffs", required=True, help="waves CSV (name,cutoff)")
    p.add_argument("--out", help="JSON output (default stdout)")
    p.set_defaults(func=cmd_sweep_k)

    p = sub.add_parser("spearman", help="rank correlation of two rankings")
    p.add_argument("--left", required=True, help="ranking CSV")
    p.add_argument("--right", required=True, help="ranking CSV")
    p.set_defaults(func=cmd_spearman)

    p = sub.add_parser("pin-estimate", help="fit the trade mixture per firm")
    p.add_argument("--trades", required=True, help="firm_id,date,buys,sells CSV")
    p.add_argument(
        "--method", choices=["nelder-mead", "l-bfgs-b"], default="nelder-mead"
    )
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", help="JSON output (default stdout)")
    p.set_defaults(func=cmd_pin_estimate)

    p = sub.add_parser("pin-simulate", help="draw synthetic trade days")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--eps-b", type=float, required=True)
    p.add_argument("--eps-s", type=float, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--days", type=int, default=250)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--firm-id", default="SIM")
    p.add_argument("--out", required=True, help="trades CSV to write")
    p.set_defaults(func=cmd_pin_simulate)

    p = sub.add_parser("panel", help="join wave ratings with market proxies")
    _add_votes_flags(p)
    p.add_argument("--cutoffs", required=True, help="waves CSV (name,cutoff)")
    p.add_argument("--prices", required=True, help="firm_id,date,close,volume[,bid,ask]")
    p.add_argument("--index", required=True, help="date,close index series")
    p.add_argument("--fundamentals", required=True)
    p.add_argument("--coverage", required=True, help="wave,firm_id,analyst_count")
    p.add_argument("--earnings", required=True)
    p.add_argument("--window", type=int, default=252, help="trading days per wave")
    p.add_argument("--firms", help="restrict/validate against this universe")
    p.add_argument("--out", required=True, help="panel CSV to write")
    p.set_defaults(func=cmd_panel)

    p = sub.add_parser("regress", help="pooled OLS of the index on proxies")
    p.add_argument("--panel", required=True, help="panel CSV")
    p.add_argument("--dependent", default="ranking")
    p.add_argument(
        "--regressors",
        default="coverage,error,vol,baa,ln_volume,ln_size,ff,qtobin",
    )
    p.add_argument("--json", help="also write the fit as JSON here")
    p.set_defaults(func=cmd_regress)

    p = sub.add_parser("eliminate", help="backward elimination on the panel")
    p.add_argument("--panel", required=True, help="panel CSV")
    p.add_argument("--dependent", default="ranking")
    p.add_argument(
        "--regressors",
        default="coverage,error,vol,baa,ln_volume,ln_size,ff,qtobin",
    )
    p.add_argument("--p-threshold", type=float, default=0.05)
    p.add_argument("--json", help="also write the fit as JSON here")
    p.set_defaults(func=cmd_eliminate)

    p = sub.add_parser("predict", help="frozen-model index prediction")
    p.add_argument("--coverage", type=float, required=True)
    p.add_argument("--vol", type=float, required=True)
    p.add_argument("--lnsize", type=float, required=True)
    p.add_argument("--qtobin", type=float, required=True)
    p.add_argument("--model", help="refitted model JSON instead of the frozen one")
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.ERROR if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
