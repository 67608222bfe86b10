"""Trade-mixture likelihoods, simulator, and the multi-start MLE."""
from __future__ import annotations

import math
from datetime import date

import numpy as np
import pytest
from scipy import optimize, stats

from disclosure_index.pin import (
    DegenerateInputError,
    PinDomainError,
    PinParams,
    TradeDay,
    _from_unconstrained,
    _to_unconstrained,
    day_likelihood_direct,
    estimate_pin,
    fit_to_json,
    log_likelihood_factorized,
    pin_ratio,
    read_trades_csv,
    simulate_trades,
    write_trades_csv,
)

D0 = date(2016, 1, 4)


def _day(buys: int, sells: int) -> TradeDay:
    return TradeDay(day=D0, buys=buys, sells=sells)


def _random_params(rng) -> PinParams:
    return PinParams(
        mu=rng.uniform(0.1, 8.0),
        eps_b=rng.uniform(0.1, 8.0),
        eps_s=rng.uniform(0.1, 8.0),
        alpha=rng.uniform(0.05, 0.95),
        delta=rng.uniform(0.05, 0.95),
    )


class TestParams:
    def test_bounds_enforced(self):
        with pytest.raises(PinDomainError):
            PinParams(mu=-1, eps_b=1, eps_s=1, alpha=0.5, delta=0.5)
        with pytest.raises(PinDomainError):
            PinParams(mu=1, eps_b=0, eps_s=1, alpha=0.5, delta=0.5)
        with pytest.raises(PinDomainError):
            PinParams(mu=1, eps_b=1, eps_s=1, alpha=1.5, delta=0.5)
        with pytest.raises(PinDomainError):
            PinParams(mu=1, eps_b=1, eps_s=1, alpha=0.5, delta=-0.1)

    def test_rate_fractions(self):
        params = PinParams(mu=2.0, eps_b=1.0, eps_s=3.0, alpha=0.5, delta=0.5)
        assert params.x_b == pytest.approx(1.0 / 3.0)
        assert params.x_s == pytest.approx(3.0 / 5.0)

    def test_pin_ratio(self):
        params = PinParams(mu=60, eps_b=40, eps_s=40, alpha=0.4, delta=0.5)
        assert pin_ratio(params) == pytest.approx(24.0 / 104.0)

    def test_pin_monotone_in_informed_arrivals(self):
        pins = [
            pin_ratio(PinParams(mu=mu, eps_b=40, eps_s=40, alpha=0.4, delta=0.5))
            for mu in (1, 10, 60, 200)
        ]
        assert pins == sorted(pins)


class TestDirectLikelihood:
    def test_alpha_zero_collapses_to_two_poissons(self):
        params = PinParams(mu=7.0, eps_b=2.0, eps_s=3.5, alpha=0.0, delta=0.5)
        for b, s in [(0, 0), (2, 3), (10, 1)]:
            expected = stats.poisson.pmf(b, 2.0) * stats.poisson.pmf(s, 3.5)
            assert day_likelihood_direct(_day(b, s), params) == pytest.approx(
                expected, rel=1e-12
            )

    def test_hand_evaluated_zero_count_day(self):
        # three branches at B=S=0, theta=(1,1,1,.5,.5):
        #   .25 e^{-2} e^{-1} + .25 e^{-1} e^{-2} + .5 e^{-1} e^{-1}
        # = .5 e^{-3} + .5 e^{-2} = 0.0925611758...
        params = PinParams(mu=1, eps_b=1, eps_s=1, alpha=0.5, delta=0.5)
        assert day_likelihood_direct(_day(0, 0), params) == pytest.approx(
            0.0925611758022383, rel=1e-12
        )

    def test_normalizes_over_support(self):
        params = PinParams(mu=2.0, eps_b=1.5, eps_s=1.0, alpha=0.3, delta=0.6)
        total = sum(
            day_likelihood_direct(_day(b, s), params)
            for b in range(201)
            for s in range(201)
        )
        assert total == pytest.approx(1.0, abs=1e-9)


class TestFactorizedLikelihood:
    def test_matches_direct_on_random_draws(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            params = _random_params(rng)
            days = [
                TradeDay(day=D0, buys=int(rng.integers(0, 21)),
                         sells=int(rng.integers(0, 21)))
                for _ in range(rng.integers(1, 8))
            ]
            direct = sum(
                math.log(day_likelihood_direct(d, params)) for d in days
            )
            factorized = log_likelihood_factorized(days, params)
            assert factorized == pytest.approx(direct, abs=1e-9)

    def test_alpha_zero_limit(self):
        params = PinParams(mu=5.0, eps_b=2.0, eps_s=4.0, alpha=0.0, delta=0.5)
        days = [_day(1, 3), _day(0, 6), _day(4, 4)]
        expected = sum(
            stats.poisson.logpmf(d.buys, 2.0) + stats.poisson.logpmf(d.sells, 4.0)
            for d in days
        )
        assert log_likelihood_factorized(days, params) == pytest.approx(
            expected, rel=1e-12
        )

    def test_finite_where_direct_form_dies(self):
        # the direct product underflows float64 at counts this large;
        # the factorized form stays finite
        params = PinParams(mu=60, eps_b=40, eps_s=40, alpha=0.4, delta=0.5)
        big = _day(5000, 5000)
        assert day_likelihood_direct(big, params) == 0.0
        value = log_likelihood_factorized([big], params)
        assert math.isfinite(value)
        assert value < -1000  # astronomically unlikely, but representable

    def test_relabeling_symmetry(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            params = _random_params(rng)
            days = [
                TradeDay(day=D0, buys=int(rng.integers(0, 30)),
                         sells=int(rng.integers(0, 30)))
                for _ in range(5)
            ]
            mirrored = PinParams(
                mu=params.mu, eps_b=params.eps_s, eps_s=params.eps_b,
                alpha=params.alpha, delta=1.0 - params.delta,
            )
            swapped = [
                TradeDay(day=d.day, buys=d.sells, sells=d.buys) for d in days
            ]
            assert log_likelihood_factorized(days, params) == pytest.approx(
                log_likelihood_factorized(swapped, mirrored), rel=1e-12
            )

    def test_gradient_matches_central_differences(self):
        # forward differences (what the quasi-Newton route consumes) against
        # an independent central-difference estimate
        params = PinParams(mu=50, eps_b=30, eps_s=45, alpha=0.4, delta=0.6)
        days = simulate_trades(params, 60, seed=8)

        def objective(z):
            return -log_likelihood_factorized(days, _from_unconstrained(z))

        rng = np.random.default_rng(21)
        for _ in range(5):
            z = _to_unconstrained(PinParams(
                mu=rng.uniform(20, 80), eps_b=rng.uniform(20, 60),
                eps_s=rng.uniform(20, 60), alpha=rng.uniform(0.2, 0.8),
                delta=rng.uniform(0.2, 0.8),
            ))
            forward = optimize.approx_fprime(z, objective, 1.49e-8)
            central = np.empty_like(z)
            for i in range(len(z)):
                h = 1e-6 * max(1.0, abs(z[i]))
                zp, zm = z.copy(), z.copy()
                zp[i] += h
                zm[i] -= h
                central[i] = (objective(zp) - objective(zm)) / (2 * h)
            np.testing.assert_allclose(forward, central, rtol=1e-4, atol=1e-6)


class TestSimulator:
    def test_same_seed_identical(self):
        params = PinParams(mu=10, eps_b=5, eps_s=5, alpha=0.3, delta=0.5)
        assert simulate_trades(params, 50, seed=4) == simulate_trades(
            params, 50, seed=4
        )

    def test_mu_zero_means(self):
        params = PinParams(mu=0.0, eps_b=6.0, eps_s=9.0, alpha=0.5, delta=0.5)
        days = simulate_trades(params, 20_000, seed=5)
        assert np.mean([d.buys for d in days]) == pytest.approx(6.0, rel=0.03)
        assert np.mean([d.sells for d in days]) == pytest.approx(9.0, rel=0.03)

    def test_law_of_large_numbers(self):
        params = PinParams(mu=60, eps_b=40, eps_s=40, alpha=0.4, delta=0.5)
        days = simulate_trades(params, 100_000, seed=6)
        mean_buys = np.mean([d.buys for d in days])
        mean_sells = np.mean([d.sells for d in days])
        assert mean_buys == pytest.approx(40 + 0.4 * 0.5 * 60, rel=0.01)
        assert mean_sells == pytest.approx(40 + 0.4 * 0.5 * 60, rel=0.01)

    def test_rejects_no_days(self):
        params = PinParams(mu=1, eps_b=1, eps_s=1, alpha=0.5, delta=0.5)
        with pytest.raises(PinDomainError):
            simulate_trades(params, 0, seed=1)


class TestEstimate:
    def test_recovers_simulated_pin(self):
        true = PinParams(mu=60, eps_b=40, eps_s=40, alpha=0.4, delta=0.5)
        days = simulate_trades(true, 250, seed=0)
        fit = estimate_pin(days)
        assert fit.converged
        assert fit.starts_tried == 9
        assert abs(fit.pin - pin_ratio(true)) < 0.05
        # the reported pin is the ratio of the fitted params
        assert fit.pin == pytest.approx(pin_ratio(fit.params), rel=1e-12)

    def test_no_event_data_fits_near_zero_pin(self):
        quiet = PinParams(mu=0.0, eps_b=30.0, eps_s=30.0, alpha=0.0, delta=0.5)
        days = simulate_trades(quiet, 250, seed=2)
        fit = estimate_pin(days)
        assert fit.pin < 0.05

    def test_deterministic_given_seed(self):
        days = simulate_trades(
            PinParams(mu=20, eps_b=10, eps_s=10, alpha=0.5, delta=0.5), 80, seed=3
        )
        first = estimate_pin(days, seed=42)
        second = estimate_pin(days, seed=42)
        assert first.params == second.params
        assert first.log_likelihood == second.log_likelihood

    def test_quasi_newton_route_agrees(self):
        days = simulate_trades(
            PinParams(mu=40, eps_b=30, eps_s=30, alpha=0.5, delta=0.5), 150, seed=9
        )
        simplex = estimate_pin(days, method="nelder-mead")
        quasi = estimate_pin(days, method="l-bfgs-b")
        assert abs(simplex.pin - quasi.pin) < 0.02

    def test_single_repeated_day_is_low_confidence(self):
        with pytest.warns(UserWarning):
            fit = estimate_pin([_day(5, 5)])
        assert any("low-confidence" in w for w in fit.warnings)
        assert math.isfinite(fit.log_likelihood)

    def test_short_window_warns(self):
        days = simulate_trades(
            PinParams(mu=10, eps_b=5, eps_s=5, alpha=0.4, delta=0.5), 10, seed=1
        )
        with pytest.warns(UserWarning, match="10 trade days"):
            estimate_pin(days)

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(DegenerateInputError):
            estimate_pin([])
        with pytest.raises(DegenerateInputError):
            estimate_pin([_day(0, 0), _day(0, 0)])

    def test_likelihood_peaks_near_truth(self):
        # average log-likelihood at the generating parameters beats a
        # perturbed parameter vector across simulations
        true = PinParams(mu=30, eps_b=20, eps_s=20, alpha=0.5, delta=0.5)
        off = PinParams(mu=45, eps_b=14, eps_s=26, alpha=0.25, delta=0.8)
        margins = []
        for seed in range(10):
            days = simulate_trades(true, 100, seed=seed)
            margins.append(
                log_likelihood_factorized(days, true)
                - log_likelihood_factorized(days, off)
            )
        assert np.mean(margins) > 0


class TestFiles:
    def test_trades_round_trip(self, tmp_path):
        params = PinParams(mu=10, eps_b=5, eps_s=5, alpha=0.3, delta=0.5)
        by_firm = {
            "FA": simulate_trades(params, 7, seed=1),
            "FB": simulate_trades(params, 4, seed=2),
        }
        path = tmp_path / "trades.csv"
        write_trades_csv(path, by_firm, comments=["fixture"])
        assert read_trades_csv(path) == by_firm

    def test_trades_header_checked(self, tmp_path):
        path = tmp_path / "trades.csv"
        path.write_text("firm,day,b,s\n")
        with pytest.raises(PinDomainError):
            read_trades_csv(path)

    def test_fit_json_shape(self):
        days = simulate_trades(
            PinParams(mu=20, eps_b=10, eps_s=10, alpha=0.5, delta=0.5), 60, seed=3
        )
        record = fit_to_json("FA", estimate_pin(days))
        assert set(record) == {
            "firm_id", "mu", "eps_b", "eps_s", "alpha", "delta",
            "pin", "loglik", "converged", "starts_tried",
        }
        assert record["firm_id"] == "FA"
        assert record["pin"] == pytest.approx(
            record["alpha"] * record["mu"]
            / (record["alpha"] * record["mu"] + record["eps_b"] + record["eps_s"])
        )
