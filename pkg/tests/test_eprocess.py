import math

import numpy as np
import pytest

from selective_acting.exceptions import ContractViolation
from selective_acting.services.eprocess import (
    ThresholdGrid,
    ThresholdState,
    adaptive_bet,
    bet_cap,
    certification_delay_bound,
    certify_check,
    eprocess_update,
    fixed_bet_for_margin,
    increment,
)


class TestThresholdGrid:
    def test_uniform_grid(self):
        grid = ThresholdGrid.uniform(20)
        assert grid.m == 20
        assert grid[0] == pytest.approx(1 / 21)
        assert grid[-1] == pytest.approx(20 / 21)

    def test_rejects_unsorted_or_out_of_range(self):
        with pytest.raises(ValueError):
            ThresholdGrid((0.5, 0.4))
        with pytest.raises(ValueError):
            ThresholdGrid((0.0, 0.5))
        with pytest.raises(ValueError):
            ThresholdGrid((0.5, 1.0))
        with pytest.raises(ValueError):
            ThresholdGrid(())


class TestIncrement:
    def test_values(self):
        assert increment(True, True, 0.3) == pytest.approx(-0.3)
        assert increment(True, False, 0.3) == pytest.approx(0.7)
        assert increment(False, False, 0.3) == 0.0
        assert increment(False, True, 0.3) == 0.0


class TestAdaptiveBet:
    def test_no_history_bets_nothing(self):
        assert adaptive_bet(0.0, 0, 0.3) == 0.0

    def test_positive_mean_bets_nothing(self):
        assert adaptive_bet(2.0, 10, 0.3) == 0.0

    def test_plug_in_value(self):
        assert adaptive_bet(-3.0, 10, 0.3) == pytest.approx(0.3 / 0.49)

    def test_clipped_at_cap(self):
        assert adaptive_bet(-10.0, 10, 0.3) == pytest.approx(bet_cap(0.3))
        assert bet_cap(0.3) == pytest.approx(1 / 1.4)


class TestEprocessUpdate:
    def test_log_space_update(self):
        state = eprocess_update(ThresholdState(), 0.5, -0.3)
        assert state.log_e == pytest.approx(math.log(1.15))
        assert state.sum_x == pytest.approx(-0.3)
        assert state.n == 1
        assert not state.certified

    def test_zero_bet_keeps_value(self):
        state = eprocess_update(ThresholdState(), 0.0, 0.7)
        assert state.log_e == 0.0
        assert state.n == 1

    def test_non_positive_factor_raises(self):
        with pytest.raises(ContractViolation):
            eprocess_update(ThresholdState(), 2.0, 0.7)

    def test_capped_bet_keeps_factor_positive(self):
        state = eprocess_update(ThresholdState(), bet_cap(0.3), 0.7)
        assert state.log_e == pytest.approx(math.log(0.5))


class TestCertification:
    def test_threshold_crossing(self):
        level = math.log(800.0)
        assert certify_check(ThresholdState(log_e=level + 1e-9), 1 / 800)
        assert not certify_check(ThresholdState(log_e=level - 1e-3), 1 / 800)

    def test_delay_bound(self):
        assert certification_delay_bound(1 / 800, 0.1) == pytest.approx(400 * (math.log(800) + 1))
        assert certification_delay_bound(0.01, 0.0) == math.inf

    def test_fixed_bet_for_margin(self):
        assert fixed_bet_for_margin(0.1) == pytest.approx(0.05)
        assert fixed_bet_for_margin(0.1, pi_min=0.2) == pytest.approx(0.01)



class TestSupermartingaleMean:
    @pytest.mark.parametrize("failure_rate", [0.3, 0.4])
    def test_mean_at_fixed_round_at_most_one(self, failure_rate):
        """At or above alpha the e-value at a fixed round has mean at most 1"""
        alpha, paths, horizon = 0.3, 4000, 40
        rng = np.random.default_rng(77)
        values = np.empty(paths)
        for i in range(paths):
            opened = rng.random(horizon) < 0.6
            failures = rng.random(horizon) < failure_rate
            state = ThresholdState()
            for gate, failed in zip(opened.tolist(), failures.tolist()):
                if not gate:
                    continue
                x = increment(True, not failed, alpha)
                state = eprocess_update(state, adaptive_bet(state.sum_x, state.n, alpha), x)
            values[i] = math.exp(state.log_e)
        se = values.std(ddof=1) / math.sqrt(paths)
        assert values.mean() <= 1.0 + 3.0 * se


@pytest.mark.slow
class TestVilleProperty:
    @pytest.mark.parametrize("delta", [0.05, 0.1])
    def test_crossing_frequency_under_null(self, delta):
        """Failure probability exactly alpha: the adaptive e-process rarely reaches 1/delta"""
        alpha, paths, horizon = 0.3, 10_000, 300
        rng = np.random.default_rng(2024)
        level = math.log(1 / delta)
        crossings = 0
        for _ in range(paths):
            failures = rng.random(horizon) < alpha
            state = ThresholdState()
            for failed in failures.tolist():
                x = 1 - alpha if failed else -alpha
                state = eprocess_update(state, adaptive_bet(state.sum_x, state.n, alpha), x)
                if state.log_e >= level:
                    crossings += 1
                    break
        sigma = math.sqrt(delta * (1 - delta) / paths)
        assert crossings / paths <= delta + 3 * sigma
