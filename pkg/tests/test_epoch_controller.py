import math

import pytest

from selective_acting.services.controller import initial_state, observe, run_stream
from selective_acting.services.epoch_controller import (
    EpochSchedule,
    cumulative_epoch_budget,
    epoch_budget,
    reset_epoch,
    run_stream_epoch,
)
from selective_acting.services.eprocess import certification_delay_bound
from selective_acting.services.streams import StationarySpec, ThresholdOracle, gen_stationary


class TestEpochBudget:
    def test_values(self):
        assert epoch_budget(1, 15, 0.10) == pytest.approx(0.6 / (math.pi ** 2 * 15))
        assert epoch_budget(1, 15, 0.10) == pytest.approx(0.0040528, rel=1e-4)
        assert epoch_budget(2, 15, 0.10) == pytest.approx(0.0010132, rel=1e-4)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            epoch_budget(0, 15, 0.1)
        with pytest.raises(ValueError):
            epoch_budget(1, 0, 0.1)

    def test_budget_conservation(self):
        delta = 0.05
        total = cumulative_epoch_budget(10_000, 20, delta)
        assert total < delta
        assert total == pytest.approx(delta, rel=1e-3)

    def test_partial_sums_increase(self):
        sums = [cumulative_epoch_budget(j, 20, 0.05) for j in (1, 10, 100)]
        assert sums[0] < sums[1] < sums[2] < 0.05


class TestEpochSchedule:
    def test_fixed_length_boundaries(self):
        schedule = EpochSchedule(fixed_length=1500)
        assert not schedule.is_boundary(1)
        assert not schedule.is_boundary(1500)
        assert schedule.is_boundary(1501)
        assert schedule.epoch_of(1500) == 1
        assert schedule.epoch_of(1501) == 2
        assert schedule.epoch_of(3001) == 3

    def test_explicit_boundaries(self):
        schedule = EpochSchedule(boundaries=[1, 100, 250])
        assert schedule.is_boundary(100)
        assert not schedule.is_boundary(101)
        assert schedule.epoch_of(260) == 3

    @pytest.mark.parametrize("kwargs", [
        {"boundaries": [2, 10]},
        {"boundaries": [1, 10, 10]},
        {"boundaries": [1], "fixed_length": 10},
        {},
        {"fixed_length": 0},
    ])
    def test_invalid_schedules(self, kwargs):
        with pytest.raises(ValueError):
            EpochSchedule(**kwargs)


class TestResetEpoch:
    def test_reset_discards_everything(self, config):
        state = initial_state(config)
        for _ in range(100):
            state = observe(state, 0.01, True, config)
        assert state.deployed is not None

        reset = reset_epoch(state, config)
        assert reset.epoch == 2
        assert reset.deployed is None
        assert reset.delta_q == pytest.approx(epoch_budget(2, config.m, config.delta))
        assert all(s.log_e == 0.0 and s.n == 0 and s.sum_x == 0.0 and not s.certified for s in reset.states)


class TestRunStreamEpoch:
    def test_single_epoch_matches_single_controller(self, config, stationary_stream):
        epoch_run = run_stream_epoch(config, EpochSchedule.single(), stationary_stream)
        plain = run_stream(config, stationary_stream, delta_q=epoch_budget(1, config.m, config.delta))
        assert epoch_run.trace == plain.trace
        assert epoch_run.certifications == plain.certifications
        assert len(epoch_run.epochs) == 1

    def test_two_epochs_revoke_at_boundary(self, config, stationary_stream):
        result = run_stream_epoch(config, EpochSchedule(fixed_length=1500), stationary_stream)
        assert [(e.start, e.end) for e in result.epochs] == [(1, 1500), (1501, 3000)]
        assert result.epochs[0].budget_spent == pytest.approx(epoch_budget(1, 20, 0.05) * 20)
        assert result.epochs[1].budget_spent == pytest.approx(cumulative_epoch_budget(2, 20, 0.05))
        assert result.trace[1500].deployed_q is None
        assert not result.trace[1500].acted
        assert any(r.deployed_q is not None for r in result.trace[:1500])
        assert all(event.epoch == (1 if event.t <= 1500 else 2) for event in result.certifications)

    def test_recertifies_after_reset(self, config, stationary_stream):
        result = run_stream_epoch(config, EpochSchedule(fixed_length=1500), stationary_stream)
        assert any(event.epoch == 2 for event in result.certifications)

    @pytest.mark.slow
    def test_recertification_delay_within_bound(self, config):
        """Widest-margin cutoff recertifies after a reset within the epoch-2 delay bound on average"""
        oracle = ThresholdOracle(alpha=0.30, tau=0.5)
        widest = max(range(config.m), key=lambda k: oracle.margin(config.grid[k]))
        eta = oracle.margin(config.grid[widest])
        reset_at, T = 1501, 4500
        bound = certification_delay_bound(epoch_budget(2, config.m, config.delta), eta)

        delays = []
        for seed in range(100):
            stream = gen_stationary(StationarySpec(tau=0.5, alpha=0.30, T=T), seed=1000 + seed)
            result = run_stream_epoch(config, EpochSchedule(boundaries=(1, reset_at)), stream)
            first = next((e.t for e in result.certifications if e.epoch == 2 and e.index == widest), T + 1)
            delays.append(first - reset_at + 1)
        assert sum(delays) / len(delays) <= bound
