"""
Statistical acceptance runs on the desk-scale stationary setup (tau = 0.5,
alpha = 0.30, delta = 0.05, m = 20, T = 3000, burn-in 500 accepts).
"""

import math
import time

import numpy as np
import pytest

from selective_acting.models.schemas import ConditionSpec, ExperimentConfig, SeedSpec
from selective_acting.services.controller import ControllerConfig, initial_state, observe
from selective_acting.services.eprocess import ThresholdGrid, certification_delay_bound
from selective_acting.services.experiment_runner import build_stream, run_experiment
from selective_acting.services.metrics import delay_rate_slope
from selective_acting.services.presets import preset
from selective_acting.services.seeding import resolve_seeds
from selective_acting.services.streams import ThresholdOracle

pytestmark = pytest.mark.slow

PP = 0.01


class TestRiskControl:
    def test_stationary_csa(self):
        config = ExperimentConfig(name="stationary_csa", conditions=[ConditionSpec()], seeds=SeedSpec(n_reps=50))
        row = run_experiment(config).rows[0]
        assert row.risk_mean == pytest.approx(0.191, abs=2 * PP)
        assert row.risk_max <= 0.26
        assert row.ar_mean == pytest.approx(0.598, abs=5 * PP)
        assert row.pathv_strict_count == 0

    def test_no_false_certification(self):
        row = run_experiment(preset("stationary_validity")).rows[0]
        assert row.n_reps == 500
        assert row.fcr_events_total <= 25


class TestAblations:
    def test_adaptive_against_fixed_bets(self):
        rows = run_experiment(preset("ablation_lambda")).rows
        adaptive, lam_001, lam_050 = rows[0], rows[1], rows[5]
        assert adaptive.risk_mean == pytest.approx(0.190, abs=2 * PP)
        assert adaptive.ar_mean == pytest.approx(0.598, abs=5 * PP)
        assert 12 <= adaptive.certified_mean <= 15
        assert 337 * 0.6 <= adaptive.delay_mean <= 337 * 1.4
        assert lam_001.certified_mean == 0
        assert lam_050.risk_mean == pytest.approx(adaptive.risk_mean, abs=2 * PP)
        assert lam_050.ar_mean == pytest.approx(adaptive.ar_mean, abs=5 * PP)

    def test_grid_size(self):
        rows = run_experiment(preset("ablation_grid")).rows
        expected_risk = [0.167, 0.195, 0.204, 0.207]
        expected_ar = [0.581, 0.602, 0.606, 0.607]
        for row, risk, ar in zip(rows, expected_risk, expected_ar):
            assert row.risk_mean == pytest.approx(risk, abs=2 * PP)
            assert row.ar_mean == pytest.approx(ar, abs=5 * PP)
            assert row.fcr_events_total == 0


class TestStress:
    def test_surrogate_bias(self):
        """A pure score shift under a fixed grid leaves risk and action rate near the unbiased row"""
        rows = {row.label["b"]: row for row in run_experiment(preset("stress_bias")).rows}
        unbiased = rows[0.0]
        assert unbiased.risk_mean == pytest.approx(0.191, abs=2 * PP)
        assert unbiased.ar_mean == pytest.approx(0.598, abs=5 * PP)
        for row in rows.values():
            assert row.risk_mean <= 0.30
            assert row.risk_mean == pytest.approx(unbiased.risk_mean, abs=3 * PP)
            assert row.ar_mean == pytest.approx(unbiased.ar_mean, abs=5 * PP)

    def test_noisy_verifier(self):
        rows = {row.label["p"]: row for row in run_experiment(preset("stress_noise")).rows}
        for p, risk, ar in [(0.0, 0.191, 0.598), (0.02, 0.196, 0.563)]:
            assert rows[p].risk_mean == pytest.approx(risk, abs=2 * PP)
            assert rows[p].ar_mean == pytest.approx(ar, abs=5 * PP)
        for p, row in rows.items():
            assert row.risk_mean <= 0.30
            # every released round fails with probability at least p
            assert row.risk_mean >= p - PP
        assert rows[0.20].ar_mean < rows[0.10].ar_mean < rows[0.0].ar_mean


class TestCertificationDelay:
    def test_delay_rate(self):
        bundle = run_experiment(preset("delay_rate"))
        row = bundle.rows[0]
        grid = ThresholdGrid.uniform(20)
        oracle = ThresholdOracle(alpha=0.30, tau=0.5)
        delta_q = 0.05 / 40

        margins, delays = [], []
        for k, q in enumerate(grid):
            delay = row.delay_by_threshold[k]
            eta = oracle.margin(q)
            if delay is None or eta <= 0:
                continue
            assert delay <= certification_delay_bound(delta_q, eta)
            if q > oracle.tau:
                margins.append(eta)
                delays.append(delay)

        assert len(margins) >= 3
        assert -2.5 <= delay_rate_slope(margins, delays) <= -1.5


class TestSparseVerifier:
    def test_delay_scaling_and_calls(self):
        bundle = run_experiment(preset("sparse_sweep"))
        rows = bundle.rows
        dense = rows[0]
        for row in rows[1:]:
            pi = row.label["pi"]
            multiplier = row.first_cert_mean / dense.first_cert_mean
            assert 0.6 / pi <= multiplier <= 1.6 / pi
            half = 3.0 * math.sqrt(pi * (1.0 - pi) * 2000)
            assert pi * 2000 - half <= row.verifier_calls_mean <= pi * 2000 + half
            assert row.risk_mean <= 0.30
        for row in rows:
            assert row.fcr_events_total / row.n_reps <= 0.05


class TestBaselineSeparation:
    def test_easy_hard_ordering(self):
        bundle = run_experiment(preset("shift_orderings"))
        rows = {(row.label["ordering"], row.label["method"]): row for row in bundle.rows}
        assert rows[("easy_hard", "csa")].pathv_strict_count == 0
        assert rows[("easy_hard", "always_act")].pathv_strict_count == 10
        assert rows[("easy_hard", "aci")].pathv_strict_count >= 5

        config = bundle.config
        seeds = resolve_seeds(config.seeds.base_seed, config.seeds.n_reps, config.seeds.seeds)
        always_spec = next(c for c in config.conditions
                           if c.label == {"ordering": "easy_hard", "method": "always_act"})
        always = next(c for c in bundle.conditions if c.label == always_spec.label)
        for (_, _, seed), summary in zip(seeds, always.summaries):
            stream = build_stream(always_spec, seed)
            base_rate = sum(1 for r in stream if not r.verifier_pass) / len(stream)
            assert summary.AR == 1.0
            assert summary.final_risk == pytest.approx(base_rate, abs=PP)

        csa = next(c for c in bundle.conditions if c.label == {"ordering": "easy_hard", "method": "csa"})
        assert all(summary.final_risk <= 0.30 for summary in csa.summaries)

    def test_naive_tuning_excursions(self):
        """Naive-Tuning with unbounded history crosses alpha on some stationary paths"""
        rows = {row.label["method"]: row for row in run_experiment(preset("stationary")).rows}
        assert rows["naive_tuning"].pathv_strict_count >= 1
        assert rows["csa"].pathv_strict_count == 0


class TestEpochs:
    def test_monotone_frontier_validity(self):
        rows = run_experiment(preset("epoch_demo")).rows
        assert all(row.fcr_events_total == 0 for row in rows)
        assert all(row.frontier_drops_mean == 0 for row in rows)


class TestPerformance:
    def test_observe_cost(self):
        grid = ThresholdGrid.uniform(15)
        config = ControllerConfig(alpha=0.3, delta=0.05, grid=grid)
        rng = np.random.default_rng(0)
        scores = rng.random(1_000_000).tolist()
        state = initial_state(config)
        start = time.perf_counter()
        for score in scores:
            state = observe(state, score, score < 0.5, config)
        per_round = (time.perf_counter() - start) / len(scores)
        assert per_round < 50e-6
        assert math.isfinite(state.states[0].log_e)
