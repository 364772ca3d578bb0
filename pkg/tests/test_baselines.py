import pytest

from selective_acting.services.baselines import (
    ACI,
    AlwaysAct,
    FixedThreshold,
    NaiveTuning,
    OfflineCalibrated,
    aci_step,
    always_act,
    clopper_pearson_upper,
    fixed_threshold,
    naive_tuning,
    offline_calibrated,
    run_baseline,
)
from selective_acting.services.eprocess import ThresholdGrid
from selective_acting.services.metrics import selective_risk

GRID = [0.25, 0.5, 0.75]


class TestSimpleRules:
    def test_always_act(self):
        assert always_act(0.99)

    def test_fixed_threshold(self):
        assert fixed_threshold(0.5, 0.5)
        assert not fixed_threshold(0.5, 0.51)

    def test_always_act_risk_is_base_rate(self, stationary_stream):
        result = run_baseline(AlwaysAct(), stationary_stream)
        risk, n = selective_risk(result.trace)
        base_rate = sum(1 for r in stationary_stream if not r.verifier_pass) / len(stationary_stream)
        assert n == len(stationary_stream)
        assert risk == pytest.approx(base_rate)

    def test_fixed_threshold_run(self, stationary_stream):
        result = run_baseline(FixedThreshold(0.4), stationary_stream)
        assert all(r.acted == (r.score <= 0.4) for r in result.trace)
        assert selective_risk(result.trace)[0] == 0.0


class TestNaiveTuning:
    def test_starts_permissive(self):
        assert NaiveTuning(GRID, 0.3).threshold == 0.75

    def test_full_history(self):
        history = [(0.1, True)] * 7 + [(0.6, False)] * 3
        assert naive_tuning(None, 0.3, history, GRID) == 0.75
        assert naive_tuning(None, 0.3, history + [(0.6, False)], GRID) == 0.5

    def test_window_forgets(self):
        history = [(0.6, False)] * 3 + [(0.1, True)] * 4
        assert naive_tuning(None, 0.3, history, GRID) == 0.5
        assert naive_tuning(4, 0.3, history, GRID) == 0.75

    def test_unreleased_cutoff_counts_as_zero(self):
        policy = NaiveTuning(GRID, 0.3)
        policy.observe(0.6, False, True)
        assert policy.threshold == 0.5

    def test_abstained_rounds_ignored(self):
        policy = NaiveTuning(GRID, 0.3)
        policy.observe(0.6, False, False)
        assert policy.threshold == 0.75


class TestACI:
    def test_step(self):
        assert aci_step(0.3, 0.005, 1.0, 0.3) == pytest.approx(0.2965)
        assert aci_step(0.3, 0.005, 0.0, 0.3) == pytest.approx(0.3015)

    def test_empty_window_uses_level(self):
        policy = ACI(0.3)
        assert policy.decide(0.29)
        assert not policy.decide(0.31)

    def test_quantile_cutoff(self):
        policy = ACI(0.25, gamma=0.0)
        for s in range(1, 11):
            policy.observe(s / 10, True, False)
        assert policy.cutoff() == pytest.approx(0.3)
        assert policy.decide(0.3)
        assert not policy.decide(0.31)

    def test_level_outside_unit_interval(self):
        policy = ACI(0.3, gamma=1.0)
        policy.observe(0.2, False, True)
        assert policy.alpha_t == pytest.approx(-0.4)
        assert not policy.decide(0.0)
        policy.alpha_t = 1.2
        assert policy.decide(1.0)

    def test_only_released_failures_are_misses(self):
        policy = ACI(0.3, gamma=0.1)
        policy.observe(0.9, False, False)
        assert policy.alpha_t == pytest.approx(0.33)

    def test_window_is_bounded(self):
        policy = ACI(0.3, window=5)
        for s in range(20):
            policy.observe(s / 20, True, False)
        assert len(policy._scores) == 5


class TestOfflineCalibrated:
    @pytest.fixture
    def cal_pairs(self):
        scores = [(i + 0.5) / 2000 for i in range(2000)]
        return [(s, s < 0.5) for s in scores]

    def test_clopper_pearson_zero_failures(self):
        assert clopper_pearson_upper(0, 100, 0.05) == pytest.approx(1 - 0.05 ** (1 / 100))
        assert clopper_pearson_upper(0, 0, 0.05) == 1.0
        assert clopper_pearson_upper(5, 5, 0.05) == 1.0

    def test_largest_certified_cutoff(self, cal_pairs):
        grid = ThresholdGrid.uniform(20).thresholds
        assert offline_calibrated(cal_pairs, 0.05, grid, 0.3) == pytest.approx(14 / 21)

    def test_refuses_when_nothing_qualifies(self):
        pairs = [(0.1, False)] * 100
        policy = OfflineCalibrated(pairs, 0.05, GRID, 0.3)
        assert policy.refused
        assert policy.threshold is None
        assert not policy.decide(0.0)

    def test_constant_cutoff_run(self, cal_pairs, stationary_stream):
        policy = OfflineCalibrated(cal_pairs, 0.05, ThresholdGrid.uniform(20).thresholds, 0.3)
        result = run_baseline(policy, stationary_stream)
        assert all(r.deployed_q == pytest.approx(14 / 21) for r in result.trace)
