import os

# in-memory database for every test session; must precede package imports
os.environ["CSA_DATABASE_URL"] = "sqlite://"

import pytest

from selective_acting.models.schemas import BudgetScheme
from selective_acting.services.controller import ControllerConfig, RoundRecord
from selective_acting.services.eprocess import ThresholdGrid
from selective_acting.services.streams import Round, StationarySpec, gen_stationary


@pytest.fixture
def grid():
    """Default synthetic grid i/21, i = 1..20"""
    return ThresholdGrid.uniform(20)


@pytest.fixture
def config(grid):
    return ControllerConfig(alpha=0.30, delta=0.05, grid=grid, budget_scheme=BudgetScheme.EQUAL_HALVED, burn_in=500)


@pytest.fixture
def stationary_stream():
    return gen_stationary(StationarySpec(tau=0.5, alpha=0.30, T=3000), seed=123)


def make_trace(outcomes, acted=None):
    """Round records from verifier outcomes; every round released unless `acted` says otherwise"""
    acted = acted if acted is not None else [True] * len(outcomes)
    return [RoundRecord(t, 0.1, 0.5, a, v) for t, (a, v) in enumerate(zip(acted, outcomes), start=1)]


def make_rounds(pairs):
    return [Round(t, s, v) for t, (s, v) in enumerate(pairs, start=1)]
