"""
Single-epoch selective acting controller.

Each round the controller releases iff the score is at or below the deployed
cutoff, then fans the verifier outcome out to every threshold whose gate was
open (q >= score), whether or not the round was released. The deployed cutoff
is the largest certified threshold.
"""

import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from selective_acting.models.schemas import BudgetScheme
from selective_acting.services.eprocess import (
    ThresholdGrid,
    ThresholdState,
    adaptive_bet,
    bet_cap,
    certify_check,
    eprocess_update,
    fixed_bet_for_margin,
    increment,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ControllerConfig:
    alpha: float
    delta: float
    grid: ThresholdGrid
    budget_scheme: BudgetScheme = BudgetScheme.EQUAL_HALVED
    burn_in: int = 500
    fixed_bet: Optional[float] = None
    bet_margin: Optional[float] = None

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")
        if self.fixed_bet is not None and not 0.0 <= self.fixed_bet <= bet_cap(self.alpha):
            raise ValueError(
                f"fixed bet {self.fixed_bet} outside [0, {bet_cap(self.alpha):.6f}]"
            )
        if self.bet_margin is not None:
            if self.fixed_bet is not None:
                raise ValueError("set either fixed_bet or bet_margin, not both")
            if not 0.0 < self.bet_margin <= self.alpha:
                raise ValueError(f"bet margin must lie in (0, alpha], got {self.bet_margin}")
        object.__setattr__(self, "budget_scheme", BudgetScheme(self.budget_scheme))

    @property
    def m(self) -> int:
        return self.grid.m

    def delta_q(self) -> float:
        """Per-threshold budget of the configured Bonferroni split"""
        if self.budget_scheme == BudgetScheme.EQUAL:
            return self.delta / self.m
        return self.delta / (2 * self.m)

    def fixed_lambda(self, pi_min: float = 1.0) -> Optional[float]:
        """Constant bet if one is configured, either directly or from a target margin"""
        if self.fixed_bet is not None:
            return self.fixed_bet
        if self.bet_margin is not None:
            return fixed_bet_for_margin(self.bet_margin, pi_min)
        return None

    def bet(self, state: ThresholdState) -> float:
        lam = self.fixed_lambda()
        if lam is not None:
            return lam
        return adaptive_bet(state.sum_x, state.n, self.alpha)


@dataclass(slots=True)
class ControllerState:
    grid: ThresholdGrid
    states: Tuple[ThresholdState, ...]
    deployed: Optional[int]
    delta_q: float
    epoch: int = 1
    newly_certified: Tuple[int, ...] = ()

    @property
    def deployed_q(self) -> Optional[float]:
        if self.deployed is None:
            return None
        return self.grid[self.deployed]

    def certified_indices(self) -> List[int]:
        return [k for k, s in enumerate(self.states) if s.certified]


@dataclass(slots=True)
class RoundRecord:
    t: int
    score: float
    deployed_q: Optional[float]
    acted: bool
    verifier_pass: bool
    coin: Optional[bool] = None


@dataclass(frozen=True)
class CertificationEvent:
    t: int
    index: int
    cutoff: float
    epoch: int = 1


@dataclass
class EpochSummary:
    epoch: int
    start: int
    end: int
    certified_count: int
    deployed_q: Optional[float]
    budget_spent: float = 0.0


@dataclass
class RunResult:
    """Trace and final controller state of one run, plus bookkeeping"""

    trace: List[RoundRecord]
    final: Optional[ControllerState]
    certifications: List[CertificationEvent] = field(default_factory=list)
    verifier_calls: int = 0
    epochs: List[EpochSummary] = field(default_factory=list)
    seed: Optional[int] = None


def initial_state(config: ControllerConfig, delta_q: Optional[float] = None, epoch: int = 1) -> ControllerState:
    return ControllerState(
        grid=config.grid,
        states=tuple(ThresholdState() for _ in range(config.m)),
        deployed=None,
        delta_q=config.delta_q() if delta_q is None else delta_q,
        epoch=epoch,
    )


def decide(state: ControllerState, score: float) -> Tuple[bool, Optional[float]]:
    deployed_q = state.deployed_q
    if deployed_q is None:
        return False, None
    return score <= deployed_q, deployed_q


def observe(state: ControllerState, score: float, verifier_pass: bool, config: ControllerConfig) -> ControllerState:
    cutoffs = state.grid.thresholds
    start = bisect_left(cutoffs, score)
    if start >= len(cutoffs):
        return ControllerState(state.grid, state.states, state.deployed, state.delta_q, state.epoch)

    # every gate q >= score is open this round
    x = increment(True, verifier_pass, config.alpha)
    states = list(state.states)
    newly = []
    for k in range(start, len(states)):
        updated = eprocess_update(states[k], config.bet(states[k]), x)
        if not updated.certified and certify_check(updated, state.delta_q):
            updated.certified = True
            newly.append(k)
        states[k] = updated

    deployed = state.deployed
    if newly:
        top = newly[-1]
        deployed = top if deployed is None else max(deployed, top)
    return ControllerState(state.grid, tuple(states), deployed, state.delta_q, state.epoch, tuple(newly))


def warm_start(state: ControllerState, pairs: Iterable[Tuple[float, bool]], config: ControllerConfig) -> ControllerState:
    """Seed the e-processes with pre-deployment (score, verifier) pairs"""
    count = 0
    for score, verifier_pass in pairs:
        state = observe(state, score, verifier_pass, config)
        count += 1
    logger.info(
        f"Warm start consumed {count} calibration rounds; "
        f"{len(state.certified_indices())} thresholds certified, deployed={state.deployed_q}"
    )
    return ControllerState(state.grid, state.states, state.deployed, state.delta_q, state.epoch)


def run_stream(
    config: ControllerConfig,
    stream: Iterable,
    seed: Optional[int] = None,
    delta_q: Optional[float] = None,
    warm_start_pairs: Optional[Sequence[Tuple[float, bool]]] = None,
) -> RunResult:
    state = initial_state(config, delta_q)
    certifications: List[CertificationEvent] = []

    if warm_start_pairs:
        state = warm_start(state, warm_start_pairs, config)
        for k in state.certified_indices():
            certifications.append(CertificationEvent(0, k, config.grid[k], state.epoch))

    trace: List[RoundRecord] = []
    for rnd in stream:
        acted, deployed_q = decide(state, rnd.score)
        trace.append(RoundRecord(rnd.t, rnd.score, deployed_q, acted, rnd.verifier_pass))
        state = observe(state, rnd.score, rnd.verifier_pass, config)
        for k in state.newly_certified:
            certifications.append(CertificationEvent(rnd.t, k, config.grid[k], state.epoch))

    logger.debug(f"Run finished after {len(trace)} rounds with {len(certifications)} certifications")
    return RunResult(
        trace=trace,
        final=state,
        certifications=certifications,
        verifier_calls=len(trace),
        seed=seed,
    )


def replay_trace(config: ControllerConfig, trace: Iterable[RoundRecord], delta_q: Optional[float] = None) -> ControllerState:
    """Rebuild the final state from a recorded dense trace"""
    state = initial_state(config, delta_q)
    for record in trace:
        state = observe(state, record.score, record.verifier_pass, config)
    return state
