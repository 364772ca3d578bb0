"""
Multi-epoch controller: deterministic restarts with per-epoch budgets
delta_{j,q} = 6 delta / (pi^2 m j^2). All e-process state is discarded at each
boundary, so no certification outlives its epoch.
"""

import logging
import math
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from selective_acting.services.controller import (
    CertificationEvent,
    ControllerConfig,
    ControllerState,
    EpochSummary,
    RoundRecord,
    RunResult,
    decide,
    initial_state,
    observe,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpochSchedule:
    """Restart schedule tau_1 = 1 < tau_2 < ... over 1-based round positions"""

    boundaries: Optional[Sequence[int]] = None
    fixed_length: Optional[int] = None

    def __post_init__(self):
        if (self.boundaries is None) == (self.fixed_length is None):
            raise ValueError("give exactly one of boundaries or fixed_length")
        if self.fixed_length is not None and self.fixed_length < 1:
            raise ValueError("fixed_length must be positive")
        if self.boundaries is not None:
            bounds = tuple(int(b) for b in self.boundaries)
            if not bounds or bounds[0] != 1:
                raise ValueError("the first epoch must start at round 1")
            if any(b >= c for b, c in zip(bounds, bounds[1:])):
                raise ValueError("epoch boundaries must be strictly increasing")
            object.__setattr__(self, "boundaries", bounds)

    @classmethod
    def single(cls) -> "EpochSchedule":
        return cls(boundaries=(1,))

    def is_boundary(self, position: int) -> bool:
        """True when a new epoch starts at this position (position 1 is the first epoch)"""
        if position <= 1:
            return False
        if self.fixed_length is not None:
            return (position - 1) % self.fixed_length == 0
        return position in self.boundaries

    def epoch_of(self, position: int) -> int:
        if self.fixed_length is not None:
            return (position - 1) // self.fixed_length + 1
        return sum(1 for b in self.boundaries if b <= position)


def epoch_budget(j: int, m: int, delta: float) -> float:
    if j < 1 or m < 1:
        raise ValueError("epoch index and grid size must be at least 1")
    return 6.0 * delta / (math.pi ** 2 * m * j ** 2)


def cumulative_epoch_budget(epochs: int, m: int, delta: float) -> float:
    """Total budget spent by the first `epochs` epochs over the whole grid"""
    return sum(m * epoch_budget(j, m, delta) for j in range(1, epochs + 1))


def reset_epoch(state: ControllerState, config: ControllerConfig) -> ControllerState:
    j = state.epoch + 1
    return initial_state(config, delta_q=epoch_budget(j, config.m, config.delta), epoch=j)


def _close_epoch(state: ControllerState, start: int, end: int, config: ControllerConfig) -> EpochSummary:
    return EpochSummary(
        epoch=state.epoch,
        start=start,
        end=end,
        certified_count=len(state.certified_indices()),
        deployed_q=state.deployed_q,
        budget_spent=cumulative_epoch_budget(state.epoch, config.m, config.delta),
    )


def run_stream_epoch(
    config: ControllerConfig,
    schedule: EpochSchedule,
    stream: Iterable,
    seed: Optional[int] = None,
) -> RunResult:
    state = initial_state(config, delta_q=epoch_budget(1, config.m, config.delta), epoch=1)
    trace: List[RoundRecord] = []
    certifications: List[CertificationEvent] = []
    epochs: List[EpochSummary] = []
    epoch_start = 1

    for position, rnd in enumerate(stream, start=1):
        if schedule.is_boundary(position):
            epochs.append(_close_epoch(state, epoch_start, position - 1, config))
            logger.debug(
                f"Epoch {state.epoch} closed at round {position - 1} with "
                f"{epochs[-1].certified_count} certified thresholds, error budget spent so far {epochs[-1].budget_spent:.4g}"
            )
            state = reset_epoch(state, config)
            epoch_start = position

        acted, deployed_q = decide(state, rnd.score)
        trace.append(RoundRecord(rnd.t, rnd.score, deployed_q, acted, rnd.verifier_pass))
        state = observe(state, rnd.score, rnd.verifier_pass, config)
        for k in state.newly_certified:
            certifications.append(CertificationEvent(rnd.t, k, config.grid[k], state.epoch))

    if trace:
        epochs.append(_close_epoch(state, epoch_start, len(trace), config))

    return RunResult(
        trace=trace,
        final=state,
        certifications=certifications,
        verifier_calls=len(trace),
        epochs=epochs,
        seed=seed,
    )
