"""
Sparse verifier: the verifier is queried on a Bernoulli(pi_t) subsample of
rounds and queried increments are importance weighted by 1/pi_t. Unqueried
rounds are still decided and recorded, they just leave every e-process alone.
"""

import logging
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, List, Optional, Tuple

from selective_acting.services.controller import (
    CertificationEvent,
    ControllerConfig,
    ControllerState,
    RoundRecord,
    RunResult,
    decide,
    initial_state,
)
from selective_acting.services.eprocess import (
    adaptive_bet,
    bet_cap,
    certify_check,
    eprocess_update,
    increment,
)
from selective_acting.services.seeding import SeedLike, make_generator

logger = logging.getLogger(__name__)

SPARSE_CAP_SLACK = 1e-6


@dataclass(frozen=True)
class SparsePolicy:
    """Query probability pi_t as a piecewise-constant function of the round position"""

    pi: float = 1.0
    pi_min: Optional[float] = None
    schedule: Optional[Tuple[Tuple[int, float], ...]] = None

    def __post_init__(self):
        values = [self.pi] + [p for _, p in (self.schedule or ())]
        floor = self.pi_min if self.pi_min is not None else min(values)
        if not 0.0 < floor <= 1.0:
            raise ValueError(f"pi_min must lie in (0, 1], got {floor}")
        for p in values:
            if not floor <= p <= 1.0:
                raise ValueError(f"query probability {p} is outside [pi_min={floor}, 1]")
        object.__setattr__(self, "pi_min", floor)
        if self.schedule:
            object.__setattr__(self, "schedule", tuple(sorted((int(s), float(p)) for s, p in self.schedule)))

    def pi_at(self, position: int) -> float:
        if not self.schedule:
            return self.pi
        starts = [s for s, _ in self.schedule]
        k = bisect_right(starts, position) - 1
        return self.pi if k < 0 else self.schedule[k][1]


def sparse_increment(coin: bool, pi_t: float, x: float) -> float:
    if not coin:
        return 0.0
    return x / pi_t


def max_weighted_increment(pi_min: float, alpha: float) -> float:
    return increment(True, False, alpha) / pi_min


def sparse_bet_clip(raw_lambda: float, pi_min: float, alpha: float) -> float:
    """Clip to [0, pi_min/(1 - alpha)), a relative 1e-6 inside the positivity cap.

    The cap is taken from the same float as the largest weighted increment, so
    1 - lambda * x stays at or above about 1e-6 on every queried failure.
    """
    cap = (1.0 / max_weighted_increment(pi_min, alpha)) / (1.0 + SPARSE_CAP_SLACK)
    if raw_lambda <= 0.0:
        return 0.0
    return min(raw_lambda, cap)


def sparse_adaptive_bet(sum_x: float, n: int, alpha: float, pi_min: float) -> float:
    # plug-in on the weighted increments, rescaled to their range (1-alpha)/pi_min;
    # at most half the positivity cap, like the dense bet
    raw = adaptive_bet(pi_min * pi_min * sum_x, n, alpha)
    return sparse_bet_clip(min(raw, pi_min * bet_cap(alpha)), pi_min, alpha)


def observe_sparse(
    state: ControllerState,
    score: float,
    verifier_pass: bool,
    coin: bool,
    pi_t: float,
    config: ControllerConfig,
    pi_min: float,
) -> ControllerState:
    if not coin:
        return ControllerState(state.grid, state.states, state.deployed, state.delta_q, state.epoch)

    cutoffs = state.grid.thresholds
    start = bisect_left(cutoffs, score)
    x = sparse_increment(True, pi_t, increment(True, verifier_pass, config.alpha))
    states = list(state.states)
    newly = []
    fixed = config.fixed_lambda(pi_min)
    for k in range(start, len(states)):
        current = states[k]
        if fixed is not None:
            lam = sparse_bet_clip(fixed, pi_min, config.alpha)
        else:
            lam = sparse_adaptive_bet(current.sum_x, current.n, config.alpha, pi_min)
        updated = eprocess_update(current, lam, x)
        if not updated.certified and certify_check(updated, state.delta_q):
            updated.certified = True
            newly.append(k)
        states[k] = updated

    deployed = state.deployed
    if newly:
        deployed = newly[-1] if deployed is None else max(deployed, newly[-1])
    return ControllerState(state.grid, tuple(states), deployed, state.delta_q, state.epoch, tuple(newly))


def run_stream_sparse(
    config: ControllerConfig,
    policy: SparsePolicy,
    stream: Iterable,
    seed: SeedLike = None,
) -> RunResult:
    """Run with Bernoulli-subsampled verification.

    The coin generator is independent of the stream's own randomness: pass a
    numpy SeedSequence (or an int) dedicated to the coins.
    """
    coins = make_generator(seed)
    state = initial_state(config)
    trace: List[RoundRecord] = []
    certifications: List[CertificationEvent] = []
    calls = 0

    for position, rnd in enumerate(stream, start=1):
        pi_t = policy.pi_at(position)
        acted, deployed_q = decide(state, rnd.score)
        coin = bool(coins.random() < pi_t)
        trace.append(RoundRecord(rnd.t, rnd.score, deployed_q, acted, rnd.verifier_pass, coin))
        if coin:
            calls += 1
        state = observe_sparse(state, rnd.score, rnd.verifier_pass, coin, pi_t, config, policy.pi_min)
        for k in state.newly_certified:
            certifications.append(CertificationEvent(rnd.t, k, config.grid[k], state.epoch))

    logger.debug(f"Sparse run used {calls} verifier calls over {len(trace)} rounds")
    return RunResult(
        trace=trace,
        final=state,
        certifications=certifications,
        verifier_calls=calls,
        seed=seed if isinstance(seed, int) else None,
    )

