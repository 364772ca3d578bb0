"""
Per-threshold e-process arithmetic.

Every threshold q on the grid carries a betting e-process on the excess-risk
increment X(q) = A(q)((1 - V) - alpha). Values are kept in natural-log space.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

from selective_acting.exceptions import ContractViolation


@dataclass(frozen=True)
class ThresholdGrid:
    """Sorted score cutoffs q(1) < ... < q(m), each in (0, 1)"""

    thresholds: Tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(q) for q in self.thresholds)
        if not values:
            raise ValueError("a threshold grid needs at least one cutoff")
        for q in values:
            if not 0.0 < q < 1.0:
                raise ValueError(f"grid cutoff {q} is outside the open unit interval")
        for lo, hi in zip(values, values[1:]):
            if not lo < hi:
                raise ValueError("grid cutoffs must be strictly increasing")
        object.__setattr__(self, "thresholds", values)

    @property
    def m(self) -> int:
        return len(self.thresholds)

    def __len__(self) -> int:
        return len(self.thresholds)

    def __getitem__(self, index: int) -> float:
        return self.thresholds[index]

    def __iter__(self):
        return iter(self.thresholds)

    @classmethod
    def uniform(cls, m: int) -> "ThresholdGrid":
        """Synthetic-experiment grid q(i) = i/(m+1)"""
        return cls(tuple(i / (m + 1) for i in range(1, m + 1)))

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "ThresholdGrid":
        return cls(tuple(values))


@dataclass(slots=True)
class ThresholdState:
    log_e: float = 0.0
    sum_x: float = 0.0
    n: int = 0
    certified: bool = False


def increment(acted: bool, verifier_pass: bool, alpha: float) -> float:
    """Excess-risk increment in {-alpha, 0, 1 - alpha}"""
    if not acted:
        return 0.0
    return -alpha if verifier_pass else 1.0 - alpha


def bet_cap(alpha: float) -> float:
    return 1.0 / (2.0 * (1.0 - alpha))


def adaptive_bet(sum_x: float, n: int, alpha: float) -> float:
    """Running-mean plug-in bet, clipped to [0, 1/(2(1 - alpha))]"""
    if n <= 0:
        return 0.0
    raw = -(sum_x / n) / ((1.0 - alpha) ** 2)
    if raw <= 0.0:
        return 0.0
    return min(raw, bet_cap(alpha))


def eprocess_update(state: ThresholdState, lam: float, x: float) -> ThresholdState:
    factor = 1.0 - lam * x
    if factor <= 0.0:
        raise ContractViolation(
            f"bet {lam} on increment {x} gives non-positive factor {factor}",
            {"lambda": lam, "x": x},
        )
    return ThresholdState(
        log_e=state.log_e + math.log(factor),
        sum_x=state.sum_x + x,
        n=state.n + 1,
        certified=state.certified,
    )


def certify_check(state: ThresholdState, delta_q: float) -> bool:
    return state.log_e >= math.log(1.0 / delta_q)


def fixed_bet_for_margin(eta: float, pi_min: float = 1.0) -> float:
    """Constant bet lambda* = pi_min * eta / 2 used by the power analysis"""
    return pi_min * eta / 2.0


def certification_delay_bound(delta_q: float, eta: float) -> float:
    """Upper bound 4(ln(1/delta_q) + 1)/eta^2 on the expected certification time"""
    if eta <= 0.0:
        return math.inf
    return 4.0 * (math.log(1.0 / delta_q) + 1.0) / (eta ** 2)
