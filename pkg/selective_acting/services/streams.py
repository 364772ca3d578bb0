"""
Stream generation, stress transforms and replay files.

A stream is a finite, materialized sequence of rounds (t, score, verifier
outcome). Synthetic streams carry an analytic oracle giving the conditional
failure rate r(q), the safe set and the frontier; transforms that keep the
oracle closed-form (score bias, verifier flips) update it, orderings drop it.
"""

import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, StrictBool, StrictInt, ValidationError, field_validator

from selective_acting.exceptions import ReplayParseError, ReplayValidationError
from selective_acting.models.schemas import OrderingName
from selective_acting.services.seeding import SeedLike, make_generator

logger = logging.getLogger(__name__)

BIAS_CLIP = (0.01, 0.99)
SAFE_TOLERANCE = 1e-12
OUTRUN_WINDOW = 100


class Round(NamedTuple):
    t: int
    score: float
    verifier_pass: bool
    features: Optional[Any] = None


@dataclass(frozen=True)
class StationarySpec:
    tau: float = 0.5
    alpha: float = 0.30
    T: int = 3000


@dataclass(frozen=True)
class ThresholdOracle:
    """Closed-form failure rates for uniform scores with a cutoff verifier"""

    alpha: float
    tau: float
    tau0: Optional[float] = None
    ramp_rounds: int = 0
    bias: float = 0.0
    flip: float = 0.0

    def tau_at(self, t: int = 1) -> float:
        if self.tau0 is None or self.ramp_rounds <= 0:
            return self.tau
        progress = min(1.0, max(0, t - 1) / self.ramp_rounds)
        return self.tau0 + (self.tau - self.tau0) * progress

    def open_probability(self, q: float) -> float:
        """P(observed score <= q)"""
        if self.bias == 0.0:
            return min(max(q, 0.0), 1.0)
        lo, hi = BIAS_CLIP
        if q < lo:
            return 0.0
        if q >= hi:
            return 1.0
        return min(max(q - self.bias, 0.0), 1.0)

    def failure_rate(self, q: float, t: int = 1) -> float:
        """Observed verifier failure rate among rounds with score <= q"""
        u = self.open_probability(q)
        tau = self.tau_at(t)
        base = max(0.0, u - tau) / u if u > 0.0 else 0.0
        return self.flip + (1.0 - 2.0 * self.flip) * base

    def excess_mean(self, q: float, t: int = 1) -> float:
        """E[X(q)] = P(open) (r(q) - alpha)"""
        u = self.open_probability(q)
        return u * (self.failure_rate(q, t) - self.alpha)

    def is_safe(self, q: float, t: int = 1) -> bool:
        if self.open_probability(q) == 0.0:
            return True
        return self.failure_rate(q, t) <= self.alpha + SAFE_TOLERANCE

    def margin(self, q: float, t: int = 1) -> float:
        return max(0.0, -self.excess_mean(q, t))

    def frontier(self, t: int = 1) -> float:
        """Largest safe cutoff on the continuous score scale (0 when none opens safely)"""
        if self.flip >= 0.5:
            return 0.0
        alpha_base = (self.alpha - self.flip) / (1.0 - 2.0 * self.flip)
        if alpha_base < 0.0:
            return 0.0
        u_star = self.tau_at(t) / (1.0 - alpha_base) if alpha_base < 1.0 else 1.0
        if u_star >= 1.0:
            return 1.0
        if self.bias == 0.0:
            return u_star
        return min(u_star + self.bias, BIAS_CLIP[1])

    def grid_frontier(self, grid: Sequence[float], t: int = 1) -> Optional[float]:
        """Oracle deployment q_t*: the largest safe grid cutoff"""
        best = None
        for q in grid:
            if self.is_safe(q, t):
                best = q
        return best

    def with_bias(self, b: float) -> "ThresholdOracle":
        # clip(clip(s + b1) + b2) is not clip(s + b1 + b2)
        if self.bias != 0.0 and b != 0.0:
            raise ValueError("the oracle does not model stacked bias transforms")
        return replace(self, bias=self.bias + b)

    def with_flip(self, p: float) -> "ThresholdOracle":
        return replace(self, flip=self.flip + p - 2.0 * self.flip * p)


@dataclass
class Stream:
    rounds: List[Round]
    oracle: Optional[ThresholdOracle] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    calibration: List[Round] = field(default_factory=list)

    def __iter__(self) -> Iterator[Round]:
        return iter(self.rounds)

    def __len__(self) -> int:
        return len(self.rounds)

    def scores(self) -> np.ndarray:
        return np.array([r.score for r in self.rounds], dtype=float)

    def calibration_pairs(self) -> List[Tuple[float, bool]]:
        return [(r.score, r.verifier_pass) for r in self.calibration]


def _rounds(scores: np.ndarray, passes: np.ndarray) -> List[Round]:
    return [Round(t, s, v) for t, (s, v) in enumerate(zip(scores.tolist(), passes.tolist()), start=1)]


def gen_stationary(spec: StationarySpec, seed: SeedLike) -> Stream:
    rng = make_generator(seed)
    scores = rng.random(spec.T)
    return Stream(
        rounds=_rounds(scores, scores < spec.tau),
        oracle=ThresholdOracle(alpha=spec.alpha, tau=spec.tau),
        metadata={"generator": "stationary", "tau": spec.tau, "T": spec.T},
    )


def gen_monotone(
    tau0: float,
    tau_max: float,
    ramp_rounds: int,
    T: int,
    seed: SeedLike,
    alpha: float = 0.30,
) -> Stream:
    """tau_t ramps linearly from tau0 to tau_max over ramp_rounds, then stays"""
    oracle = ThresholdOracle(alpha=alpha, tau=tau_max, tau0=tau0, ramp_rounds=ramp_rounds)
    rng = make_generator(seed)
    scores = rng.random(T)
    taus = np.array([oracle.tau_at(t) for t in range(1, T + 1)])
    return Stream(
        rounds=_rounds(scores, scores < taus),
        oracle=oracle,
        metadata={"generator": "monotone", "tau0": tau0, "tau_max": tau_max, "ramp_rounds": ramp_rounds, "T": T},
    )


def apply_bias(stream: Stream, b: float) -> Stream:
    if b == 0.0:
        return replace(stream, rounds=list(stream.rounds))
    lo, hi = BIAS_CLIP
    rounds = [r._replace(score=min(max(r.score + b, lo), hi)) for r in stream.rounds]
    calibration = [r._replace(score=min(max(r.score + b, lo), hi)) for r in stream.calibration]
    oracle = stream.oracle
    if oracle is not None and oracle.bias != 0.0:
        logger.warning(f"Second bias transform ({b:+g} after {oracle.bias:+g}) drops the analytic oracle")
        oracle = None
    elif oracle is not None:
        oracle = oracle.with_bias(b)
    return Stream(
        rounds=rounds,
        oracle=oracle,
        metadata={**stream.metadata, "bias": b},
        calibration=calibration,
    )


def apply_flip(stream: Stream, p: float, seed: SeedLike) -> Stream:
    if not 0.0 <= p <= 0.5:
        raise ValueError(f"flip probability must lie in [0, 0.5], got {p}")
    if p == 0.0:
        return replace(stream, rounds=list(stream.rounds))
    rng = make_generator(seed)
    flips = rng.random(len(stream.rounds)) < p
    rounds = [r._replace(verifier_pass=r.verifier_pass != bool(f)) for r, f in zip(stream.rounds, flips)]
    return Stream(
        rounds=rounds,
        oracle=stream.oracle.with_flip(p) if stream.oracle else None,
        metadata={**stream.metadata, "flip": p},
        calibration=list(stream.calibration),
    )


def _order(records: List[Round], name: OrderingName, rng: np.random.Generator) -> List[Round]:
    n = len(records)
    if n == 0:
        return []
    scores = np.array([r.score for r in records], dtype=float)
    by_score = np.argsort(scores, kind="stable")

    if name == OrderingName.IID:
        order = rng.permutation(n)
    elif name == OrderingName.EASY_HARD:
        order = by_score
    elif name == OrderingName.QUARTILE_REV:
        quartiles = np.array_split(by_score, 4)
        order = np.concatenate([rng.permutation(chunk) for chunk in reversed(quartiles)])
    elif name == OrderingName.WINDOW_OUTRUN:
        low = rng.permutation(by_score[: n // 2])
        high = rng.permutation(by_score[n // 2:])
        pieces = []
        for start in range(0, max(len(low), len(high)), OUTRUN_WINDOW):
            pieces.append(low[start:start + OUTRUN_WINDOW])
            pieces.append(high[start:start + OUTRUN_WINDOW])
        order = np.concatenate(pieces)
    else:
        raise ValueError(f"unknown ordering {name}")
    return [records[i] for i in order.tolist()]


def apply_ordering(
    records: Union[Stream, Sequence[Round]],
    name: Union[str, OrderingName],
    seed: SeedLike,
    passes: int = 1,
) -> Stream:
    """Reorder a finite round set, optionally as several passes each in the named order"""
    name = OrderingName(name)
    base = list(records.rounds if isinstance(records, Stream) else records)
    calibration = list(records.calibration) if isinstance(records, Stream) else []
    rng = make_generator(seed)

    ordered: List[Round] = []
    for _ in range(passes):
        ordered.extend(_order(base, name, rng))
    rounds = [r._replace(t=t) for t, r in enumerate(ordered, start=1)]

    metadata = dict(records.metadata) if isinstance(records, Stream) else {}
    metadata.update({
        "ordering": name.value,
        "passes": passes,
        "ordering_construction": "fixed stand-in construction, see DESIGN.md",
    })
    return Stream(rounds=rounds, oracle=None, metadata=metadata, calibration=calibration)


def with_calibration(stream: Stream, spec: StationarySpec, n_cal: int, seed: SeedLike) -> Stream:
    """Attach an i.i.d. calibration split drawn from the same generator"""
    pool = gen_stationary(replace(spec, T=n_cal), seed)
    return replace(stream, calibration=pool.rounds)


class ReplayRecord(BaseModel):
    t: StrictInt
    score: float
    verifier_pass: StrictBool = Field(..., alias="pass")
    features: Optional[Any] = None

    @field_validator("score", mode="before")
    @classmethod
    def _numeric_score(cls, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValueError(f"score must be a number, got {value!r}")
        return value


def read_replay(path: Union[str, Path]) -> Stream:
    rounds: List[Round] = []
    previous_t = None
    with open(path, "r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = ReplayRecord.model_validate(json.loads(line))
            except (json.JSONDecodeError, ValidationError, TypeError) as e:
                raise ReplayParseError(line_number, f"malformed replay record: {e}") from e

            if not 0.0 <= record.score <= 1.0:
                raise ReplayValidationError(
                    f"line {line_number}: score {record.score} is outside [0, 1]",
                    {"line_number": line_number, "score": record.score},
                )
            if previous_t is not None and record.t <= previous_t:
                raise ReplayValidationError(
                    f"line {line_number}: round index {record.t} does not increase (previous {previous_t})",
                    {"line_number": line_number, "t": record.t},
                )
            previous_t = record.t
            rounds.append(Round(record.t, record.score, record.verifier_pass, record.features))

    logger.info(f"Read {len(rounds)} replay rounds from {path}")
    return Stream(rounds=rounds, metadata={"replay": str(path)})


def write_replay(trace: Iterable, path: Union[str, Path]) -> int:
    """Write rounds or round records as JSON lines {t, score, pass, features}"""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for record in trace:
            handle.write(json.dumps({
                "t": int(record.t),
                "score": float(record.score),
                "pass": bool(record.verifier_pass),
                "features": getattr(record, "features", None),
            }) + "\n")
            count += 1
    return count


def split_records(records: Sequence[Round], fraction: float, seed: SeedLike) -> Tuple[List[Round], List[Round]]:
    """Random (calibration, evaluation) split of a finite record set"""
    rng = make_generator(seed)
    order = rng.permutation(len(records))
    cut = int(round(fraction * len(records)))
    calibration = [records[i] for i in sorted(order[:cut].tolist())]
    evaluation = [records[i] for i in sorted(order[cut:].tolist())]
    return calibration, evaluation


def repeat_passes(records: Sequence[Round], passes: int, ordering: Union[str, OrderingName], seed: SeedLike) -> Stream:
    """Several passes over a finite record set, each pass in the named order"""
    if passes < 1:
        raise ValueError("passes must be at least 1")
    return apply_ordering(records, ordering, seed, passes=passes)
