"""
Per-replication and aggregate metrics over round traces.

A trace is any sequence of records with `score`, `acted` and `verifier_pass`
attributes (RoundRecord). Selective risk counts verifier failures among
released rounds only.
"""

import logging
import math
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from selective_acting.exceptions import EmptyAggregateError
from selective_acting.models.schemas import FRAMEWORK_CELLS, AggregateRow, LabelValue, Method, RunSummary
from selective_acting.services.controller import CertificationEvent, RunResult
from selective_acting.services.streams import ThresholdOracle

logger = logging.getLogger(__name__)

CI_Z = 1.96


def _released_failures(trace: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    acted = np.fromiter((r.acted for r in trace), dtype=bool, count=len(trace))
    failed = np.fromiter((r.acted and not r.verifier_pass for r in trace), dtype=bool, count=len(trace))
    return acted, failed


def selective_risk(trace: Sequence) -> Tuple[float, int]:
    """(R, N): failure rate among released rounds and the release count"""
    n = 0
    failures = 0
    for record in trace:
        if record.acted:
            n += 1
            if not record.verifier_pass:
                failures += 1
    return (failures / n if n else 0.0), n


def running_risk(trace: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Running selective risk R_t and release count N_t after every round"""
    acted, failed = _released_failures(trace)
    n_t = np.cumsum(acted)
    f_t = np.cumsum(failed)
    r_t = np.divide(f_t, n_t, out=np.zeros(len(trace), dtype=float), where=n_t > 0)
    return r_t, n_t


def action_rate(trace: Sequence) -> float:
    if not trace:
        return 0.0
    return sum(1 for r in trace if r.acted) / len(trace)


def trajectory(trace: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    """Per-round running risk and running action rate, plot-ready"""
    r_t, n_t = running_risk(trace)
    ar_t = n_t / np.arange(1, len(trace) + 1) if len(trace) else np.zeros(0)
    return r_t, ar_t


def slack_bound(alpha: float, delta: float, n: np.ndarray) -> np.ndarray:
    return alpha + np.sqrt(math.log(1.0 / delta) / np.maximum(n, 1))


def pathwise_violation(trace: Sequence, alpha: float, burn_in: int, mode: str = "strict", delta: float = 0.05) -> bool:
    """Does the post-burn-in running risk cross alpha (strict) or the slack bound?"""
    if mode not in ("strict", "slack"):
        raise ValueError(f"unknown violation mode {mode!r}")
    r_t, n_t = running_risk(trace)
    after = n_t >= max(burn_in, 1)
    if not after.any():
        return False
    if mode == "strict":
        bound = alpha
    else:
        bound = slack_bound(alpha, delta, n_t)[after]
    return bool(np.any(r_t[after] > bound))


def max_running_risk(trace: Sequence, burn_in: int) -> Optional[float]:
    """Maximum running risk once N_t >= burn_in; None if burn-in is never reached"""
    r_t, n_t = running_risk(trace)
    after = n_t >= max(burn_in, 1)
    if not after.any():
        return None
    return float(r_t[after].max())


def false_cert_rate(certifications: Iterable[CertificationEvent], oracle: Optional[ThresholdOracle]) -> int:
    """Number of certifications of cutoffs that were unsafe at certification time"""
    if oracle is None:
        return 0
    return sum(1 for event in certifications if not oracle.is_safe(event.cutoff, max(event.t, 1)))


def oracle_frontier_path(oracle: ThresholdOracle, grid: Sequence[float], ts: Iterable[int]) -> List[Optional[float]]:
    """q_t* for every round index, cached by the round's verifier cutoff"""
    cache: Dict[float, Optional[float]] = {}
    path = []
    for t in ts:
        tau = oracle.tau_at(t)
        if tau not in cache:
            cache[tau] = oracle.grid_frontier(grid, t)
        path.append(cache[tau])
    return path


def utility_gap(trace: Sequence, oracle: Optional[ThresholdOracle], grid: Sequence[float]) -> Optional[int]:
    """Gap_T = releases under the oracle cutoff minus releases actually made"""
    if oracle is None:
        return None
    frontier = oracle_frontier_path(oracle, grid, (r.t for r in trace))
    oracle_releases = sum(1 for r, q in zip(trace, frontier) if q is not None and r.score <= q)
    return oracle_releases - sum(1 for r in trace if r.acted)


def oracle_action_rate(trace: Sequence, oracle: Optional[ThresholdOracle], grid: Sequence[float]) -> Optional[float]:
    if oracle is None or not trace:
        return None
    frontier = oracle_frontier_path(oracle, grid, (r.t for r in trace))
    return sum(1 for r, q in zip(trace, frontier) if q is not None and r.score <= q) / len(trace)


def frontier_drops(oracle: Optional[ThresholdOracle], grid: Sequence[float], T: int) -> Optional[int]:
    """Rounds whose oracle grid frontier lies below the previous round's"""
    if oracle is None:
        return None
    path = [(-math.inf if q is None else q) for q in oracle_frontier_path(oracle, grid, range(1, T + 1))]
    return sum(1 for prev, cur in zip(path, path[1:]) if cur < prev)


def first_cert_rounds(certifications: Iterable[CertificationEvent], m: int) -> List[Optional[int]]:
    first: List[Optional[int]] = [None] * m
    for event in certifications:
        if first[event.index] is None:
            first[event.index] = event.t
    return first


def delay_rate_slope(margins: Sequence[float], delays: Sequence[float]) -> float:
    """Least-squares slope of log(delay) on log(margin)"""
    eta = np.asarray(margins, dtype=float)
    d = np.asarray(delays, dtype=float)
    keep = (eta > 0) & (d > 0) & np.isfinite(eta) & np.isfinite(d)
    if keep.sum() < 2:
        raise ValueError("need at least two positive (margin, delay) points for a slope")
    slope, _ = np.polyfit(np.log(eta[keep]), np.log(d[keep]), 1)
    return float(slope)


def summarize(
    result: RunResult,
    alpha: float,
    delta: float,
    burn_in: int,
    grid: Sequence[float],
    oracle: Optional[ThresholdOracle] = None,
    rep: int = 0,
    seed: int = 0,
    refused: bool = False,
) -> RunSummary:
    trace = result.trace
    risk, n = selective_risk(trace)
    first = first_cert_rounds(result.certifications, len(grid))
    certified = [t for t in first if t is not None]

    if result.final is not None:
        final_threshold = result.final.deployed_q
        certified_count = len(result.final.certified_indices())
    else:
        final_threshold = trace[-1].deployed_q if trace else None
        certified_count = 0

    return RunSummary(
        rep=rep,
        seed=seed,
        T=len(trace),
        final_risk=risk,
        N_T=n,
        AR=action_rate(trace),
        PathV_strict=pathwise_violation(trace, alpha, burn_in, "strict"),
        PathV_slack=pathwise_violation(trace, alpha, burn_in, "slack", delta),
        MaxR=max_running_risk(trace, burn_in),
        FCR_events=false_cert_rate(result.certifications, oracle),
        Gap_T=utility_gap(trace, oracle, grid),
        oracle_AR=oracle_action_rate(trace, oracle, grid),
        frontier_drops=frontier_drops(oracle, grid, len(trace)),
        certified_count=certified_count,
        mean_delay=float(np.mean(certified)) if certified else None,
        first_cert_round=first,
        verifier_calls=result.verifier_calls,
        refused=refused,
        final_threshold=final_threshold,
    )


def _ci(values: np.ndarray) -> float:
    if len(values) < 2:
        return 0.0
    return float(CI_Z * values.std(ddof=1) / math.sqrt(len(values)))


def _mean_present(values: Iterable[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None and not math.isnan(v)]
    return float(np.mean(present)) if present else None


def aggregate(
    summaries: Sequence[RunSummary],
    label: Optional[Dict[str, LabelValue]] = None,
    method: Method = Method.CSA,
) -> AggregateRow:
    """Means, maxima, violation counts and CI half-widths across replications"""
    if not summaries:
        raise EmptyAggregateError("cannot aggregate an empty list of run summaries")
    method = Method(method)
    n = len(summaries)
    risks = np.array([s.final_risk for s in summaries])
    ars = np.array([s.AR for s in summaries])
    maxr = [s.MaxR for s in summaries if s.MaxR is not None]

    m = max(len(s.first_cert_round) for s in summaries)
    cert_rate = []
    delay_by_threshold: List[Optional[float]] = []
    for k in range(m):
        rounds = [s.first_cert_round[k] for s in summaries if k < len(s.first_cert_round)]
        hits = [t for t in rounds if t is not None]
        cert_rate.append(len(hits) / n)
        delay_by_threshold.append(float(np.mean(hits)) if hits else None)

    first_any = [min(t for t in s.first_cert_round if t is not None) for s in summaries
                 if any(t is not None for t in s.first_cert_round)]
    strict = sum(1 for s in summaries if s.PathV_strict)
    if strict:
        logger.info(f"{method.value} {dict(label or {})}: {strict}/{n} replications crossed alpha after burn-in")

    return AggregateRow(
        label=dict(label or {}),
        method=method.value,
        framework=FRAMEWORK_CELLS[method],
        n_reps=n,
        risk_mean=float(risks.mean()),
        risk_max=float(risks.max()),
        risk_ci=_ci(risks),
        ar_mean=float(ars.mean()),
        ar_ci=_ci(ars),
        maxr_mean=float(np.mean(maxr)) if maxr else None,
        maxr_max=float(np.max(maxr)) if maxr else None,
        pathv_strict_count=strict,
        pathv_slack_count=sum(1 for s in summaries if s.PathV_slack),
        pathv_strict_rate=strict / n,
        fcr_events_total=sum(s.FCR_events for s in summaries),
        fcr_rate=sum(1 for s in summaries if s.FCR_events > 0) / n,
        gap_mean=_mean_present(s.Gap_T for s in summaries),
        oracle_ar_mean=_mean_present(s.oracle_AR for s in summaries),
        frontier_drops_mean=_mean_present(s.frontier_drops for s in summaries),
        certified_mean=float(np.mean([s.certified_count for s in summaries])),
        delay_mean=_mean_present(s.mean_delay for s in summaries),
        first_cert_mean=float(np.mean(first_any)) if first_any else None,
        verifier_calls_mean=float(np.mean([s.verifier_calls for s in summaries])),
        refused_count=sum(1 for s in summaries if s.refused),
        cert_rate_by_threshold=cert_rate,
        delay_by_threshold=delay_by_threshold,
    )
