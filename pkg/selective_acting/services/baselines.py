"""
Comparison policies sharing the controller's round protocol.

Each policy answers decide(score) and then receives observe(score, verifier_pass)
for every round. One representative per validity class: ACI (long-run
average), an offline Clopper-Pearson threshold (fixed horizon) and three
heuristics without guarantees.
"""

import logging
from bisect import bisect_left
from collections import deque
from typing import Deque, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import beta

from selective_acting.services.controller import RoundRecord, RunResult

logger = logging.getLogger(__name__)


def always_act(score: float) -> bool:
    return True


def fixed_threshold(q0: float, score: float) -> bool:
    return score <= q0


def aci_step(alpha_t: float, gamma: float, err_t: float, alpha: float) -> float:
    """One ACI update alpha_{t+1} = alpha_t + gamma (alpha - err_t)"""
    return alpha_t + gamma * (alpha - err_t)


def clopper_pearson_upper(failures: int, n: int, delta: float) -> float:
    """One-sided (1 - delta) upper confidence bound on a binomial rate"""
    if n == 0:
        return 1.0
    if failures >= n:
        return 1.0
    return float(beta.ppf(1.0 - delta, failures + 1, n - failures))


def offline_calibrated(
    cal_pairs: Sequence[Tuple[float, bool]],
    delta: float,
    grid: Sequence[float],
    alpha: float,
) -> Optional[float]:
    """Largest cutoff whose Clopper-Pearson upper bound on the failure rate is <= alpha.

    Returns None (refuse) when no cutoff qualifies.
    """
    scores = np.array([s for s, _ in cal_pairs], dtype=float)
    fails = np.array([not v for _, v in cal_pairs], dtype=bool)
    chosen = None
    for q in grid:
        released = scores <= q
        n = int(released.sum())
        if n == 0:
            continue
        k = int((fails & released).sum())
        if clopper_pearson_upper(k, n, delta) <= alpha:
            chosen = q
    return chosen


class BaselinePolicy:
    """Round interface shared by all baselines"""

    name = "baseline"

    def decide(self, score: float) -> bool:
        raise NotImplementedError

    def observe(self, score: float, verifier_pass: bool, acted: bool) -> None:
        pass

    @property
    def threshold(self) -> Optional[float]:
        return None


class AlwaysAct(BaselinePolicy):
    name = "always_act"

    def decide(self, score: float) -> bool:
        return always_act(score)

    @property
    def threshold(self) -> Optional[float]:
        return 1.0


class FixedThreshold(BaselinePolicy):
    name = "fixed_threshold"

    def __init__(self, q0: float):
        self.q0 = q0

    def decide(self, score: float) -> bool:
        return fixed_threshold(self.q0, score)

    @property
    def threshold(self) -> Optional[float]:
        return self.q0


class NaiveTuning(BaselinePolicy):
    """Largest grid cutoff whose empirical failure rate over recent releases is <= alpha"""

    name = "naive_tuning"

    def __init__(self, grid: Sequence[float], alpha: float, window: Optional[int] = None):
        self.grid = list(grid)
        self.alpha = alpha
        self.window = window
        self._history: Deque[Tuple[int, bool]] = deque()
        self._released = [0] * len(self.grid)
        self._failed = [0] * len(self.grid)
        self._cutoff = self.grid[-1]

    def naive_threshold(self) -> float:
        best = self.grid[0]
        for k, q in enumerate(self.grid):
            n = self._released[k]
            rate = self._failed[k] / n if n else 0.0
            if rate <= self.alpha:
                best = q
        return best

    def decide(self, score: float) -> bool:
        return score <= self._cutoff

    def observe(self, score: float, verifier_pass: bool, acted: bool) -> None:
        if not acted:
            return
        start = bisect_left(self.grid, score)
        self._apply(start, not verifier_pass, +1)
        self._history.append((start, not verifier_pass))
        if self.window is not None and len(self._history) > self.window:
            old_start, old_failed = self._history.popleft()
            self._apply(old_start, old_failed, -1)
        self._cutoff = self.naive_threshold()

    def _apply(self, start: int, failed: bool, sign: int) -> None:
        for k in range(start, len(self.grid)):
            self._released[k] += sign
            if failed:
                self._failed[k] += sign

    @property
    def threshold(self) -> Optional[float]:
        return self._cutoff


def naive_tuning(window: Optional[int], alpha: float, history: Iterable[Tuple[float, bool]], grid: Sequence[float]) -> float:
    """Threshold Naive-Tuning would deploy after the released (score, verifier_pass) history"""
    policy = NaiveTuning(grid, alpha, window)
    for score, verifier_pass in history:
        policy.observe(score, verifier_pass, True)
    return policy.threshold


class ACI(BaselinePolicy):
    """Adaptive conformal inference on the marginal released-failure indicator.

    The abstention region is the upper (1 - alpha_t) mass of the recent score
    window, so a round is released iff its score is at or below the
    alpha_t-quantile of that window.
    """

    name = "aci"

    def __init__(self, alpha: float, gamma: float = 0.005, window: int = 500):
        self.alpha = alpha
        self.gamma = gamma
        self.alpha_t = alpha
        self._scores: Deque[float] = deque(maxlen=window)

    def cutoff(self) -> float:
        if self.alpha_t >= 1.0:
            return float("inf")
        if self.alpha_t <= 0.0:
            return float("-inf")
        if not self._scores:
            return self.alpha_t
        return float(np.quantile(np.fromiter(self._scores, dtype=float), self.alpha_t, method="inverted_cdf"))

    def decide(self, score: float) -> bool:
        return score <= self.cutoff()

    def observe(self, score: float, verifier_pass: bool, acted: bool) -> None:
        err = 1.0 if (acted and not verifier_pass) else 0.0
        self.alpha_t = aci_step(self.alpha_t, self.gamma, err, self.alpha)
        self._scores.append(score)

    @property
    def threshold(self) -> Optional[float]:
        return self.cutoff()


class OfflineCalibrated(BaselinePolicy):
    """Constant cutoff fitted once on a held-out calibration set"""

    name = "offline_calibrated"

    def __init__(self, cal_pairs: Sequence[Tuple[float, bool]], delta: float, grid: Sequence[float], alpha: float):
        self.cutoff_value = offline_calibrated(cal_pairs, delta, grid, alpha)
        if self.cutoff_value is None:
            logger.warning(f"Offline calibration refused: no cutoff certified on {len(cal_pairs)} calibration items")

    @property
    def refused(self) -> bool:
        return self.cutoff_value is None

    def decide(self, score: float) -> bool:
        return self.cutoff_value is not None and score <= self.cutoff_value

    @property
    def threshold(self) -> Optional[float]:
        return self.cutoff_value


def run_baseline(policy: BaselinePolicy, stream: Iterable, seed: Optional[int] = None) -> RunResult:
    trace: List[RoundRecord] = []
    for rnd in stream:
        threshold = policy.threshold
        acted = policy.decide(rnd.score)
        deployed_q = None if threshold is None or not np.isfinite(threshold) else float(threshold)
        trace.append(RoundRecord(rnd.t, rnd.score, deployed_q, acted, rnd.verifier_pass))
        policy.observe(rnd.score, rnd.verifier_pass, acted)
    return RunResult(trace=trace, final=None, verifier_calls=len(trace), seed=seed)
