"""
Isotonic score calibration and threshold-grid construction.

The raw score is mapped to a calibrated failure probability by a monotone
least-squares fit (pool adjacent violators). Predictions are left-constant
between knots so that gates at grid points keep exact monotone semantics.
"""

import json
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from sklearn.isotonic import IsotonicRegression

from selective_acting.exceptions import CalibrationError
from selective_acting.services.eprocess import ThresholdGrid
from selective_acting.services.seeding import SeedLike
from selective_acting.services.streams import Round, Stream, split_records

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IsotonicModel:
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        if len(self.breakpoints) != len(self.values):
            raise CalibrationError("breakpoints and values must have the same length")
        if any(b > c for b, c in zip(self.values, self.values[1:])):
            raise CalibrationError("calibrated values must be nondecreasing")

    def predict(self, score: float) -> float:
        k = int(np.searchsorted(self.breakpoints, score, side="right")) - 1
        return self.values[max(k, 0)]

    def predict_many(self, scores: Sequence[float]) -> np.ndarray:
        idx = np.searchsorted(np.asarray(self.breakpoints), np.asarray(scores, dtype=float), side="right") - 1
        return np.asarray(self.values)[np.clip(idx, 0, None)]

    def to_json(self) -> str:
        return json.dumps({"breakpoints": list(self.breakpoints), "values": list(self.values)})

    @classmethod
    def from_json(cls, text: str) -> "IsotonicModel":
        payload = json.loads(text)
        return cls(tuple(payload["breakpoints"]), tuple(payload["values"]))


def fit_isotonic(pairs: Sequence[Tuple[float, Union[bool, int, float]]]) -> IsotonicModel:
    """Monotone fit of the failure indicator on the raw score"""
    if len(pairs) == 0:
        raise CalibrationError("cannot fit a calibration model on an empty set")
    scores = np.array([float(s) for s, _ in pairs])
    failures = np.array([float(f) for _, f in pairs])
    if scores.min() < 0.0 or scores.max() > 1.0:
        raise CalibrationError("raw scores must lie in [0, 1]")

    knots = np.unique(scores)
    if len(knots) == 1:
        return IsotonicModel((float(knots[0]),), (float(failures.mean()),))

    regression = IsotonicRegression(increasing=True, y_min=0.0, y_max=1.0, out_of_bounds="clip")
    regression.fit(scores, failures)
    fitted = np.maximum.accumulate(regression.predict(knots))
    return IsotonicModel(tuple(knots.tolist()), tuple(float(v) for v in fitted))


def nearest_rank_quantile(values: Sequence[float], p: float) -> float:
    return float(np.quantile(np.asarray(values, dtype=float), p, method="inverted_cdf"))


def build_grid(calibrated_scores: Sequence[float], m: int, lo_q: float = 0.02, hi_q: float = 0.98) -> ThresholdGrid:
    """m geometrically spaced cutoffs between the lo_q and hi_q nearest-rank quantiles"""
    if m < 2:
        raise CalibrationError("a calibrated grid needs m >= 2")
    scores = np.asarray(calibrated_scores, dtype=float)
    if scores.size == 0:
        raise CalibrationError("cannot build a grid from no scores")

    lo = nearest_rank_quantile(scores, lo_q)
    hi = min(nearest_rank_quantile(scores, hi_q), math.nextafter(1.0, 0.0))
    if lo <= 0.0:
        positive = scores[scores > 0.0]
        if positive.size == 0:
            raise CalibrationError("no positive score to anchor a geometric grid")
        lo = float(positive.min())
        logger.info(f"Lower grid endpoint shifted to the smallest positive score {lo:.6g}")
    if not lo < hi:
        raise CalibrationError(
            f"degenerate grid endpoints [{lo}, {hi}]",
            {"lo": lo, "hi": hi},
        )

    grid = np.unique(np.geomspace(lo, hi, m))
    if len(grid) < m:
        grid = np.linspace(lo, hi, m)
    return ThresholdGrid.from_values(grid.tolist())


def split_calibration(records: Sequence[Round], fraction: float = 0.8, seed: SeedLike = None) -> Tuple[List[Round], List[Round]]:
    return split_records(records, fraction, seed)


def calibrate_records(model: IsotonicModel, records: Sequence[Round]) -> List[Round]:
    """Replace raw scores with calibrated failure probabilities"""
    calibrated = model.predict_many([r.score for r in records])
    return [r._replace(score=float(c)) for r, c in zip(records, calibrated)]


def save_model(model: IsotonicModel, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        handle.write(model.to_json() + "\n")


def load_model(path: Union[str, Path]) -> IsotonicModel:
    with open(path, "r", encoding="utf-8") as handle:
        return IsotonicModel.from_json(handle.readline())


def failure_pairs(records: Sequence[Round]) -> List[Tuple[float, bool]]:
    return [(r.score, not r.verifier_pass) for r in records]


def calibrate_stream(stream: Stream, model: Optional[IsotonicModel] = None) -> Tuple[Stream, IsotonicModel]:
    """Map live and calibration scores through an isotonic model.

    Without a model, one is fitted on the stream's calibration split.
    """
    if model is None:
        if not stream.calibration:
            raise CalibrationError("calibrating a stream needs a calibration split")
        model = fit_isotonic(failure_pairs(stream.calibration))
        logger.debug(f"Fitted isotonic model with {len(model.breakpoints)} knots on {len(stream.calibration)} rounds")
    calibrated = replace(
        stream,
        rounds=calibrate_records(model, stream.rounds),
        calibration=calibrate_records(model, stream.calibration),
        metadata={**stream.metadata, "calibrated": True},
    )
    return calibrated, model
