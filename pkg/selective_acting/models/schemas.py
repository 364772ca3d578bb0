from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from pydantic import BaseModel, Field, model_validator

LabelValue = Union[int, float, str]


class BudgetScheme(str, Enum):
    """Bonferroni split of delta across the grid"""
    EQUAL_HALVED = "equal_halved"
    EQUAL = "equal"


class Method(str, Enum):
    CSA = "csa"
    CSA_EPOCH = "csa_epoch"
    CSA_SPARSE = "csa_sparse"
    ALWAYS_ACT = "always_act"
    FIXED_THRESHOLD = "fixed_threshold"
    NAIVE_TUNING = "naive_tuning"
    ACI = "aci"
    OFFLINE_CALIBRATED = "offline_calibrated"


# Validity class of each method's guarantee (anytime-pathwise, long-run-average,
# fixed-horizon, none)
FRAMEWORK_CELLS: Dict[Method, str] = {
    Method.CSA: "ap",
    Method.CSA_EPOCH: "ap",
    Method.CSA_SPARSE: "ap",
    Method.ACI: "lra",
    Method.OFFLINE_CALIBRATED: "fh",
    Method.ALWAYS_ACT: "none",
    Method.FIXED_THRESHOLD: "none",
    Method.NAIVE_TUNING: "none",
}


class GridMode(str, Enum):
    UNIFORM = "uniform"
    CALIBRATED = "calibrated"


class StreamKind(str, Enum):
    STATIONARY = "stationary"
    MONOTONE = "monotone"
    REPLAY = "replay"


class TransformKind(str, Enum):
    BIAS = "bias"
    FLIP = "flip"
    ORDERING = "ordering"


class OrderingName(str, Enum):
    IID = "iid"
    EASY_HARD = "easy_hard"
    QUARTILE_REV = "quartile_rev"
    WINDOW_OUTRUN = "window_outrun"


class StreamSpec(BaseModel):
    """Synthetic generator parameters or a replay-file reference"""
    kind: StreamKind = StreamKind.STATIONARY
    tau: float = Field(0.5, gt=0.0, lt=1.0, description="Verifier cutoff of the stationary generator")
    T: int = Field(3000, ge=0, description="Number of live rounds")
    tau0: float = Field(0.30, gt=0.0, lt=1.0)
    tau_max: float = Field(0.65, gt=0.0, lt=1.0)
    ramp_rounds: int = Field(0, ge=0)
    path: Optional[str] = Field(None, description="Replay file (JSON lines)")
    n_cal: int = Field(0, ge=0, description="Calibration rounds drawn ahead of the live stream")
    cal_fraction: float = Field(0.8, gt=0.0, lt=1.0, description="Calibration share of a replay file when split")
    calibrate: bool = Field(False, description="Map replay scores through an isotonic fit on the calibration split")
    model_path: Optional[str] = Field(None, description="Pre-fitted isotonic model used instead of fitting")

    class Config:
        json_schema_extra = {
            "example": {"kind": "stationary", "tau": 0.5, "T": 3000}
        }

    @model_validator(mode="after")
    def _check_kind(self):
        if self.kind == StreamKind.REPLAY and not self.path:
            raise ValueError("replay streams need a path")
        if (self.calibrate or self.model_path) and self.kind != StreamKind.REPLAY:
            raise ValueError("score calibration applies to replay streams only")
        return self


class TransformSpec(BaseModel):
    kind: TransformKind
    value: Optional[float] = Field(None, description="Bias b or flip probability p")
    ordering: Optional[OrderingName] = None
    passes: int = Field(1, ge=1)

    @model_validator(mode="after")
    def _check_parameters(self):
        if self.kind == TransformKind.BIAS and self.value is None:
            raise ValueError("bias transform needs a value")
        if self.kind == TransformKind.FLIP:
            if self.value is None or not 0.0 <= self.value <= 0.5:
                raise ValueError("flip probability must lie in [0, 0.5]")
        if self.kind == TransformKind.ORDERING and self.ordering is None:
            raise ValueError("ordering transform needs an ordering name")
        return self


class ControllerSpec(BaseModel):
    alpha: float = Field(0.30, gt=0.0, lt=1.0)
    delta: float = Field(0.05, gt=0.0, lt=1.0)
    m: int = Field(20, ge=1)
    grid: Optional[List[float]] = Field(None, description="Explicit cutoffs; default i/(m+1)")
    budget_scheme: BudgetScheme = BudgetScheme.EQUAL_HALVED
    burn_in: int = Field(500, ge=0)
    fixed_bet: Optional[float] = Field(None, ge=0.0)
    bet_margin: Optional[float] = Field(None, gt=0.0, lt=1.0, description="Target margin eta; fixed bet pi_min * eta / 2")
    grid_mode: GridMode = Field(GridMode.UNIFORM, description="calibrated: geometric grid on calibrated scores")
    warm_start: bool = False

    class Config:
        json_schema_extra = {
            "example": {"alpha": 0.3, "delta": 0.05, "m": 20, "burn_in": 500}
        }


class EpochSpec(BaseModel):
    fixed_length: Optional[int] = Field(1500, ge=1)
    boundaries: Optional[List[int]] = None


class SparseSpec(BaseModel):
    pi: float = Field(1.0, gt=0.0, le=1.0)
    pi_min: Optional[float] = Field(None, gt=0.0, le=1.0)
    schedule: Optional[List[Tuple[int, float]]] = Field(
        None, description="Piecewise-constant (start_round, pi) pairs overriding pi"
    )


class BaselineSpec(BaseModel):
    q0: float = Field(0.5, ge=0.0, le=1.0)
    window: Optional[int] = Field(None, ge=1, description="Naive-Tuning history length; None keeps all")
    gamma: float = Field(0.005, gt=0.0)
    aci_window: int = Field(500, ge=1)
    cal_delta: Optional[float] = Field(None, gt=0.0, lt=1.0)


class ConditionSpec(BaseModel):
    """One row of an experiment table"""
    label: Dict[str, LabelValue] = Field(default_factory=dict)
    method: Method = Method.CSA
    stream: StreamSpec = Field(default_factory=StreamSpec)
    transforms: List[TransformSpec] = Field(default_factory=list)
    controller: ControllerSpec = Field(default_factory=ControllerSpec)
    epoch: Optional[EpochSpec] = None
    sparse: Optional[SparseSpec] = None
    baseline: BaselineSpec = Field(default_factory=BaselineSpec)


class SeedSpec(BaseModel):
    base_seed: int = 42
    n_reps: int = Field(50, ge=1)
    seeds: Optional[List[int]] = None

    def count(self) -> int:
        return len(self.seeds) if self.seeds else self.n_reps


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one experiment"""
    name: str = Field(..., min_length=1)
    description: str = ""
    conditions: List[ConditionSpec] = Field(..., min_length=1)
    seeds: SeedSpec = Field(default_factory=SeedSpec)
    table_columns: List[str] = Field(default_factory=lambda: ["risk_mean", "risk_max", "ar_mean"])
    threads: int = Field(1, ge=1)
    out_dir: Optional[str] = None
    trajectories: bool = True

    class Config:
        json_schema_extra = {
            "example": {
                "name": "stationary",
                "conditions": [{"method": "csa", "stream": {"tau": 0.5, "T": 3000}}],
                "seeds": {"base_seed": 42, "n_reps": 50},
            }
        }


class RunSummary(BaseModel):
    """Per-replication metrics"""
    rep: int
    seed: int
    T: int
    final_risk: float = Field(..., ge=0.0, le=1.0)
    N_T: int
    AR: float = Field(..., ge=0.0, le=1.0)
    PathV_strict: bool
    PathV_slack: bool
    MaxR: Optional[float] = None
    FCR_events: int = 0
    Gap_T: Optional[int] = None
    oracle_AR: Optional[float] = None
    frontier_drops: Optional[int] = None
    certified_count: int = 0
    mean_delay: Optional[float] = None
    first_cert_round: List[Optional[int]] = Field(default_factory=list)
    verifier_calls: int = 0
    refused: bool = False
    final_threshold: Optional[float] = None


class AggregateRow(BaseModel):
    label: Dict[str, LabelValue] = Field(default_factory=dict)
    method: str = Method.CSA.value
    framework: str = "ap"
    n_reps: int
    risk_mean: float
    risk_max: float
    risk_ci: float
    ar_mean: float
    ar_ci: float
    maxr_mean: Optional[float] = None
    maxr_max: Optional[float] = None
    pathv_strict_count: int
    pathv_slack_count: int
    pathv_strict_rate: float
    fcr_events_total: int
    fcr_rate: float
    gap_mean: Optional[float] = None
    oracle_ar_mean: Optional[float] = None
    frontier_drops_mean: Optional[float] = None
    certified_mean: float
    delay_mean: Optional[float] = None
    first_cert_mean: Optional[float] = None
    verifier_calls_mean: float
    refused_count: int = 0
    cert_rate_by_threshold: List[float] = Field(default_factory=list)
    delay_by_threshold: List[Optional[float]] = Field(default_factory=list)

    def value(self, column: str) -> Any:
        """Look a table column up in the label first, then in the metrics"""
        if column in self.label:
            return self.label[column]
        if column not in type(self).model_fields:
            raise KeyError(column)
        return getattr(self, column)


class Trajectory(BaseModel):
    t: List[int]
    running_risk: List[float]
    action_rate: List[float]


class ConditionResult(BaseModel):
    label: Dict[str, LabelValue] = Field(default_factory=dict)
    method: str
    summaries: List[RunSummary]
    aggregate: AggregateRow
    trajectory: Optional[Trajectory] = None


class Provenance(BaseModel):
    config_hash: str
    seeds: List[int]
    version: str
    created_at: str = Field(default_factory=lambda: datetime.utcnow().isoformat())
    slack_bound: str = "alpha + sqrt(ln(1/delta)/max(N_t,1)) (c1=1, c2=0)"
    notes: List[str] = Field(default_factory=list)


class ResultBundle(BaseModel):
    name: str
    config: ExperimentConfig
    conditions: List[ConditionResult]
    provenance: Provenance

    @property
    def rows(self) -> List[AggregateRow]:
        return [condition.aggregate for condition in self.conditions]


class ExperimentRequest(BaseModel):
    """Body of POST /experiments"""
    preset: Optional[str] = None
    config: Optional[ExperimentConfig] = None
    reps: Optional[int] = Field(None, ge=1)
    seeds: Optional[List[int]] = None
    threads: Optional[int] = Field(None, ge=1)
    store: bool = True

    class Config:
        json_schema_extra = {
            "example": {"preset": "stress_noise", "reps": 5}
        }

    @model_validator(mode="after")
    def _one_source(self):
        if (self.preset is None) == (self.config is None):
            raise ValueError("give exactly one of 'preset' or 'config'")
        return self


class StoredRunInfo(BaseModel):
    id: int
    name: str
    config_hash: str
    created_at: Optional[datetime] = None
    n_conditions: int
    n_reps: int

    class Config:
        from_attributes = True


class ExperimentRunResponse(BaseModel):
    id: Optional[int] = None
    name: str
    config_hash: str
    rows: List[AggregateRow]
