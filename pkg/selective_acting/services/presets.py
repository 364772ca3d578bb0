"""
Built-in experiment presets.

Every preset starts from the stationary desk-scale defaults: tau = 0.5,
alpha = 0.30, delta = 0.05, m = 20 (cutoffs i/21), T = 3000, burn-in 500
accepted rounds and 50 replications.
"""

import logging
from typing import Callable, Dict, List, Optional

from selective_acting.exceptions import UnknownPresetError
from selective_acting.models.schemas import (
    BudgetScheme,
    ConditionSpec,
    ControllerSpec,
    EpochSpec,
    ExperimentConfig,
    Method,
    OrderingName,
    SeedSpec,
    SparseSpec,
    StreamKind,
    StreamSpec,
    TransformKind,
    TransformSpec,
)

logger = logging.getLogger(__name__)

DEFAULT_REPS = 50
BASE_SEED = 42

BIAS_LEVELS = [-0.15, -0.10, -0.05, 0.0, 0.05, 0.10, 0.15]
NOISE_LEVELS = [0.0, 0.02, 0.05, 0.10, 0.15, 0.20]
GRID_SIZES = [10, 25, 50, 100]
FIXED_BETS = [0.01, 0.05, 0.10, 0.25, 0.50]
SPARSE_RATES = [1.0, 0.5, 0.2, 0.1]
SHIFT_METHODS = [
    Method.CSA,
    Method.ALWAYS_ACT,
    Method.FIXED_THRESHOLD,
    Method.NAIVE_TUNING,
    Method.ACI,
    Method.OFFLINE_CALIBRATED,
]


def _seeds(n_reps: int = DEFAULT_REPS) -> SeedSpec:
    return SeedSpec(base_seed=BASE_SEED, n_reps=n_reps)


def stationary() -> ExperimentConfig:
    """CSA against every baseline on the default stationary stream"""
    conditions = []
    for method in [Method.CSA] + SHIFT_METHODS[1:]:
        stream = StreamSpec(n_cal=1000) if method == Method.OFFLINE_CALIBRATED else StreamSpec()
        conditions.append(ConditionSpec(label={"method": method.value}, method=method, stream=stream))
    return ExperimentConfig(
        name="stationary",
        description="Stationary stream, CSA and baselines",
        conditions=conditions,
        seeds=_seeds(),
        table_columns=["method", "risk_mean", "risk_max", "ar_mean", "pathv_strict_count", "maxr_max"],
    )


def stationary_validity() -> ExperimentConfig:
    return ExperimentConfig(
        name="stationary_validity",
        description="No false certification of analytically unsafe cutoffs over many seeds",
        conditions=[ConditionSpec(method=Method.CSA)],
        seeds=_seeds(500),
        table_columns=["risk_mean", "risk_max", "ar_mean", "fcr_events_total", "pathv_strict_count"],
        trajectories=False,
    )


def ablation_grid() -> ExperimentConfig:
    return ExperimentConfig(
        name="ablation_grid",
        description="Grid size m",
        conditions=[ConditionSpec(label={"m": m}, controller=ControllerSpec(m=m)) for m in GRID_SIZES],
        seeds=_seeds(),
        table_columns=["m", "risk_mean", "ar_mean", "fcr_events_total"],
    )


def ablation_lambda() -> ExperimentConfig:
    conditions = [ConditionSpec(label={"lambda": "adaptive"})]
    for lam in FIXED_BETS:
        conditions.append(ConditionSpec(label={"lambda": lam}, controller=ControllerSpec(fixed_bet=lam)))
    return ExperimentConfig(
        name="ablation_lambda",
        description="Adaptive plug-in bet against fixed bets",
        conditions=conditions,
        seeds=_seeds(),
        table_columns=["lambda", "risk_mean", "ar_mean", "certified_mean", "delay_mean"],
    )


def stress_bias() -> ExperimentConfig:
    conditions = [
        ConditionSpec(label={"b": b}, transforms=[TransformSpec(kind=TransformKind.BIAS, value=b)])
        for b in BIAS_LEVELS
    ]
    return ExperimentConfig(
        name="stress_bias",
        description="Additive score bias, clipped to [0.01, 0.99]",
        conditions=conditions,
        seeds=_seeds(),
        table_columns=["b", "risk_mean", "risk_max", "ar_mean"],
    )


def stress_noise() -> ExperimentConfig:
    conditions = [
        ConditionSpec(label={"p": p}, transforms=[TransformSpec(kind=TransformKind.FLIP, value=p)])
        for p in NOISE_LEVELS
    ]
    return ExperimentConfig(
        name="stress_noise",
        description="Symmetric verifier label flips",
        conditions=conditions,
        seeds=_seeds(),
        table_columns=["p", "risk_mean", "risk_max", "ar_mean"],
    )


def sparse_sweep() -> ExperimentConfig:
    conditions = [
        ConditionSpec(
            label={"pi": pi},
            method=Method.CSA_SPARSE,
            stream=StreamSpec(T=2000),
            sparse=SparseSpec(pi=pi),
        )
        for pi in SPARSE_RATES
    ]
    return ExperimentConfig(
        name="sparse_sweep",
        description="Bernoulli-subsampled verifier",
        conditions=conditions,
        seeds=_seeds(20),
        table_columns=["pi", "risk_mean", "ar_mean", "verifier_calls_mean", "first_cert_mean", "delay_mean"],
    )


def shift_orderings() -> ExperimentConfig:
    """Adversarial orderings of a finite pool, evaluated as four passes of 750 rounds"""
    conditions = []
    for ordering in OrderingName:
        for method in SHIFT_METHODS:
            conditions.append(ConditionSpec(
                label={"ordering": ordering.value, "method": method.value},
                method=method,
                stream=StreamSpec(T=750, n_cal=12000),
                transforms=[TransformSpec(kind=TransformKind.ORDERING, ordering=ordering, passes=4)],
                controller=ControllerSpec(warm_start=method == Method.CSA),
            ))
    return ExperimentConfig(
        name="shift_orderings",
        description="Non-exchangeable orderings of a stationary pool",
        conditions=conditions,
        seeds=_seeds(10),
        table_columns=["ordering", "method", "risk_mean", "ar_mean", "pathv_strict_count"],
    )


def epoch_demo() -> ExperimentConfig:
    stream = StreamSpec(kind=StreamKind.MONOTONE, T=6000, tau0=0.30, tau_max=0.65, ramp_rounds=3000)
    return ExperimentConfig(
        name="epoch_demo",
        description="Monotone frontier, single epoch against 1500-round epochs",
        conditions=[
            ConditionSpec(label={"schedule": "single"}, method=Method.CSA, stream=stream),
            ConditionSpec(
                label={"schedule": "L=1500"},
                method=Method.CSA_EPOCH,
                stream=stream,
                epoch=EpochSpec(fixed_length=1500),
            ),
        ],
        seeds=_seeds(20),
        table_columns=["schedule", "risk_mean", "ar_mean", "fcr_events_total", "gap_mean", "frontier_drops_mean"],
    )


def delay_rate() -> ExperimentConfig:
    return ExperimentConfig(
        name="delay_rate",
        description="First-certification delay per safe cutoff",
        conditions=[ConditionSpec(stream=StreamSpec(T=10000))],
        seeds=_seeds(200),
        table_columns=["certified_mean", "delay_mean", "first_cert_mean"],
        trajectories=False,
    )


def sensitivity() -> ExperimentConfig:
    conditions: List[ConditionSpec] = []
    for delta in [0.01, 0.05, 0.10]:
        conditions.append(ConditionSpec(label={"param": "delta", "value": delta}, controller=ControllerSpec(delta=delta)))
    for burn_in in [250, 1000]:
        conditions.append(ConditionSpec(label={"param": "burn_in", "value": burn_in}, controller=ControllerSpec(burn_in=burn_in)))
    for m in [15, 40]:
        conditions.append(ConditionSpec(label={"param": "m", "value": m}, controller=ControllerSpec(m=m)))
    conditions.append(ConditionSpec(
        label={"param": "budget_scheme", "value": BudgetScheme.EQUAL.value},
        controller=ControllerSpec(budget_scheme=BudgetScheme.EQUAL),
    ))
    return ExperimentConfig(
        name="sensitivity",
        description="One-at-a-time variations around the defaults",
        conditions=conditions,
        seeds=_seeds(),
        table_columns=["param", "value", "risk_mean", "risk_max", "ar_mean", "certified_mean", "delay_mean"],
    )


PRESETS: Dict[str, Callable[[], ExperimentConfig]] = {
    "stationary": stationary,
    "stationary_validity": stationary_validity,
    "ablation_grid": ablation_grid,
    "ablation_lambda": ablation_lambda,
    "stress_bias": stress_bias,
    "stress_noise": stress_noise,
    "sparse_sweep": sparse_sweep,
    "shift_orderings": shift_orderings,
    "epoch_demo": epoch_demo,
    "delay_rate": delay_rate,
    "sensitivity": sensitivity,
}


def available_presets() -> List[str]:
    return sorted(PRESETS)


def preset(name: str, reps: Optional[int] = None) -> ExperimentConfig:
    """Named experiment config; dashes and underscores are interchangeable"""
    key = name.replace("-", "_")
    if key not in PRESETS:
        raise UnknownPresetError(name, available_presets())
    config = PRESETS[key]()
    if reps is not None:
        logger.info(f"Preset {key}: overriding replications {config.seeds.count()} -> {reps}")
        config = config.model_copy(update={"seeds": SeedSpec(base_seed=config.seeds.base_seed, n_reps=reps)})
    return config
