"""
Experiment orchestration: seeded replications of every condition, optional
process-parallel execution, aggregation and provenance.
"""

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import yaml
from pydantic import ValidationError

from selective_acting import __version__
from selective_acting.exceptions import CalibrationError, ConfigError
from selective_acting.models.schemas import (
    ConditionResult,
    ConditionSpec,
    ExperimentConfig,
    GridMode,
    Method,
    Provenance,
    ResultBundle,
    RunSummary,
    SeedSpec,
    StreamKind,
    TransformKind,
    Trajectory,
)
from selective_acting.services import baselines
from selective_acting.services.calibration import build_grid, calibrate_stream, load_model, split_calibration
from selective_acting.services.controller import ControllerConfig, RunResult, run_stream
from selective_acting.services.epoch_controller import EpochSchedule, run_stream_epoch
from selective_acting.services.eprocess import ThresholdGrid
from selective_acting.services.metrics import aggregate, summarize, trajectory
from selective_acting.services.seeding import (
    CALIBRATION,
    COINS,
    DATA,
    TRANSFORMS,
    child,
    make_generator,
    resolve_seeds,
)
from selective_acting.services.sparse_verifier import SparsePolicy, run_stream_sparse
from selective_acting.services.streams import (
    StationarySpec,
    Stream,
    apply_bias,
    apply_flip,
    apply_ordering,
    gen_monotone,
    gen_stationary,
    read_replay,
    with_calibration,
)

logger = logging.getLogger(__name__)


def config_hash(config: ExperimentConfig) -> str:
    payload = json.dumps(config.model_dump(mode="json"), sort_keys=True)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}", {"path": str(path)})
    with open(path, "r", encoding="utf-8") as handle:
        raw = yaml.safe_load(handle)
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"invalid experiment config {path}", {"errors": e.errors(include_url=False)}) from e


def save_config(config: ExperimentConfig, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        yaml.safe_dump(config.model_dump(mode="json"), handle, sort_keys=False)


def _grid(condition: ConditionSpec, stream: Optional[Stream]) -> ThresholdGrid:
    spec = condition.controller
    if spec.grid_mode == GridMode.CALIBRATED:
        if stream is None or not stream.calibration:
            raise ConfigError("a calibrated grid needs a stream with a calibration split", {"label": condition.label})
        try:
            return build_grid([r.score for r in stream.calibration], spec.m)
        except CalibrationError as e:
            raise ConfigError(e.message, {"label": condition.label, **e.details}) from e
    if spec.grid:
        return ThresholdGrid.from_values(spec.grid)
    return ThresholdGrid.uniform(spec.m)


def controller_config(condition: ConditionSpec, stream: Optional[Stream] = None) -> ControllerConfig:
    spec = condition.controller
    grid = _grid(condition, stream)
    try:
        return ControllerConfig(
            alpha=spec.alpha,
            delta=spec.delta,
            grid=grid,
            budget_scheme=spec.budget_scheme,
            burn_in=spec.burn_in,
            fixed_bet=spec.fixed_bet,
            bet_margin=spec.bet_margin,
        )
    except ValueError as e:
        raise ConfigError(str(e), {"label": condition.label}) from e


def build_stream(condition: ConditionSpec, seed: np.random.SeedSequence) -> Stream:
    """Generate (or read) the condition's stream and apply its transforms in order"""
    spec = condition.stream
    alpha = condition.controller.alpha

    if spec.kind == StreamKind.STATIONARY:
        stationary = StationarySpec(tau=spec.tau, alpha=alpha, T=spec.T)
        stream = gen_stationary(stationary, child(seed, DATA))
        if spec.n_cal > 0:
            stream = with_calibration(stream, stationary, spec.n_cal, child(seed, CALIBRATION))
    elif spec.kind == StreamKind.MONOTONE:
        stream = gen_monotone(spec.tau0, spec.tau_max, spec.ramp_rounds, spec.T, child(seed, DATA), alpha)
    else:
        stream = read_replay(spec.path)
        if spec.n_cal > 0 or spec.calibrate:
            calibration, evaluation = split_calibration(stream.rounds, spec.cal_fraction, child(seed, CALIBRATION))
            stream = replace(stream, rounds=evaluation, calibration=calibration)
        if spec.calibrate or spec.model_path:
            stream = _calibrate(stream, spec.model_path)

    for i, transform in enumerate(condition.transforms):
        key = child(seed, TRANSFORMS, i)
        if transform.kind == TransformKind.BIAS:
            stream = apply_bias(stream, transform.value)
        elif transform.kind == TransformKind.FLIP:
            stream = apply_flip(stream, transform.value, key)
        else:
            stream = apply_ordering(stream, transform.ordering, key, passes=transform.passes)
    return stream


def _calibrate(stream: Stream, model_path: Optional[str]) -> Stream:
    model = None
    if model_path:
        if not Path(model_path).exists():
            raise ConfigError(f"calibration model not found: {model_path}", {"path": model_path})
        model = load_model(model_path)
    try:
        calibrated, _ = calibrate_stream(stream, model)
    except CalibrationError as e:
        raise ConfigError(e.message, e.details) from e
    return calibrated


def _warm_start_pairs(stream: Stream, seed: np.random.SeedSequence) -> List[Tuple[float, bool]]:
    pairs = stream.calibration_pairs()
    order = make_generator(child(seed, CALIBRATION, 1)).permutation(len(pairs))
    return [pairs[i] for i in order.tolist()]


def run_condition(condition: ConditionSpec, stream: Stream, seed: np.random.SeedSequence) -> Tuple[RunResult, bool]:
    """Run one method on one stream; returns the result and whether it refused to act"""
    config = controller_config(condition, stream)
    method = condition.method
    base = condition.baseline

    if method == Method.CSA:
        pairs = _warm_start_pairs(stream, seed) if condition.controller.warm_start else None
        return run_stream(config, stream, warm_start_pairs=pairs), False
    if method == Method.CSA_EPOCH:
        epoch = condition.epoch
        if epoch is None or epoch.boundaries:
            schedule = EpochSchedule(boundaries=epoch.boundaries if epoch else (1,))
        else:
            schedule = EpochSchedule(fixed_length=epoch.fixed_length)
        return run_stream_epoch(config, schedule, stream), False
    if method == Method.CSA_SPARSE:
        sparse = condition.sparse
        policy = SparsePolicy(
            pi=sparse.pi if sparse else 1.0,
            pi_min=sparse.pi_min if sparse else None,
            schedule=tuple(tuple(p) for p in sparse.schedule) if sparse and sparse.schedule else None,
        )
        return run_stream_sparse(config, policy, stream, child(seed, COINS)), False

    if method == Method.ALWAYS_ACT:
        policy = baselines.AlwaysAct()
    elif method == Method.FIXED_THRESHOLD:
        policy = baselines.FixedThreshold(base.q0)
    elif method == Method.NAIVE_TUNING:
        policy = baselines.NaiveTuning(config.grid.thresholds, config.alpha, base.window)
    elif method == Method.ACI:
        policy = baselines.ACI(config.alpha, base.gamma, base.aci_window)
    else:
        policy = baselines.OfflineCalibrated(
            stream.calibration_pairs(),
            base.cal_delta or config.delta,
            config.grid.thresholds,
            config.alpha,
        )
    refused = isinstance(policy, baselines.OfflineCalibrated) and policy.refused
    return baselines.run_baseline(policy, stream), refused


def _run_task(task) -> Tuple[RunSummary, Optional[np.ndarray], Optional[np.ndarray]]:
    condition, rep, reported_seed, seed, keep_trajectory = task
    stream = build_stream(condition, seed)
    result, refused = run_condition(condition, stream, seed)
    result.seed = reported_seed
    config = controller_config(condition, stream)
    summary = summarize(
        result,
        alpha=config.alpha,
        delta=config.delta,
        burn_in=config.burn_in,
        grid=config.grid.thresholds,
        oracle=stream.oracle,
        rep=rep,
        seed=reported_seed,
        refused=refused,
    )
    if not keep_trajectory:
        return summary, None, None
    risk, ar = trajectory(result.trace)
    return summary, risk, ar


def _mean_trajectory(runs: List[Tuple[RunSummary, Optional[np.ndarray], Optional[np.ndarray]]]) -> Optional[Trajectory]:
    risks = [r for _, r, _ in runs if r is not None]
    if not risks or len({len(r) for r in risks}) != 1:
        return None
    ars = [a for _, _, a in runs]
    return Trajectory(
        t=list(range(1, len(risks[0]) + 1)),
        running_risk=np.mean(np.vstack(risks), axis=0).tolist(),
        action_rate=np.mean(np.vstack(ars), axis=0).tolist(),
    )


def run_experiment(
    config: ExperimentConfig,
    reps: Optional[int] = None,
    seeds: Optional[List[int]] = None,
    threads: Optional[int] = None,
) -> ResultBundle:
    """Run every condition over every replication seed and aggregate"""
    if reps is not None or seeds is not None:
        config = config.model_copy(update={"seeds": SeedSpec(
            base_seed=config.seeds.base_seed,
            n_reps=reps or config.seeds.n_reps,
            seeds=seeds if seeds is not None else config.seeds.seeds,
        )})
    if threads is not None:
        config = config.model_copy(update={"threads": threads})

    resolved = resolve_seeds(config.seeds.base_seed, config.seeds.n_reps, config.seeds.seeds)
    tasks = [
        (condition, rep, reported, seq, config.trajectories)
        for condition in config.conditions
        for rep, reported, seq in resolved
    ]
    logger.info(
        f"Running experiment '{config.name}': {len(config.conditions)} conditions x "
        f"{len(resolved)} replications on {config.threads} worker(s)"
    )

    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as executor:
            outputs = list(executor.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * config.threads))))
    else:
        outputs = [_run_task(task) for task in tasks]

    conditions = []
    n = len(resolved)
    for i, condition in enumerate(config.conditions):
        runs = outputs[i * n:(i + 1) * n]
        summaries = [summary for summary, _, _ in runs]
        row = aggregate(summaries, condition.label, condition.method)
        conditions.append(ConditionResult(
            label=condition.label,
            method=condition.method.value,
            summaries=summaries,
            aggregate=row,
            trajectory=_mean_trajectory(runs) if config.trajectories else None,
        ))
        logger.info(
            f"Condition {condition.label or condition.method.value}: risk={row.risk_mean:.4f} "
            f"AR={row.ar_mean:.4f} PathV={row.pathv_strict_count}/{n}"
        )

    notes = []
    if any(t.kind == TransformKind.ORDERING for c in config.conditions for t in c.transforms):
        notes.append("ordering streams use fixed stand-in constructions; see DESIGN.md")
    provenance = Provenance(
        config_hash=config_hash(config),
        seeds=[reported for _, reported, _ in resolved],
        version=__version__,
        notes=notes,
    )
    return ResultBundle(name=config.name, config=config, conditions=conditions, provenance=provenance)
