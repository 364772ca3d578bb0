"""
Output files for result bundles: summary JSON, table CSV and trajectory CSV.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import List, Union

import pandas as pd

from selective_acting.exceptions import ConfigError
from selective_acting.models.schemas import ResultBundle

logger = logging.getLogger(__name__)


class EmitFormat(str, Enum):
    SUMMARY_JSON = "summary-json"
    TABLE_CSV = "table-csv"
    TRAJECTORY_CSV = "trajectory-csv"


def table_frame(bundle: ResultBundle) -> pd.DataFrame:
    """One row per condition with the configured table columns"""
    columns = bundle.config.table_columns
    try:
        records = [{column: row.value(column) for column in columns} for row in bundle.rows]
    except KeyError as exc:
        raise ConfigError(f"unknown table column {exc.args[0]!r}", {"column": exc.args[0]}) from exc
    return pd.DataFrame.from_records(records, columns=columns)


def trajectory_frame(bundle: ResultBundle) -> pd.DataFrame:
    frames = []
    for index, condition in enumerate(bundle.conditions):
        if condition.trajectory is None:
            continue
        frame = pd.DataFrame({
            "t": condition.trajectory.t,
            "running_risk": condition.trajectory.running_risk,
            "action_rate": condition.trajectory.action_rate,
        })
        frame.insert(0, "method", condition.method)
        frame.insert(0, "condition", index)
        for key, value in condition.label.items():
            frame[key] = value
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["condition", "method", "t", "running_risk", "action_rate"])
    return pd.concat(frames, ignore_index=True)


def emit(bundle: ResultBundle, fmt: Union[str, EmitFormat], out_dir: Union[str, Path]) -> Path:
    fmt = EmitFormat(fmt)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    if fmt == EmitFormat.SUMMARY_JSON:
        path = out_dir / f"{bundle.name}_summary.json"
        path.write_text(bundle.model_dump_json(indent=2), encoding="utf-8")
    elif fmt == EmitFormat.TABLE_CSV:
        path = out_dir / f"{bundle.name}_table.csv"
        table_frame(bundle).to_csv(path, index=False)
    else:
        path = out_dir / f"{bundle.name}_trajectory.csv"
        trajectory_frame(bundle).to_csv(path, index=False)

    logger.info(f"Wrote {fmt.value} to {path}")
    return path


def emit_all(bundle: ResultBundle, out_dir: Union[str, Path]) -> List[Path]:
    return [emit(bundle, fmt, out_dir) for fmt in EmitFormat]


def load_bundle(path: Union[str, Path]) -> ResultBundle:
    return ResultBundle.model_validate_json(Path(path).read_text(encoding="utf-8"))
