import logging
from typing import List, Optional

from sqlalchemy import desc
from sqlalchemy.orm import Session

from selective_acting.models.experiment_run import ExperimentRun
from selective_acting.models.schemas import ResultBundle, StoredRunInfo

logger = logging.getLogger(__name__)


class ResultStore:
    """Service class for stored result bundles"""

    def save_bundle(self, db: Session, bundle: ResultBundle) -> StoredRunInfo:
        row = ExperimentRun(
            name=bundle.name,
            config_hash=bundle.provenance.config_hash,
            n_conditions=len(bundle.conditions),
            n_reps=len(bundle.provenance.seeds),
            bundle_json=bundle.model_dump_json(),
        )
        db.add(row)
        db.commit()
        db.refresh(row)
        logger.info(f"Stored bundle '{bundle.name}' as run {row.id}")
        return StoredRunInfo.model_validate(row)

    def list_runs(self, db: Session, limit: int = 50, name: Optional[str] = None) -> List[StoredRunInfo]:
        """Most recent runs first"""
        query = db.query(ExperimentRun)
        if name:
            query = query.filter(ExperimentRun.name == name)
        rows = query.order_by(desc(ExperimentRun.id)).limit(limit).all()
        return [StoredRunInfo.model_validate(row) for row in rows]

    def get_bundle(self, db: Session, run_id: int) -> Optional[ResultBundle]:
        row = db.query(ExperimentRun).filter(ExperimentRun.id == run_id).first()
        if row is None:
            return None
        return ResultBundle.model_validate_json(row.bundle_json)
