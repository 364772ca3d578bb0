"""
HTTP surface: presets, experiment runs and stored result bundles.
"""

import logging
from typing import Any, Dict, List

from fastapi import Depends, FastAPI, HTTPException
from sqlalchemy.orm import Session

from selective_acting import __version__
from selective_acting.db.database import get_db, init_db
from selective_acting.exceptions import ConfigError, SelectiveActingError, UnknownPresetError
from selective_acting.models.schemas import (
    AggregateRow,
    ExperimentConfig,
    ExperimentRequest,
    ExperimentRunResponse,
    ResultBundle,
    StoredRunInfo,
)
from selective_acting.services.experiment_runner import run_experiment
from selective_acting.services.presets import available_presets, preset
from selective_acting.services.result_store import ResultStore
from selective_acting.settings import configure_logging

configure_logging()
logger = logging.getLogger(__name__)

# Create database tables
init_db()

app = FastAPI(
    title="Selective Acting API",
    description="Run anytime-valid selective acting experiments and browse stored results",
    version=__version__,
)

result_store = ResultStore()


def _http_error(e: SelectiveActingError) -> HTTPException:
    if isinstance(e, UnknownPresetError):
        status = 404
    elif isinstance(e, ConfigError):
        status = 422
    else:
        status = 400
    return HTTPException(status_code=status, detail=e.to_record()["error"])


@app.get("/")
async def root():
    """Root endpoint with API information"""
    return {
        "message": "Selective Acting API",
        "version": __version__,
        "docs": "/docs",
        "presets": "/presets",
    }


@app.get("/health")
async def health():
    return {"status": "healthy"}


@app.get("/presets", response_model=List[str])
async def list_presets():
    return available_presets()


@app.get("/presets/{name}", response_model=ExperimentConfig)
async def get_preset(name: str):
    try:
        return preset(name)
    except SelectiveActingError as e:
        raise _http_error(e)


@app.post("/experiments", response_model=ExperimentRunResponse)
def create_experiment(request: ExperimentRequest, db: Session = Depends(get_db)):
    """Run an experiment synchronously and optionally store its bundle"""
    try:
        config = preset(request.preset) if request.preset else request.config
        bundle = run_experiment(config, reps=request.reps, seeds=request.seeds, threads=request.threads)
    except SelectiveActingError as e:
        logger.warning(f"Experiment request failed: {e.message}")
        raise _http_error(e)

    run_id = None
    if request.store:
        run_id = result_store.save_bundle(db, bundle).id
    return ExperimentRunResponse(
        id=run_id,
        name=bundle.name,
        config_hash=bundle.provenance.config_hash,
        rows=bundle.rows,
    )


@app.get("/experiments", response_model=List[StoredRunInfo])
async def list_experiments(limit: int = 50, db: Session = Depends(get_db)):
    return result_store.list_runs(db, limit=limit)


def _stored_bundle(db: Session, run_id: int) -> ResultBundle:
    bundle = result_store.get_bundle(db, run_id)
    if bundle is None:
        raise HTTPException(status_code=404, detail=f"experiment run {run_id} not found")
    return bundle


@app.get("/experiments/{run_id}", response_model=ResultBundle)
async def get_experiment(run_id: int, db: Session = Depends(get_db)):
    return _stored_bundle(db, run_id)


@app.get("/experiments/{run_id}/table")
async def get_experiment_table(run_id: int, db: Session = Depends(get_db)) -> List[Dict[str, Any]]:
    """Table rows with the bundle's configured columns"""
    bundle = _stored_bundle(db, run_id)
    columns = bundle.config.table_columns
    try:
        return [{column: row.value(column) for column in columns} for row in bundle.rows]
    except KeyError as e:
        raise HTTPException(status_code=422, detail=f"unknown table column {e.args[0]!r}")


@app.get("/experiments/{run_id}/rows", response_model=List[AggregateRow])
async def get_experiment_rows(run_id: int, db: Session = Depends(get_db)):
    return _stored_bundle(db, run_id).rows
