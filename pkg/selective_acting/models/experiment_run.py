from sqlalchemy import Column, DateTime, Integer, String, Text
from sqlalchemy.sql import func

from selective_acting.db.database import Base


class ExperimentRun(Base):
    __tablename__ = "experiment_runs"

    id = Column(Integer, primary_key=True, index=True)
    name = Column(String(100), nullable=False, index=True)
    config_hash = Column(String(64), nullable=False, index=True)
    created_at = Column(DateTime(timezone=True), server_default=func.now(), nullable=False)
    n_conditions = Column(Integer, nullable=False)
    n_reps = Column(Integer, nullable=False)
    bundle_json = Column(Text, nullable=False)

    def __repr__(self):
        return f"<ExperimentRun(id={self.id}, name='{self.name}', config_hash='{self.config_hash[:12]}', n_reps={self.n_reps})>"
