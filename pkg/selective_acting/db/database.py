import logging

from sqlalchemy import create_engine
from sqlalchemy.orm import declarative_base, sessionmaker
from sqlalchemy.pool import StaticPool

from selective_acting.settings import DATABASE_URL

logger = logging.getLogger(__name__)


def make_engine(url: str = DATABASE_URL):
    """SQLAlchemy engine; in-memory SQLite shares one connection across threads"""
    if url.startswith("sqlite"):
        kwargs = {"connect_args": {"check_same_thread": False}}
        if url in ("sqlite://", "sqlite:///:memory:"):
            kwargs["poolclass"] = StaticPool
        return create_engine(url, **kwargs)
    return create_engine(url)


# Create SQLAlchemy engine
engine = make_engine(DATABASE_URL)

# Create SessionLocal class
SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=engine)

# Create Base class
Base = declarative_base()


def init_db(bind=None) -> None:
    # register the ORM tables on Base before creating them
    from selective_acting.models import experiment_run  # noqa: F401

    Base.metadata.create_all(bind=bind or engine)
    logger.info(f"Database tables ready: {', '.join(Base.metadata.tables)}")


# Dependency to get database session
def get_db():
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()
