#!/usr/bin/env python3
"""
Database Setup Script for Selective Acting
Creates the result-bundle tables on CSA_DATABASE_URL
"""

import logging
import sys

from selective_acting.db.database import engine, init_db
from selective_acting.settings import DATABASE_URL, configure_logging

logger = logging.getLogger(__name__)


def setup_database() -> bool:
    try:
        init_db(engine)
        logger.info(f"Database ready at {DATABASE_URL}")
        return True
    except Exception as e:
        logger.error(f"Database setup failed: {e}")
        return False


if __name__ == "__main__":
    configure_logging()
    sys.exit(0 if setup_database() else 1)
