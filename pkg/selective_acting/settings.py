"""
Environment configuration for the selective acting toolkit.
Values come from the process environment (optionally a .env file).
"""

import logging
import os
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

PROJECT_ROOT = Path(__file__).parent.parent.absolute()

DATABASE_URL = os.getenv("CSA_DATABASE_URL", f"sqlite:///{PROJECT_ROOT / 'selective_acting.db'}")
RESULTS_DIR = Path(os.getenv("CSA_RESULTS_DIR", "results"))
LOG_LEVEL = os.getenv("CSA_LOG_LEVEL", "INFO")
LOG_FILE: Optional[str] = os.getenv("CSA_LOG_FILE") or None

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s - %(message)s"


def _int_from_env(name: str, default: int) -> int:
    raw = os.getenv(name, str(default))
    try:
        return int(raw) if raw and raw.strip() else default
    except (ValueError, TypeError):
        return default


THREADS = max(1, _int_from_env("CSA_THREADS", 1))
HOST = os.getenv("HOST", "0.0.0.0") or "0.0.0.0"
PORT = _int_from_env("PORT", 8000)


def configure_logging(level: Optional[str] = None, log_file: Optional[str] = None) -> None:
    """Configure root logging with UTF-8 handlers"""
    handlers: list = [logging.StreamHandler()]
    log_file = log_file or LOG_FILE
    if log_file:
        handlers.append(logging.FileHandler(log_file, encoding="utf-8"))

    logging.basicConfig(
        level=getattr(logging, (level or LOG_LEVEL).upper(), logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
