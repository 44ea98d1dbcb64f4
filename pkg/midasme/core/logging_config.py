"""
Logging configuration
"""
import logging
import sys
from typing import Optional

from midasme.core.config import settings


def setup_logging(level: Optional[str] = None):
    """Configure application logging.

    Progress goes to stderr; stdout is kept for the fit report.
    """
    if level is None:
        level = settings.LOG_LEVEL
    if level:
        log_level = getattr(logging, level.upper(), logging.INFO)
    else:
        log_level = logging.DEBUG if settings.ENVIRONMENT == "development" else logging.INFO

    logging.basicConfig(
        level=log_level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[
            logging.StreamHandler(sys.stderr)
        ],
        force=True,
    )

    # Set specific loggers
    logging.getLogger("joblib").setLevel(logging.WARNING)
