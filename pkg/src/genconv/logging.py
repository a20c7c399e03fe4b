import logging
import os
import sys
from logging.handlers import RotatingFileHandler

import structlog

from .settings import settings


def setup_logging(level: str | None = None):
    """Configure unified structured logging for the genconv toolkit."""

    # ─────────────────────────────
    # 1️⃣ Base setup
    # ─────────────────────────────
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper(), logging.INFO),
        format="%(message)s",
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True,
    )

    # ─────────────────────────────
    # 2️⃣ Determine mode
    # ─────────────────────────────
    dev_mode = settings.environment != "production"

    # ─────────────────────────────
    # 3️⃣ Configure structlog processors
    # ─────────────────────────────
    if dev_mode:
        processors = [
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            structlog.dev.ConsoleRenderer(colors=False),
        ]
    else:
        processors = [
            structlog.processors.TimeStamper(fmt="iso"),
            structlog.processors.add_log_level,
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(),
        ]

    structlog.configure(
        processors=processors,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )

    return structlog.get_logger("genconv")


def enable_file_logging(directory: str | None = None) -> str:
    """Attach a rotating file handler; returns the log file path."""
    directory = directory or settings.log_dir
    os.makedirs(directory, exist_ok=True)
    log_path = os.path.join(directory, "genconv.log")
    root = logging.getLogger()
    if not any(
        isinstance(h, RotatingFileHandler) and h.baseFilename == os.path.abspath(log_path)
        for h in root.handlers
    ):
        root.addHandler(RotatingFileHandler(log_path, maxBytes=5_000_000, backupCount=5))
    return log_path


# ─────────────────────────────
# 🌐 Global default logger
# ─────────────────────────────
log = setup_logging()


# ─────────────────────────────
# 🧩 Helper for contextual loggers
# ─────────────────────────────
def get_component_logger(component: str, **context):
    """
    Create a bound logger for one component (kdtree, trainer, modelnet loader, ...).
    Extra keyword context (run id, layer index, ...) is attached to every entry.
    """
    bound = log.bind(component=component)
    if context:
        bound = bound.bind(**context)
    return bound
