"""
Logging setup: stdlib loggers rendered through structlog processors
"""

import logging
from logging.config import dictConfig
from typing import Optional

import structlog

from linucb_lab.config import settings


def _renderer(fmt: str):
    if fmt == "json":
        return structlog.processors.JSONRenderer()
    return structlog.dev.ConsoleRenderer(colors=False)


def build_logging_config(level: Optional[str] = None, fmt: Optional[str] = None) -> dict:
    """
    Build a dictConfig mapping for the given level and format

    Args:
        level: Log level name, defaults to settings.LOG_LEVEL
        fmt: "console" or "json", defaults to settings.LOG_FORMAT

    Returns:
        Mapping accepted by logging.config.dictConfig
    """
    level = (level or settings.LOG_LEVEL).upper()
    fmt = fmt or settings.LOG_FORMAT

    pre_chain = [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso", utc=True),
    ]

    return {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'structured': {
                '()': structlog.stdlib.ProcessorFormatter,
                'processor': _renderer(fmt),
                'foreign_pre_chain': pre_chain,
            },
        },
        'handlers': {
            'console': {
                'level': level,
                'class': 'logging.StreamHandler',
                'formatter': 'structured',
                'stream': 'ext://sys.stderr',
            },
        },
        'root': {
            'level': level,
            'handlers': ['console'],
        },
        'loggers': {
            'celery': {
                'level': level,
                'handlers': ['console'],
                'propagate': False,
            },
        },
    }


def configure_logging(level: Optional[str] = None, fmt: Optional[str] = None) -> None:
    """Install the structured logging config for the whole process"""
    dictConfig(build_logging_config(level, fmt))
    structlog.configure(
        processors=[
            structlog.stdlib.add_log_level,
            structlog.stdlib.add_logger_name,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )
    logging.getLogger(__name__).debug(f"Logging configured at level {level or settings.LOG_LEVEL}")
