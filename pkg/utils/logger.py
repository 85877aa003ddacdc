import logging
import sys
from typing import Optional

from config import settings

FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'

_override: Optional[int] = None

def _resolve(level: str) -> int:
    numeric = getattr(logging, level.upper(), None)
    if not isinstance(numeric, int):
        raise ValueError(f"Unknown log level: {level}")
    return numeric

def _configured_level() -> int:
    if _override is not None:
        return _override
    # DEBUG overrides the configured level
    return logging.DEBUG if settings.DEBUG else _resolve(settings.LOG_LEVEL)

def get_logger(name: str) -> logging.Logger:
    '''Logger writing to stdout at the configured level.'''
    logger = logging.getLogger(name)
    logger.setLevel(_configured_level())

    if not logger.handlers:
        handler = logging.StreamHandler(sys.stdout)
        handler.setFormatter(logging.Formatter(FORMAT, datefmt=DATE_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False

    return logger

def set_level(level: str) -> None:
    '''Change the level of every logger created through get_logger, and of those created later.'''
    global _override
    _override = _resolve(level)
    for logger in logging.root.manager.loggerDict.values():
        if isinstance(logger, logging.Logger) and logger.handlers:
            logger.setLevel(_override)
