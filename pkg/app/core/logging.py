"""
Logging setup (loguru)
"""

import sys
from typing import Optional
from loguru import logger

from app.core.config import settings


LOG_FORMAT = (
    "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
    "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> - <level>{message}</level>"
)


def configure_logging(level: Optional[str] = None) -> None:
    """Install the stderr sink and, when LOG_FILE is set, a rotating file sink"""
    
    level = (level or ("DEBUG" if settings.DEBUG else settings.LOG_LEVEL)).upper()
    
    logger.remove()
    # stderr: stdout is reserved for command output
    logger.add(sys.stderr, format=LOG_FORMAT, level=level)
    
    if settings.LOG_FILE:
        logger.add(
            settings.LOG_FILE,
            rotation=settings.LOG_ROTATION,
            retention=settings.LOG_RETENTION,
            level="INFO",
        )
