# Core module exports
from app.core.config import settings, get_settings
from app.core.logging import configure_logging
from app.core.exceptions import (
    EngineError,
    ConfigError,
    DataFormatError,
    ShapeError,
    DomainError,
    DegenerateVectorError,
    NonFiniteError,
    UnreachableParameterError,
    EmptyPositivesError,
    CheckpointError,
)

__all__ = [
    "settings",
    "get_settings",
    "configure_logging",
    "EngineError",
    "ConfigError",
    "DataFormatError",
    "ShapeError",
    "DomainError",
    "DegenerateVectorError",
    "NonFiniteError",
    "UnreachableParameterError",
    "EmptyPositivesError",
    "CheckpointError",
]
