"""
Engine exceptions

Every error carries the process exit code the CLI reports for it:
1 for runtime failures, 2 for usage/config/input errors.
"""


class EngineError(Exception):
    """Base class for all engine errors"""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(EngineError):
    """Invalid configuration or parameter value"""

    exit_code = 2


class DataFormatError(EngineError):
    """Input file could not be parsed"""

    exit_code = 2


class ShapeError(EngineError, ValueError):
    """Incompatible array shapes"""


class DomainError(EngineError, ValueError):
    """Input outside the domain of an operation"""


class DegenerateVectorError(DomainError):
    """Vector norm too small to normalize"""


class NonFiniteError(DomainError):
    """NaN or Inf where finite values are required"""


class UnreachableParameterError(EngineError):
    """Parameter was never watched by the tape the output lives on"""


class EmptyPositivesError(EngineError):
    """No anchor in a contrastive batch has a positive"""


class CheckpointError(EngineError):
    """Checkpoint file missing, truncated or of unknown layout"""
