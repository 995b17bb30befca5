# Schemas exports
from app.schemas.config import (
    LabelWeights,
    KernelConfig,
    AugmentPolicy,
    AugmentConfig,
    CsvSchema,
    DataConfig,
    TrainConfig,
)
from app.schemas.results import (
    LossBreakdown,
    EpochSummary,
    TrainResult,
    GradCheckTerm,
    GradCheckReport,
    AblationArm,
    AblationSummary,
)

__all__ = [
    "LabelWeights",
    "KernelConfig",
    "AugmentPolicy",
    "AugmentConfig",
    "CsvSchema",
    "DataConfig",
    "TrainConfig",
    "LossBreakdown",
    "EpochSummary",
    "TrainResult",
    "GradCheckTerm",
    "GradCheckReport",
    "AblationArm",
    "AblationSummary",
]
