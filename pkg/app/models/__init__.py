# Models exports
from app.models.dataset import Dataset, SslSplit, TrainingView, DISTRACTOR_LABEL
from app.models.encoder import (
    EncoderParams,
    Prototypes,
    init_model,
    forward,
    embed,
    penultimate,
    prototype_matrix,
)
from app.models.batch import PseudoLabelAssignment, ContrastiveBatch, MmdSelection
from app.models.checkpoint import Checkpoint, save_checkpoint, load_checkpoint

__all__ = [
    "Dataset",
    "SslSplit",
    "TrainingView",
    "DISTRACTOR_LABEL",
    "EncoderParams",
    "Prototypes",
    "init_model",
    "forward",
    "embed",
    "penultimate",
    "prototype_matrix",
    "PseudoLabelAssignment",
    "ContrastiveBatch",
    "MmdSelection",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
