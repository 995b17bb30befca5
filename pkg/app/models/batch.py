from dataclasses import dataclass
from typing import Optional, Tuple
import numpy as np

from app.core.autograd import Tensor
from app.core.exceptions import ConfigError, ShapeError


@dataclass(frozen=True)
class PseudoLabelAssignment:
    """Label decision for unlabeled instance i of a mini-batch"""

    index: int
    probs: np.ndarray
    confidence: float
    label: int
    confident: bool
    weight: float


@dataclass(frozen=True)
class ContrastiveBatch:
    """
    Rows entering the weighted contrastive loss.

    Row order is labeled [B], strong view 1 [muB], strong view 2 [muB],
    prototypes [K]; sections records those sizes when known.
    """

    embeddings: Tensor
    labels: np.ndarray
    weights: np.ndarray
    temperature: float
    sections: Optional[Tuple[int, int, int, int]] = None

    def __post_init__(self):
        rows = self.embeddings.shape[0] if self.embeddings.ndim == 2 else -1
        if rows < 0:
            raise ShapeError(f"embeddings must be 2-D, got shape {self.embeddings.shape}")

        labels = np.asarray(self.labels, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if labels.shape != (rows,) or weights.shape != (rows,):
            raise ShapeError(f"{rows} rows but {labels.shape[0]} labels and {weights.shape[0]} weights")
        if not (self.temperature > 0):
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0):
            raise ConfigError("row weights must be finite and non-negative")

        if self.sections is not None:
            if sum(self.sections) != rows:
                raise ShapeError(f"sections {self.sections} do not add up to {rows} rows")
            k = self.sections[3]
            if not np.array_equal(labels[rows - k:], np.arange(k)):
                raise ConfigError("prototype rows must carry their class indices as labels")

        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "weights", weights)

    @property
    def size(self) -> int:
        return self.labels.shape[0]

    def unit_norm_error(self) -> float:
        norms = np.linalg.norm(self.embeddings.value, axis=1)
        return float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0


@dataclass(frozen=True)
class MmdSelection:
    """Rows admitted to the MMD estimate by the entropy gate"""

    selected_labeled: np.ndarray
    selected_unlabeled: np.ndarray
    epsilon_p: float
    labeled_entropies: np.ndarray
    unlabeled_entropies: np.ndarray

    def __post_init__(self):
        for indices, entropies, side in (
            (self.selected_labeled, self.labeled_entropies, "labeled"),
            (self.selected_unlabeled, self.unlabeled_entropies, "unlabeled"),
        ):
            if indices.size and (indices.min() < 0 or indices.max() >= entropies.shape[0]):
                raise ShapeError(f"{side} selection indexes outside its source rows")
            if np.any(entropies[indices] > self.epsilon_p):
                raise ConfigError(f"{side} selection admits rows above epsilon_p")

    @property
    def counts(self) -> Tuple[int, int]:
        return int(self.selected_labeled.size), int(self.selected_unlabeled.size)

    @property
    def empty(self) -> bool:
        return self.selected_labeled.size == 0 or self.selected_unlabeled.size == 0
