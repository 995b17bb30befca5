"""
Pseudo-Labeling Service - prototype similarities, confidence gating and row weights
"""

from typing import List, Tuple, Union
import numpy as np

from app.core import autograd as ag
from app.core.exceptions import ConfigError, DomainError, ShapeError
from app.models.batch import PseudoLabelAssignment
from app.models.encoder import Prototypes
from app.schemas.config import LabelWeights


UNIT_NORM_TOLERANCE = 1e-9

PrototypeLike = Union[Prototypes, np.ndarray, ag.Tensor]


def _prototype_array(prototypes: PrototypeLike) -> np.ndarray:
    if isinstance(prototypes, Prototypes):
        return prototypes.vectors
    if isinstance(prototypes, ag.Tensor):
        return prototypes.value
    return np.asarray(prototypes, dtype=np.float64)


def _check_unit_rows(rows: np.ndarray, name: str) -> None:
    error = np.max(np.abs(np.linalg.norm(rows, axis=1) - 1.0)) if rows.size else 0.0
    if error > UNIT_NORM_TOLERANCE:
        raise DomainError(f"{name} rows must be unit-norm (max deviation {error:.3g})")


def similarities(prototypes: PrototypeLike, embeddings: np.ndarray) -> np.ndarray:
    """Cosine similarity of every embedding row to every prototype: (rows, K)"""
    protos = _prototype_array(prototypes)
    embeddings = np.asarray(embeddings, dtype=np.float64)
    if embeddings.ndim == 1:
        embeddings = embeddings[None, :]
    if embeddings.shape[1] != protos.shape[1]:
        raise ShapeError(f"embedding width {embeddings.shape[1]} != prototype width {protos.shape[1]}")
    return embeddings @ protos.T


def class_probs(prototypes: PrototypeLike, z_w: np.ndarray, t_prime: float) -> np.ndarray:
    """softmax(Z_c . z_w / T'); a matrix of embeddings gives one row per embedding"""
    if not t_prime > 0:
        raise ConfigError(f"pseudo-labeling temperature must be positive, got {t_prime}")
    z_w = np.asarray(z_w, dtype=np.float64)
    probs = ag.softmax(ag.Tensor(similarities(prototypes, z_w) / t_prime), axis=-1).value
    return probs[0] if z_w.ndim == 1 else probs


def assign(
    prototypes: PrototypeLike,
    z_w: np.ndarray,
    t_prime: float,
    tau: float,
    weights: LabelWeights,
) -> List[PseudoLabelAssignment]:
    """
    Label each weak-view embedding.

    Confident rows (max prob > tau) take the prototype class q; the rest get
    the unique label K + i, i being the row position in the mini-batch.
    q is the argmax of the raw similarities, lowest class index on ties.
    """

    if not 0 < tau < 1:
        raise ConfigError(f"tau must lie in (0, 1), got {tau}")

    protos = _prototype_array(prototypes)
    z_w = np.asarray(z_w, dtype=np.float64)
    if z_w.ndim != 2:
        raise ShapeError(f"weak-view embeddings must be 2-D, got shape {z_w.shape}")
    _check_unit_rows(z_w, "weak-view embedding")

    k = protos.shape[0]
    sims = similarities(protos, z_w)
    probs = class_probs(protos, z_w, t_prime)

    assignments = []
    for i in range(z_w.shape[0]):
        q = int(np.argmax(sims[i]))
        confidence = float(probs[i].max())
        confident = confidence > tau
        assignments.append(
            PseudoLabelAssignment(
                index=i,
                probs=probs[i],
                confidence=confidence,
                label=q if confident else k + i,
                confident=confident,
                weight=weights.confident if confident else weights.unconfident,
            )
        )
    return assignments


def label_arrays(assignments: List[PseudoLabelAssignment]) -> Tuple[np.ndarray, np.ndarray]:
    """Labels and weights of a batch of assignments, in row order"""
    labels = np.array([a.label for a in assignments], dtype=np.int64)
    weights = np.array([a.weight for a in assignments], dtype=np.float64)
    return labels, weights


def diagnostics(assignments: List[PseudoLabelAssignment]) -> Tuple[int, float]:
    """Confident count and mean confidence"""
    if not assignments:
        return 0, 0.0
    n_confident = sum(1 for a in assignments if a.confident)
    mean_confidence = float(np.mean([a.confidence for a in assignments]))
    return n_confident, mean_confidence
