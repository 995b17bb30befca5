"""
Contrastive Loss Service - weighted semi-supervised contrastive loss

Anchors range over every row of the batch (labeled, both strong views and
prototypes). An anchor with no same-label partner is dropped together with
its weight in the normalizer.
"""

from typing import List, Literal
import numpy as np

from app.core import autograd as ag
from app.core.autograd import Tensor
from app.core.exceptions import DomainError, EmptyPositivesError, ShapeError
from app.models.batch import ContrastiveBatch, PseudoLabelAssignment
from app.schemas.config import LabelWeights
from app.services.pseudo_labeling import label_arrays


UNIT_NORM_TOLERANCE = 1e-9

Placement = Literal["standard", "printed"]


def positive_mask(labels: np.ndarray) -> np.ndarray:
    """P(i): rows sharing row i's label, i itself excluded"""
    mask = labels[:, None] == labels[None, :]
    np.fill_diagonal(mask, False)
    return mask


def l_ssc(batch: ContrastiveBatch, placement: Placement = "standard") -> Tensor:
    """
    Weighted supervised contrastive loss.

    "standard" scales every similarity by 1/T; "printed" divides numerator
    and denominator by T, which cancels, so it equals the standard form at
    T = 1.
    """

    n = batch.size
    positives = positive_mask(batch.labels)
    counts = positives.sum(axis=1)
    anchors = counts > 0
    if not np.any(anchors):
        raise EmptyPositivesError(f"no anchor among {n} rows has a positive")

    normalizer = float(np.sum(batch.weights[anchors]))
    if normalizer <= 0:
        raise EmptyPositivesError("every anchor with positives has zero weight")

    # Step 1: similarity logits
    z = batch.embeddings
    scale = 1.0 / batch.temperature if placement == "standard" else 1.0
    logits = ag.matmul(z, ag.transpose(z)) * scale

    # Step 2: log of the denominator over j != i
    others = ~np.eye(n, dtype=bool)
    log_denominator = ag.logsumexp(logits, mask=others)

    # Step 3: weighted mean of log-probabilities over positives
    coefficients = np.zeros((n, n))
    coefficients[anchors] = positives[anchors] * (batch.weights[anchors] / counts[anchors])[:, None]
    row_totals = coefficients.sum(axis=1, keepdims=True)

    attraction = ag.sum(logits * coefficients)
    repulsion = ag.sum(log_denominator * row_totals)
    return (repulsion - attraction) * (1.0 / normalizer)


def build_batch(
    z_x: Tensor,
    y_x: np.ndarray,
    z_s1: Tensor,
    z_s2: Tensor,
    assignments: List[PseudoLabelAssignment],
    prototypes: Tensor,
    weights: LabelWeights,
    temperature: float,
) -> ContrastiveBatch:
    """Rows in order labeled, strong view 1, strong view 2, prototypes"""

    y_x = np.asarray(y_x, dtype=np.int64)
    b, mu_b, k = z_x.shape[0], len(assignments), prototypes.shape[0]
    if y_x.shape != (b,):
        raise ShapeError(f"{b} labeled embeddings but {y_x.shape[0]} labels")
    if z_s1.shape[0] != mu_b or z_s2.shape[0] != mu_b:
        raise ShapeError(
            f"strong views have {z_s1.shape[0]} and {z_s2.shape[0]} rows for {mu_b} assignments"
        )
    if np.any(y_x < 0) or np.any(y_x >= k):
        raise ShapeError(f"labeled rows must carry labels in [0, {k})")

    u_labels, u_weights = label_arrays(assignments)
    batch = ContrastiveBatch(
        embeddings=ag.concat_rows([z_x, z_s1, z_s2, prototypes]),
        labels=np.concatenate([y_x, u_labels, u_labels, np.arange(k)]),
        weights=np.concatenate([
            np.full(b, weights.labeled),
            u_weights,
            u_weights,
            np.full(k, weights.prototype),
        ]),
        temperature=temperature,
        sections=(b, mu_b, mu_b, k),
    )
    error = batch.unit_norm_error()
    if error > UNIT_NORM_TOLERANCE:
        raise DomainError(f"contrastive rows must be unit-norm (max deviation {error:.3g})")
    return batch
