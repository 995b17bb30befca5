"""
Augmentation Service - weak and strong stochastic views of feature rows
"""

import math
from typing import Sequence, Tuple, Union
import numpy as np

from app.core.autograd import as_matrix
from app.core.exceptions import ShapeError
from app.schemas.config import AugmentPolicy


RngStream = Union[np.random.Generator, Sequence[np.random.Generator]]


def _row_generators(rng: RngStream, rows: int):
    if isinstance(rng, np.random.Generator):
        return [rng] * rows
    streams = list(rng)
    if len(streams) != rows:
        raise ShapeError(f"{len(streams)} row generators for {rows} rows")
    return streams


def _transform_row(policy: AugmentPolicy, row: np.ndarray, rng: np.random.Generator, jitter: float) -> np.ndarray:
    # Draw order is fixed: scale, rotation, jitter, dropout
    out = row * rng.uniform(policy.scale_range[0], policy.scale_range[1])

    if policy.rotation_max > 0 and out.shape[0] == 2:
        angle = rng.uniform(-policy.rotation_max, policy.rotation_max)
        c, s = math.cos(angle), math.sin(angle)
        out = np.array([c * out[0] - s * out[1], s * out[0] + c * out[1]])

    if jitter > 0:
        out = out + rng.normal(0.0, jitter, size=out.shape[0])

    if policy.dropout_prob > 0:
        keep = rng.uniform(size=out.shape[0]) >= policy.dropout_prob
        out = np.where(keep, out, 0.0)

    return out


def apply(
    policy: AugmentPolicy,
    batch: np.ndarray,
    rng: RngStream,
    feature_scale: float = 1.0,
) -> np.ndarray:
    """
    Transform each row independently.

    rng is either one Generator consumed row by row, or one Generator per
    row; with per-row generators, row i's result depends only on row i and
    its own stream.
    """

    batch = as_matrix(batch, name="augmentation batch")
    if batch.shape[0] == 0:
        raise ShapeError("cannot augment an empty batch")

    jitter = policy.jitter_sigma * feature_scale
    streams = _row_generators(rng, batch.shape[0])
    return np.stack([_transform_row(policy, row, gen, jitter) for row, gen in zip(batch, streams)])


def two_strong_views(
    policy: AugmentPolicy,
    batch: np.ndarray,
    rng: RngStream,
    feature_scale: float = 1.0,
) -> Tuple[np.ndarray, np.ndarray]:
    """Two independent strong applications; row i of both views comes from source row i"""
    first = apply(policy, batch, rng, feature_scale)
    second = apply(policy, batch, rng, feature_scale)
    return first, second


def row_generators(seed_sequence: np.random.SeedSequence, rows: int):
    """Independent per-row generators spawned from one seed sequence"""
    return [np.random.default_rng(child) for child in seed_sequence.spawn(rows)]
