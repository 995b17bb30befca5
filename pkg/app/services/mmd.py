"""
MMD Service - Gaussian-kernel distribution matching between labeled and unlabeled features
"""

import math
from typing import Literal, Optional, Union
import numpy as np
from loguru import logger

from app.core import autograd as ag
from app.core.autograd import Tensor
from app.core.exceptions import ConfigError, ShapeError
from app.models.batch import MmdSelection
from app.schemas.config import KernelConfig
from app.services.pseudo_labeling import PrototypeLike, _prototype_array


def gaussian_kernel(a: np.ndarray, b: np.ndarray, sigma: float) -> float:
    """k(a, b) = exp(-||a - b||^2 / (2 sigma^2))"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"kernel arguments differ in shape: {a.shape} vs {b.shape}")
    if not sigma > 0:
        raise ConfigError(f"kernel bandwidth must be positive, got {sigma}")
    diff = a - b
    return math.exp(-float(diff @ diff) / (2.0 * sigma * sigma))


def kernel_matrix(a: Tensor, b: Tensor, sigma: float) -> Tensor:
    return ag.exp(ag.pairwise_sq_dists(a, b) * (-1.0 / (2.0 * sigma * sigma)))


def median_bandwidth(points: np.ndarray) -> float:
    """
    Median pairwise distance over the rows of points, coincident pairs
    included. 0.0 signals a degenerate bandwidth.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        return 0.0
    diff = points[:, None, :] - points[None, :, :]
    dists = np.sqrt(np.sum(diff * diff, axis=-1))[np.triu_indices(n, k=1)]
    return float(np.median(dists))


def resolve_bandwidth(kernel: KernelConfig, f_l: np.ndarray, f_u: np.ndarray) -> float:
    """sigma for one estimate: fixed, or median heuristic over the pooled rows"""
    if kernel.bandwidth_mode == "fixed":
        return float(kernel.sigma)
    pooled = np.concatenate([np.asarray(f_l, dtype=np.float64), np.asarray(f_u, dtype=np.float64)], axis=0)
    return median_bandwidth(pooled)


def select_for_mmd(
    prototypes: PrototypeLike,
    z_l: np.ndarray,
    z_u: np.ndarray,
    epsilon_p: float,
    temperature: Optional[float] = None,
) -> MmdSelection:
    """
    Keep rows whose prototype assignment entropy is at most epsilon_p.

    Assignment probabilities are softmax(Z_c . z), divided by temperature
    when one is given.
    """

    if epsilon_p < 0:
        raise ConfigError(f"epsilon_p must be non-negative, got {epsilon_p}")
    protos = _prototype_array(prototypes)
    divisor = 1.0 if temperature is None else temperature

    def _entropies(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=np.float64)
        if z.shape[0] == 0:
            return np.zeros(0)
        if z.ndim != 2 or z.shape[1] != protos.shape[1]:
            raise ShapeError(f"embeddings of shape {z.shape} do not match prototypes {protos.shape}")
        probs = ag.softmax(ag.Tensor(z @ protos.T / divisor), axis=-1).value
        return ag.row_entropies(probs)

    h_l, h_u = _entropies(z_l), _entropies(z_u)
    return MmdSelection(
        selected_labeled=np.flatnonzero(h_l <= epsilon_p),
        selected_unlabeled=np.flatnonzero(h_u <= epsilon_p),
        epsilon_p=epsilon_p,
        labeled_entropies=h_l,
        unlabeled_entropies=h_u,
    )


def l_mmd(
    f_l: Union[Tensor, np.ndarray],
    f_u: Union[Tensor, np.ndarray],
    kernel: KernelConfig,
    sigma: Optional[float] = None,
) -> Tensor:
    """
    Biased (V-statistic) squared MMD.

    sigma overrides the kernel config (a bandwidth frozen by the caller);
    it never carries gradient. An empty side or a degenerate bandwidth
    gives the constant 0.
    """

    f_l, f_u = ag.as_tensor(f_l), ag.as_tensor(f_u)
    if f_l.ndim != 2 or f_u.ndim != 2:
        raise ShapeError(f"MMD inputs must be 2-D, got {f_l.shape} and {f_u.shape}")
    if f_l.shape[0] == 0 or f_u.shape[0] == 0:
        return Tensor(0.0)
    if f_l.shape[1] != f_u.shape[1]:
        raise ShapeError(f"MMD feature widths differ: {f_l.shape[1]} vs {f_u.shape[1]}")

    if sigma is None:
        sigma = resolve_bandwidth(kernel, f_l.value, f_u.value)
    if not sigma > 0:
        logger.debug("MMD bandwidth degenerate, returning 0")
        return Tensor(0.0)

    k_ll = ag.mean(kernel_matrix(f_l, f_l, sigma))
    k_lu = ag.mean(kernel_matrix(f_l, f_u, sigma))
    k_uu = ag.mean(kernel_matrix(f_u, f_u, sigma))
    return k_ll - 2.0 * k_lu + k_uu


def mmd_between(
    a: np.ndarray,
    b: np.ndarray,
    sigma: Union[float, Literal["median"]] = "median",
) -> float:
    """Plain MMD value of two feature sets"""
    if sigma == "median":
        kernel = KernelConfig(bandwidth_mode="median_heuristic")
    else:
        kernel = KernelConfig(bandwidth_mode="fixed", sigma=float(sigma))
    return l_mmd(ag.as_matrix(a, "a"), ag.as_matrix(b, "b"), kernel).item()
