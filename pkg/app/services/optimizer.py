"""
Optimizer Service - SGD with momentum under a truncated cosine schedule
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence
import numpy as np

from app.core.exceptions import DomainError, ShapeError


def lr_at(eta0: float, t: float, total: float) -> float:
    """
    eta_t = eta0 * cos(7 pi t / (16 T)).

    The 7/16 factor keeps the rate positive at t = T.
    """
    if total < 1:
        raise DomainError(f"total epochs must be >= 1, got {total}")
    if not 0 <= t <= total:
        raise DomainError(f"t={t} outside [0, {total}]")
    return eta0 * math.cos(7.0 * math.pi * t / (16.0 * total))


@dataclass
class OptimizerState:
    """Velocity per parameter plus progress counters"""

    velocities: List[np.ndarray]
    step: int = 0
    epoch: int = 0

    @classmethod
    def zeros_like(cls, parameters: Sequence[np.ndarray]) -> "OptimizerState":
        return cls(velocities=[np.zeros_like(p) for p in parameters])

    def check(self, parameters: Sequence[np.ndarray]) -> None:
        if len(parameters) != len(self.velocities):
            raise ShapeError(f"{len(self.velocities)} velocities for {len(parameters)} parameters")
        for i, (p, v) in enumerate(zip(parameters, self.velocities)):
            if p.shape != v.shape:
                raise ShapeError(f"velocity {i} has shape {v.shape}, parameter has {p.shape}")


@dataclass
class SGDMomentum:
    """
    v <- m v + g ; theta <- theta - lr v, updating parameter arrays in place.

    With clip set, gradients are rescaled so their global norm is at most clip.
    """

    momentum: float = 0.9
    clip: Optional[float] = None
    last_grad_norm: float = field(default=0.0, init=False)

    def step(
        self,
        parameters: Sequence[np.ndarray],
        gradients: Sequence[np.ndarray],
        state: OptimizerState,
        lr: float,
    ) -> None:
        state.check(parameters)
        if len(gradients) != len(parameters):
            raise ShapeError(f"{len(gradients)} gradients for {len(parameters)} parameters")

        norm = math.sqrt(sum(float(np.sum(g * g)) for g in gradients))
        self.last_grad_norm = norm
        factor = self.clip / norm if self.clip is not None and norm > self.clip else 1.0

        for param, grad, velocity in zip(parameters, gradients, state.velocities):
            if grad.shape != param.shape:
                raise ShapeError(f"gradient shape {grad.shape} != parameter shape {param.shape}")
            velocity *= self.momentum
            velocity += factor * grad
            param -= lr * velocity

        state.step += 1

    @staticmethod
    def velocity_map(names: Sequence[str], state: OptimizerState) -> Dict[str, np.ndarray]:
        return {f"velocity.{name}": v for name, v in zip(names, state.velocities)}
