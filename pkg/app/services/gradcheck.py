"""
Gradient Check Service - analytic gradients against central finite differences
"""

import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence
import numpy as np
from loguru import logger

from app.core import autograd as ag
from app.core.autograd import GradientTape, Tensor
from app.core.config import settings
from app.models.encoder import EncoderParams, Prototypes, embed, init_model
from app.schemas.config import AugmentConfig, KernelConfig, TrainConfig
from app.schemas.results import GradCheckReport, GradCheckTerm
from app.services.trainer import Objective, StepPlan, compute_objective, model_arrays, prepare_step


# Relative errors use max(|a|, |n|, floor) in the denominator
ERROR_FLOOR = 1e-8


def central_difference(
    fn: Callable[[], float],
    array: np.ndarray,
    h: float = 1e-5,
) -> np.ndarray:
    """
    d fn / d array by (f(x + h) - f(x - h)) / 2h, one entry at a time.

    array is perturbed in place and restored exactly afterwards.
    """
    out = np.zeros_like(array)
    flat = array.reshape(-1)
    grad_flat = out.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + h
        plus = fn()
        flat[i] = original - h
        minus = fn()
        flat[i] = original
        grad_flat[i] = (plus - minus) / (2.0 * h)
    return out


def relative_error(analytic: Sequence[np.ndarray], numeric: Sequence[np.ndarray]) -> float:
    """Norm-wise relative disagreement over all parameters together"""
    a = np.concatenate([g.reshape(-1) for g in analytic])
    n = np.concatenate([g.reshape(-1) for g in numeric])
    scale = max(np.linalg.norm(a), np.linalg.norm(n), ERROR_FLOOR)
    return float(np.linalg.norm(a - n) / scale)


@dataclass(frozen=True)
class TermSpec:
    """A scalar checked by the suite and an optional hook on its analytic gradient"""

    name: str
    selector: Callable[[Dict[str, Tensor]], Tensor]
    transform_gradient: Optional[Callable[[List[np.ndarray]], List[np.ndarray]]] = None


GRADIENT_TERMS: List[TermSpec] = [
    TermSpec("l_ssc", lambda values: values["l_ssc"]),
    TermSpec("l_mmd", lambda values: values["l_mmd"]),
    TermSpec("l_total", lambda values: values["l_total"]),
    TermSpec("embed", lambda values: values["embed"]),
]


def gradcheck_config() -> TrainConfig:
    """Tiny instance: d=2, widths [2, 8, 4], K=3, B=4, mu=2, tanh"""
    return TrainConfig(
        batch_size=4,
        mu=2,
        epochs=1,
        hidden_widths=[8, 4],
        embed_dim=4,
        activation="tanh",
        lambda_mmd=1.0,
        epsilon_p=math.log(3),
        kernel=KernelConfig(bandwidth_mode="median_heuristic"),
        augment=AugmentConfig(),
    )


def _values(params: EncoderParams, prototypes: Prototypes, plan: StepPlan, config: TrainConfig, tape=None) -> Dict[str, Tensor]:
    objective: Objective = compute_objective(params, prototypes, plan, config, tape)
    return {
        "l_total": objective.l_total,
        "l_ssc": objective.l_ssc,
        "l_mmd": objective.l_mmd,
        "embed": ag.sum(embed(params, plan.x, tape)),
    }


def check_seed(
    seed: int,
    terms: Sequence[TermSpec],
    h: float,
    config: Optional[TrainConfig] = None,
) -> Dict[str, float]:
    """Relative error of every term on one random tiny instance"""

    config = config or gradcheck_config()
    k, d = 3, 2
    rng = np.random.default_rng(seed)
    params, prototypes = init_model(seed, [d] + config.hidden_widths, config.embed_dim, k, config.activation)

    x = rng.normal(size=(config.batch_size, d)) * 2.0
    y_x = np.arange(config.batch_size) % k
    u = rng.normal(size=(config.unlabeled_batch_size, d)) * 2.0
    plan = prepare_step(params, prototypes, x, y_x, u, config, rng)

    arrays = model_arrays(params, prototypes)
    errors = {}
    for term in terms:
        tape = GradientTape()
        analytic = tape.gradient(term.selector(_values(params, prototypes, plan, config, tape)), arrays)
        if term.transform_gradient is not None:
            analytic = term.transform_gradient(analytic)

        def evaluate() -> float:
            return term.selector(_values(params, prototypes, plan, config)).item()

        numeric = [central_difference(evaluate, array, h) for array in arrays]
        errors[term.name] = relative_error(analytic, numeric)
    return errors


class GradCheckService:
    """Runs the finite-difference suite over several seeds"""

    def run(
        self,
        seeds: Optional[int] = None,
        tolerance: Optional[float] = None,
        step: Optional[float] = None,
        terms: Optional[Sequence[TermSpec]] = None,
    ) -> GradCheckReport:
        """
        Compare tape gradients with central differences on tiny random instances

        Args:
            seeds: Number of instances, seeded 0..seeds-1 (settings default)
            tolerance: Largest relative error that still passes
            step: Finite-difference step h
            terms: Loss terms to check, all of them by default

        Returns:
            Worst relative error and its seed for every term
        """

        seeds = seeds if seeds is not None else settings.GRADCHECK_SEEDS
        tolerance = tolerance if tolerance is not None else settings.GRADCHECK_TOLERANCE
        step = step if step is not None else settings.GRADCHECK_STEP
        terms = list(terms) if terms is not None else GRADIENT_TERMS

        worst = {term.name: (0.0, 0) for term in terms}
        for seed in range(seeds):
            for name, error in check_seed(seed, terms, step).items():
                if error > worst[name][0]:
                    worst[name] = (error, seed)

        report = GradCheckReport(
            seeds=seeds,
            tolerance=tolerance,
            step=step,
            terms=[
                GradCheckTerm(term=name, worst_relative_error=err, worst_seed=seed, passed=err < tolerance)
                for name, (err, seed) in worst.items()
            ],
        )
        for term in report.terms:
            log = logger.info if term.passed else logger.error
            log(f"gradcheck {term.term}: worst relative error {term.worst_relative_error:.3e} (seed {term.worst_seed})")
        return report


# Singleton instance
gradcheck_service = GradCheckService()
