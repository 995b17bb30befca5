"""
Trainer Service - total objective, SGD-momentum steps and the epoch loop

A step runs in two phases. prepare_step makes every discrete decision
(augmented views, pseudo-labels, MMD selection, kernel bandwidth) without a
tape; compute_objective then evaluates the differentiable objective for that
frozen plan. The gradient check reuses the same split.
"""

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union
import numpy as np
from loguru import logger

from app.core import autograd as ag
from app.core.autograd import GradientTape, Tensor
from app.core.config import settings
from app.core.exceptions import CheckpointError, ConfigError, DomainError, EmptyPositivesError, ShapeError
from app.models.batch import MmdSelection, PseudoLabelAssignment
from app.models.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from app.models.dataset import TrainingView
from app.models.encoder import EncoderParams, Prototypes, embed, init_model, penultimate, prototype_matrix
from app.schemas.config import TrainConfig
from app.schemas.results import EpochSummary, LossBreakdown, TrainResult
from app.services import augmentation, contrastive, mmd, pseudo_labeling
from app.services.optimizer import OptimizerState, SGDMomentum, lr_at


METRICS_FILE = "metrics.csv"
CHECKPOINT_FILE = "checkpoint.bin"
CONFIG_FILE = "config.json"

METRICS_COLUMNS = [
    "kind", "step", "epoch", "lr", "l_ssc", "l_mmd", "l_total",
    "n_confident", "mean_confidence", "n_mmd_selected_l", "n_mmd_selected_u",
    "mmd_sigma", "skipped", "test_accuracy",
]

SIGMA_KEY = "mmd.sigma"


@dataclass(frozen=True)
class StepPlan:
    """Inputs and discrete decisions of one step, fixed before differentiation"""

    x: np.ndarray
    y_x: np.ndarray
    x_clean: np.ndarray
    u_weak: np.ndarray
    u_strong1: np.ndarray
    u_strong2: np.ndarray
    assignments: List[PseudoLabelAssignment]
    selection: Optional[MmdSelection]
    sigma: Optional[float]

    @property
    def mmd_active(self) -> bool:
        return self.selection is not None and not self.selection.empty and bool(self.sigma)


class Objective(NamedTuple):
    l_total: Tensor
    l_ssc: Tensor
    l_mmd: Tensor


def model_arrays(params: EncoderParams, prototypes: Prototypes) -> List[np.ndarray]:
    return params.arrays() + [prototypes.vectors]


def model_names(params: EncoderParams) -> List[str]:
    return params.names() + ["prototypes"]


def prepare_step(
    params: EncoderParams,
    prototypes: Prototypes,
    x: np.ndarray,
    y_x: np.ndarray,
    u: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    feature_scale: float = 1.0,
    frozen_sigma: Optional[float] = None,
) -> StepPlan:
    aug = config.augment

    # Step 1: views
    u_weak = augmentation.apply(aug.weak, u, rng, feature_scale)
    u_strong1, u_strong2 = augmentation.two_strong_views(aug.strong, u, rng, feature_scale)
    x_in = augmentation.apply(aug.weak, x, rng, feature_scale) if aug.augment_labeled else np.asarray(x, dtype=np.float64)

    # Step 2: pseudo-labels from the weak view
    z_w = embed(params, u_weak).value
    assignments = pseudo_labeling.assign(
        prototypes, z_w, config.pseudo_temperature, config.tau, config.lambda_weights
    )

    # Step 3: entropy-gated MMD selection and bandwidth
    selection, sigma = None, None
    if config.lambda_mmd > 0:
        z_l = embed(params, x).value
        selection = mmd.select_for_mmd(
            prototypes,
            z_l,
            z_w,
            config.resolved_epsilon_p(prototypes.class_count),
            temperature=config.pseudo_temperature if config.selection_temperature == "pseudo" else None,
        )
        if not selection.empty:
            kernel = config.kernel
            if kernel.bandwidth_mode == "median_heuristic" and not kernel.recompute_each_step and frozen_sigma:
                sigma = frozen_sigma
            else:
                f_l = penultimate(params, np.asarray(x)[selection.selected_labeled]).value
                f_u = penultimate(params, u_weak[selection.selected_unlabeled]).value
                sigma = mmd.resolve_bandwidth(kernel, f_l, f_u)

    return StepPlan(
        x=x_in,
        y_x=np.asarray(y_x, dtype=np.int64),
        x_clean=np.asarray(x, dtype=np.float64),
        u_weak=u_weak,
        u_strong1=u_strong1,
        u_strong2=u_strong2,
        assignments=assignments,
        selection=selection,
        sigma=sigma,
    )


def compute_objective(
    params: EncoderParams,
    prototypes: Prototypes,
    plan: StepPlan,
    config: TrainConfig,
    tape: Optional[GradientTape] = None,
) -> Objective:
    """L_total = L_ssc + lambda_mmd * L_mmd for a frozen plan"""

    batch = contrastive.build_batch(
        z_x=embed(params, plan.x, tape),
        y_x=plan.y_x,
        z_s1=embed(params, plan.u_strong1, tape),
        z_s2=embed(params, plan.u_strong2, tape),
        assignments=plan.assignments,
        prototypes=prototype_matrix(prototypes, tape),
        weights=config.lambda_weights,
        temperature=config.temperature,
    )
    l_ssc = contrastive.l_ssc(batch, config.temperature_placement)

    if config.lambda_mmd == 0:
        return Objective(l_ssc, l_ssc, Tensor(0.0))

    l_mmd = Tensor(0.0)
    if plan.mmd_active:
        f_l = penultimate(params, plan.x_clean[plan.selection.selected_labeled], tape)
        f_u = penultimate(params, plan.u_weak[plan.selection.selected_unlabeled], tape)
        l_mmd = mmd.l_mmd(f_l, f_u, config.kernel, sigma=plan.sigma)
    return Objective(l_ssc + l_mmd * config.lambda_mmd, l_ssc, l_mmd)


def train_step(
    params: EncoderParams,
    prototypes: Prototypes,
    state: OptimizerState,
    x: np.ndarray,
    y_x: np.ndarray,
    u: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    *,
    lr: Optional[float] = None,
    optimizer: Optional[SGDMomentum] = None,
    feature_scale: float = 1.0,
    frozen_sigma: Optional[float] = None,
) -> LossBreakdown:
    """One optimizer step on L_total; parameters and state are updated in place"""

    if lr is None:
        lr = lr_at(config.eta0, state.epoch, config.epochs)
    optimizer = optimizer or SGDMomentum(momentum=config.momentum, clip=config.grad_clip)

    plan = prepare_step(params, prototypes, x, y_x, u, config, rng, feature_scale, frozen_sigma)
    n_confident, mean_confidence = pseudo_labeling.diagnostics(plan.assignments)
    n_sel_l, n_sel_u = plan.selection.counts if plan.selection is not None else (0, 0)
    common = dict(
        step=state.step,
        epoch=state.epoch,
        lr=lr,
        lambda_mmd=config.lambda_mmd,
        n_confident=n_confident,
        mean_confidence=mean_confidence,
        n_mmd_selected_l=n_sel_l,
        n_mmd_selected_u=n_sel_u,
        mmd_sigma=plan.sigma if plan.mmd_active else None,
    )

    tape = GradientTape()
    try:
        objective = compute_objective(params, prototypes, plan, config, tape)
    except EmptyPositivesError as exc:
        logger.warning(f"Step {state.step} skipped: {exc}")
        state.step += 1
        return LossBreakdown(l_ssc=0.0, l_mmd=0.0, l_total=0.0, skipped=True, **common)

    arrays = model_arrays(params, prototypes)
    gradients = tape.gradient(objective.l_total, arrays)
    optimizer.step(arrays, gradients, state, lr)
    prototypes.renormalize()

    breakdown = LossBreakdown(
        l_ssc=objective.l_ssc.item(),
        l_mmd=objective.l_mmd.item(),
        l_total=objective.l_total.item(),
        **common,
    )
    logger.debug(
        f"step {breakdown.step} lr={lr:.6f} l_ssc={breakdown.l_ssc:.5f} l_mmd={breakdown.l_mmd:.5f} "
        f"confident={n_confident}/{len(plan.assignments)} selected={n_sel_l}/{n_sel_u}"
    )
    return breakdown


def predict(params: EncoderParams, prototypes: Prototypes, features: np.ndarray) -> np.ndarray:
    """Nearest prototype (argmax of prototype probabilities) per row"""
    z = embed(params, features).value
    return np.argmax(pseudo_labeling.similarities(prototypes, z), axis=1)


def evaluate(params: EncoderParams, prototypes: Prototypes, features: np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose nearest prototype matches the label"""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise DomainError("cannot evaluate on an empty set")
    if np.asarray(features).shape[0] != labels.size:
        raise ShapeError(f"{np.asarray(features).shape[0]} rows for {labels.size} labels")
    predictions = predict(params, prototypes, features)
    if np.unique(labels).size > 1 and np.unique(predictions).size == 1:
        logger.warning(f"Every row is predicted as class {int(predictions[0])}")
    return float(np.mean(predictions == labels))


class _IndexStream:
    """Endless shuffled index batches; reshuffles on wrap so every batch is full"""

    def __init__(self, n: int, rng: np.random.Generator):
        self.n = n
        self.rng = rng
        self._order = rng.permutation(n)
        self._pos = 0

    def take(self, size: int) -> np.ndarray:
        out = []
        remaining = size
        while remaining:
            if self._pos == self.n:
                self._order = self.rng.permutation(self.n)
                self._pos = 0
            chunk = self._order[self._pos:self._pos + remaining]
            self._pos += chunk.size
            remaining -= chunk.size
            out.append(chunk)
        return np.concatenate(out)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


class TrainerService:
    """Runs the epoch loop and owns the run directory"""

    def default_run_dir(self, config: TrainConfig) -> Path:
        return Path(settings.RUNS_DIR) / f"seed{config.seed}-lmmd{config.lambda_mmd:g}"

    def steps_per_epoch(self, config: TrainConfig, view: TrainingView) -> int:
        return math.ceil(view.unlabeled_features.shape[0] / config.unlabeled_batch_size)

    def _epoch_streams(self, seed: int, epoch: int):
        labeled, unlabeled, augment = np.random.SeedSequence([seed, epoch]).spawn(3)
        return np.random.default_rng(labeled), np.random.default_rng(unlabeled), np.random.default_rng(augment)

    def _checkpoint(
        self,
        params: EncoderParams,
        prototypes: Prototypes,
        state: OptimizerState,
        frozen_sigma: Optional[float],
        config: TrainConfig,
    ) -> Checkpoint:
        names = model_names(params)
        arrays: Dict[str, np.ndarray] = dict(zip(names, model_arrays(params, prototypes)))
        arrays.update(SGDMomentum.velocity_map(names, state))
        if frozen_sigma is not None:
            arrays[SIGMA_KEY] = np.array([frozen_sigma])
        return Checkpoint(arrays=arrays, step=state.step, epoch=state.epoch, config=config.model_dump(mode="json"))

    def restore(
        self,
        checkpoint: Checkpoint,
        params: EncoderParams,
        prototypes: Prototypes,
        state: OptimizerState,
    ) -> Optional[float]:
        """Copy checkpoint arrays into freshly initialised model and state"""
        names = model_names(params)
        targets = model_arrays(params, prototypes)
        for name, target, velocity in zip(names, targets, state.velocities):
            for key, dest in ((name, target), (f"velocity.{name}", velocity)):
                if key not in checkpoint.arrays:
                    raise CheckpointError(f"checkpoint has no array '{key}'")
                source = checkpoint.arrays[key]
                if source.shape != dest.shape:
                    raise CheckpointError(f"'{key}' has shape {source.shape}, model expects {dest.shape}")
                dest[...] = source
        state.step = checkpoint.step
        state.epoch = checkpoint.epoch
        sigma = checkpoint.arrays.get(SIGMA_KEY)
        return float(sigma[0]) if sigma is not None else None

    def load_model(self, run_dir: Union[str, Path], view_dim: int) -> Tuple[EncoderParams, Prototypes, TrainConfig, Checkpoint]:
        """Model and config stored in a run directory"""
        checkpoint = load_checkpoint(Path(run_dir) / CHECKPOINT_FILE)
        if checkpoint.config is None:
            raise CheckpointError(f"{run_dir}: checkpoint has no config sidecar")
        config = TrainConfig.model_validate(checkpoint.config)
        k = checkpoint.arrays.get("prototypes")
        if k is None:
            raise CheckpointError(f"{run_dir}: checkpoint has no prototypes")
        params, prototypes = init_model(
            config.seed, [view_dim] + config.hidden_widths, config.embed_dim, k.shape[0], config.activation
        )
        self.restore(checkpoint, params, prototypes, OptimizerState.zeros_like(model_arrays(params, prototypes)))
        return params, prototypes, config, checkpoint

    def _open_metrics(self, path: Path, resume_epoch: Optional[int]):
        """Fresh metrics file, or the rows of completed epochs when resuming"""
        kept: List[List[str]] = []
        if resume_epoch is not None and path.exists():
            with open(path, newline="", encoding="utf-8") as handle:
                rows = list(csv.reader(handle))
            kept = [row for row in rows[1:] if row and int(row[2]) < resume_epoch]
        handle = open(path, "w", newline="", encoding="utf-8")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(METRICS_COLUMNS)
        writer.writerows(kept)
        return handle, writer

    def train(
        self,
        config: TrainConfig,
        view: TrainingView,
        run_dir: Optional[Union[str, Path]] = None,
        resume: bool = False,
        stop_after_epochs: Optional[int] = None,
    ) -> TrainResult:
        """
        Train on a TrainingView and persist config, metrics and checkpoint.

        Args:
            config: Validated training configuration
            view: Labeled, unlabeled and test rows; hidden labels are not part of it
            run_dir: Output directory, defaults to a seed-named folder under RUNS_DIR
            resume: Continue from the checkpoint in run_dir
            stop_after_epochs: End the run early, leaving a resumable checkpoint

        Returns:
            Per-epoch history, final test accuracy and output paths
        """

        if not isinstance(view, TrainingView):
            raise TypeError(f"train() takes a TrainingView, got {type(view).__name__}")
        if view.unlabeled_features.shape[0] == 0 or view.labeled_features.shape[0] == 0:
            raise ConfigError("training needs non-empty labeled and unlabeled pools")

        run_dir = Path(run_dir) if run_dir is not None else self.default_run_dir(config)
        run_dir.mkdir(parents=True, exist_ok=True)
        metrics_path = run_dir / METRICS_FILE
        checkpoint_path = run_dir / CHECKPOINT_FILE
        config_path = run_dir / CONFIG_FILE

        # Step 1: model, optimizer and (optionally) resumed state
        params, prototypes = init_model(
            config.seed, [view.dim] + config.hidden_widths, config.embed_dim, view.class_count, config.activation
        )
        state = OptimizerState.zeros_like(model_arrays(params, prototypes))
        optimizer = SGDMomentum(momentum=config.momentum, clip=config.grad_clip)
        frozen_sigma: Optional[float] = None

        resume_epoch = None
        if resume:
            checkpoint = load_checkpoint(checkpoint_path)
            if checkpoint.config != config.model_dump(mode="json"):
                raise ConfigError(f"{run_dir}: config differs from the checkpointed run; cannot resume")
            frozen_sigma = self.restore(checkpoint, params, prototypes, state)
            resume_epoch = state.epoch
            logger.info(f"Resuming {run_dir} at epoch {state.epoch} (step {state.step})")
        else:
            config_path.write_text(json.dumps(config.model_dump(mode="json"), indent=2) + "\n", encoding="utf-8")

        steps_per_epoch = self.steps_per_epoch(config, view)
        feature_scale = view.feature_scale()
        last_epoch = config.epochs if stop_after_epochs is None else min(config.epochs, state.epoch + stop_after_epochs)
        logger.info(
            f"Training {view.name}: K={view.class_count}, {view.labeled_features.shape[0]} labeled, "
            f"{view.unlabeled_features.shape[0]} unlabeled, {steps_per_epoch} steps/epoch, "
            f"epochs {state.epoch}..{last_epoch - 1}, lambda_mmd={config.lambda_mmd}"
        )

        history: List[LossBreakdown] = []
        epochs: List[EpochSummary] = []
        accuracy: Optional[float] = None
        handle, writer = self._open_metrics(metrics_path, resume_epoch)
        try:
            # Step 2: epoch loop
            while state.epoch < last_epoch:
                epoch = state.epoch
                labeled_rng, unlabeled_rng, augment_rng = self._epoch_streams(config.seed, epoch)
                labeled_stream = _IndexStream(view.labeled_features.shape[0], labeled_rng)
                unlabeled_stream = _IndexStream(view.unlabeled_features.shape[0], unlabeled_rng)

                epoch_losses, empty_selections = [], 0
                for s in range(steps_per_epoch):
                    if config.lr_schedule == "epoch":
                        lr = lr_at(config.eta0, epoch, config.epochs)
                    else:
                        lr = lr_at(config.eta0, epoch + s / steps_per_epoch, config.epochs)

                    li = labeled_stream.take(config.batch_size)
                    ui = unlabeled_stream.take(config.unlabeled_batch_size)
                    breakdown = train_step(
                        params, prototypes, state,
                        view.labeled_features[li], view.labeled_labels[li], view.unlabeled_features[ui],
                        config, augment_rng,
                        lr=lr, optimizer=optimizer, feature_scale=feature_scale, frozen_sigma=frozen_sigma,
                    )
                    if (
                        frozen_sigma is None
                        and breakdown.mmd_sigma is not None
                        and config.kernel.bandwidth_mode == "median_heuristic"
                        and not config.kernel.recompute_each_step
                    ):
                        frozen_sigma = breakdown.mmd_sigma
                    if config.lambda_mmd > 0 and breakdown.mmd_sigma is None:
                        empty_selections += 1

                    history.append(breakdown)
                    epoch_losses.append(breakdown.l_total)
                    writer.writerow([_fmt(v) for v in (
                        "step", breakdown.step, epoch, breakdown.lr, breakdown.l_ssc, breakdown.l_mmd,
                        breakdown.l_total, breakdown.n_confident, breakdown.mean_confidence,
                        breakdown.n_mmd_selected_l, breakdown.n_mmd_selected_u, breakdown.mmd_sigma,
                        breakdown.skipped, None,
                    )])

                if empty_selections == steps_per_epoch:
                    logger.warning(f"Epoch {epoch}: MMD selection empty on every step; L_mmd was 0 throughout")

                # Step 3: end-of-epoch evaluation and checkpoint
                state.epoch += 1
                accuracy = None
                if view.test_labels.size:
                    accuracy = evaluate(params, prototypes, view.test_features, view.test_labels)
                summary = EpochSummary(
                    epoch=epoch,
                    steps=steps_per_epoch,
                    test_accuracy=accuracy,
                    mean_l_total=float(np.mean(epoch_losses)),
                )
                epochs.append(summary)
                writer.writerow([_fmt(v) for v in (
                    "epoch", state.step, epoch, None, None, None, summary.mean_l_total,
                    None, None, None, None, None, None, accuracy,
                )])
                handle.flush()
                save_checkpoint(checkpoint_path, self._checkpoint(params, prototypes, state, frozen_sigma, config))
                logger.info(
                    f"Epoch {epoch + 1}/{config.epochs}: mean L_total={summary.mean_l_total:.5f}"
                    + (f", test accuracy={accuracy:.4f}" if accuracy is not None else "")
                )
        except OSError as exc:
            raise CheckpointError(f"I/O failure in {run_dir}: {exc}") from exc
        finally:
            handle.close()

        return TrainResult(
            run_dir=str(run_dir),
            metrics_path=str(metrics_path),
            checkpoint_path=str(checkpoint_path),
            config_path=str(config_path),
            epochs_completed=state.epoch,
            steps_completed=state.step,
            final_accuracy=accuracy,
            history=history,
            epochs=epochs,
        )


# Singleton instance
trainer_service = TrainerService()
