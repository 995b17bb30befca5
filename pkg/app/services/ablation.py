"""
Ablation Service - base (lambda_mmd = 0) vs. w.mmd runs over several seeds
"""

import csv
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union
import numpy as np
from loguru import logger
from rich.console import Console
from rich.table import Table

from app.core.config import settings
from app.core.exceptions import ConfigError, DataFormatError
from app.schemas.config import TrainConfig
from app.schemas.results import AblationArm, AblationSummary
from app.services.datasets import dataset_service
from app.services.trainer import trainer_service


BASE_ARM = "base"
MMD_ARM = "w.mmd"

SUMMARY_FILE = "ablation.csv"
RUNS_FILE = "ablation_runs.csv"
SUMMARY_COLUMNS = ["arm", "lambda_mmd", "seeds", "mean_accuracy", "std_accuracy"]
RUNS_COLUMNS = ["arm", "seed", "lambda_mmd", "test_accuracy"]

# Accuracy both arms are expected to clear on the desk-scale mixture
ACCURACY_FLOOR = 0.55


class AblationService:
    """Runs both arms on identical data per seed and tabulates test accuracy"""

    def run(
        self,
        config: TrainConfig,
        seeds: Sequence[int],
        output_dir: Optional[Union[str, Path]] = None,
    ) -> AblationSummary:
        """
        Train the base and w.mmd arms for every seed on a shared split

        Args:
            config: Configuration of the w.mmd arm; the base arm sets lambda_mmd to 0
            seeds: Run seeds, one split per seed
            output_dir: Where runs and CSV tables go, defaults to RUNS_DIR/ablation

        Returns:
            Mean and std test accuracy per arm
        """

        if not seeds:
            raise ConfigError("ablation needs at least one seed")
        output_dir = Path(output_dir) if output_dir is not None else Path(settings.RUNS_DIR) / "ablation"
        output_dir.mkdir(parents=True, exist_ok=True)
        if config.lambda_mmd == 0:
            logger.warning("configured lambda_mmd is 0; the w.mmd arm equals the base arm")

        arms = {BASE_ARM: 0.0, MMD_ARM: config.lambda_mmd}
        accuracies: Dict[str, List[float]] = {name: [] for name in arms}
        rows = []
        for seed in seeds:
            # Both arms see the same split: the data seed is the run seed unless pinned
            seeded = config.model_copy(update={"seed": seed}, deep=True)
            dataset, split = dataset_service.prepare(seeded.data, seeded.data_seed())
            view = split.training_view(dataset)
            for name, lambda_mmd in arms.items():
                arm_config = seeded.model_copy(update={"lambda_mmd": lambda_mmd}, deep=True)
                logger.info(f"Ablation seed {seed}, arm {name} (lambda_mmd={lambda_mmd})")
                result = trainer_service.train(arm_config, view, run_dir=output_dir / f"seed{seed}" / name)
                accuracy = float(result.final_accuracy) if result.final_accuracy is not None else float("nan")
                accuracies[name].append(accuracy)
                rows.append([name, seed, repr(lambda_mmd), repr(accuracy)])

        summary = AblationSummary(
            arms=[
                AblationArm(
                    arm=name,
                    lambda_mmd=lambda_mmd,
                    seeds=list(seeds),
                    accuracies=accuracies[name],
                    mean_accuracy=float(np.mean(accuracies[name])),
                    std_accuracy=float(np.std(accuracies[name])),
                )
                for name, lambda_mmd in arms.items()
            ],
            output_dir=str(output_dir),
        )

        self._write(output_dir, summary, rows)
        self._soft_check(summary)
        return summary

    def _write(self, output_dir: Path, summary: AblationSummary, rows: List[List]) -> None:
        with open(output_dir / RUNS_FILE, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(RUNS_COLUMNS)
            writer.writerows(rows)
        with open(output_dir / SUMMARY_FILE, "w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(SUMMARY_COLUMNS)
            for arm in summary.arms:
                writer.writerow([arm.arm, repr(arm.lambda_mmd), len(arm.seeds), repr(arm.mean_accuracy), repr(arm.std_accuracy)])
        logger.info(f"Ablation tables written to {output_dir}")

    def _soft_check(self, summary: AblationSummary) -> None:
        means = summary.by_arm()
        for name, mean in means.items():
            if not mean > ACCURACY_FLOOR:
                logger.warning(f"arm {name}: mean accuracy {mean:.4f} not above {ACCURACY_FLOOR}")
        base, with_mmd = means[BASE_ARM], means[MMD_ARM]
        if with_mmd >= base:
            logger.info(f"w.mmd >= base ({with_mmd:.4f} vs {base:.4f})")
        else:
            logger.warning(
                f"w.mmd below base ({with_mmd:.4f} vs {base:.4f}); "
                f"stochastic at this scale, not treated as a failure"
            )

    def render(self, summary: AblationSummary, console: Optional[Console] = None) -> None:
        """Mean +- std test accuracy per arm"""
        table = Table(title="Test accuracy by arm")
        table.add_column("arm", style="cyan")
        table.add_column("lambda_mmd", justify="right")
        table.add_column("seeds", justify="right")
        table.add_column("accuracy (mean ± std)", justify="right", style="green")
        for arm in summary.arms:
            table.add_row(
                arm.arm, f"{arm.lambda_mmd:g}", str(len(arm.seeds)),
                f"{arm.mean_accuracy:.4f} ± {arm.std_accuracy:.4f}",
            )
        (console or Console()).print(table)


def read_ablation_csv(path: Union[str, Path]) -> Dict[str, Dict[str, float]]:
    """Summary CSV back into {arm: {lambda_mmd, seeds, mean_accuracy, std_accuracy}}"""
    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames != SUMMARY_COLUMNS:
            raise DataFormatError(f"{path}: unexpected header {reader.fieldnames}")
        return {
            row["arm"]: {
                "lambda_mmd": float(row["lambda_mmd"]),
                "seeds": int(row["seeds"]),
                "mean_accuracy": float(row["mean_accuracy"]),
                "std_accuracy": float(row["std_accuracy"]),
            }
            for row in reader
        }


# Singleton instance
ablation_service = AblationService()
