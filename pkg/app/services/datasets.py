"""
Dataset Service - synthetic generators, CSV ingestion and labeled/unlabeled splits
"""

import csv
import math
from pathlib import Path
from typing import List, Optional, Tuple, Union
import numpy as np
from loguru import logger

from app.core.exceptions import ConfigError, DataFormatError
from app.models.dataset import DISTRACTOR_LABEL, Dataset, SslSplit
from app.schemas.config import CsvSchema, DataConfig


def _cluster_means(count: int, dim: int, separation: float) -> np.ndarray:
    """Means at pairwise distance `separation`: simplex when dim allows, else a circle"""
    means = np.zeros((count, dim))
    if dim >= count:
        means[:, :count] = np.eye(count) * (separation / math.sqrt(2.0))
        means -= means.mean(axis=0)
    else:
        radius = separation / (2.0 * math.sin(math.pi / count))
        angles = 2.0 * math.pi * np.arange(count) / count
        means[:, 0] = radius * np.cos(angles)
        means[:, 1] = radius * np.sin(angles)
    return means


def generate_gaussian_mixture(
    seed: int,
    classes: int,
    per_class: int,
    dim: int,
    separation: float,
    distractor_classes: int = 0,
) -> Dataset:
    """
    K isotropic unit-variance Gaussian clusters.

    Distractor clusters (label -1) are placed alongside the real ones and
    only ever reach the unlabeled pool.
    """

    if classes < 2 or per_class < 1 or dim < 2 or not separation > 0 or distractor_classes < 0:
        raise ConfigError(
            f"gaussian mixture needs classes >= 2, per_class >= 1, dim >= 2, separation > 0 "
            f"(got {classes}, {per_class}, {dim}, {separation})"
        )

    rng = np.random.default_rng(seed)
    means = _cluster_means(classes + distractor_classes, dim, separation)
    features, labels = [], []
    for cluster, mean in enumerate(means):
        features.append(rng.normal(size=(per_class, dim)) + mean)
        labels.append(np.full(per_class, cluster if cluster < classes else DISTRACTOR_LABEL))

    return Dataset(
        features=np.concatenate(features, axis=0),
        labels=np.concatenate(labels),
        class_count=classes,
        name=f"gaussian_mixture-k{classes}-d{dim}-s{seed}",
    )


def generate_rings(
    seed: int,
    classes: int,
    per_class: int,
    noise: float,
    distractor_classes: int = 0,
) -> Dataset:
    """Concentric 2-D rings; class k lies on radius k + 1 plus radial noise"""

    if classes < 2 or per_class < 1 or noise < 0 or distractor_classes < 0:
        raise ConfigError(
            f"rings need classes >= 2, per_class >= 1, noise >= 0 (got {classes}, {per_class}, {noise})"
        )

    rng = np.random.default_rng(seed)
    features, labels = [], []
    for ring in range(classes + distractor_classes):
        angles = rng.uniform(0.0, 2.0 * math.pi, size=per_class)
        radii = (ring + 1.0) + noise * rng.normal(size=per_class)
        features.append(np.stack([radii * np.cos(angles), radii * np.sin(angles)], axis=1))
        labels.append(np.full(per_class, ring if ring < classes else DISTRACTOR_LABEL))

    return Dataset(
        features=np.concatenate(features, axis=0),
        labels=np.concatenate(labels),
        class_count=classes,
        name=f"rings-k{classes}-s{seed}",
    )


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def _resolve_column(column: Union[str, int], header: Optional[List[str]], width: int, path: Path) -> int:
    if isinstance(column, str):
        if header is None:
            raise DataFormatError(f"{path}: column '{column}' named but the file has no header")
        if column not in header:
            raise DataFormatError(f"{path}: no column named '{column}' in header {header}")
        return header.index(column)
    index = column + width if column < 0 else column
    if not 0 <= index < width:
        raise DataFormatError(f"{path}: column {column} out of range for {width} columns")
    return index


def load_csv(path: Union[str, Path], schema: Optional[CsvSchema] = None) -> Dataset:
    """
    Read feature rows and integer labels from a comma-separated UTF-8 file.

    The header is optional: a first row with any non-numeric cell is taken
    as the header. K is the largest label plus one.
    """

    path = Path(path)
    schema = schema or CsvSchema()
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")

    with open(path, newline="", encoding="utf-8") as handle:
        rows = [(number, row) for number, row in enumerate(csv.reader(handle), start=1) if row]
    if not rows:
        raise DataFormatError(f"{path}: empty file")

    header = None
    if not all(_is_number(cell) for cell in rows[0][1]):
        header = [cell.strip() for cell in rows[0][1]]
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: header but no data rows")

    width = len(header) if header is not None else len(rows[0][1])
    label_index = _resolve_column(schema.label_column, header, width, path)
    if schema.feature_columns is None:
        feature_index = [i for i in range(width) if i != label_index]
    else:
        feature_index = [_resolve_column(c, header, width, path) for c in schema.feature_columns]
    if not feature_index:
        raise DataFormatError(f"{path}: no feature columns")

    features, labels = [], []
    for number, row in rows:
        if len(row) != width:
            raise DataFormatError(f"{path}:{number}: expected {width} fields, got {len(row)}")
        try:
            values = [float(row[i]) for i in feature_index]
            label_value = float(row[label_index])
        except ValueError as exc:
            raise DataFormatError(f"{path}:{number}: cannot parse row ({exc})") from exc
        if not all(math.isfinite(v) for v in values):
            raise DataFormatError(f"{path}:{number}: non-finite feature value in row {number}")
        if not label_value.is_integer() or label_value < DISTRACTOR_LABEL:
            raise DataFormatError(f"{path}:{number}: label {row[label_index]!r} is not a class index")
        features.append(values)
        labels.append(int(label_value))

    labels_array = np.asarray(labels, dtype=np.int64)
    class_count = int(labels_array.max()) + 1
    present = set(labels_array[labels_array >= 0].tolist())
    missing = sorted(set(range(class_count)) - present)
    warnings: Tuple[str, ...] = ()
    if missing:
        message = f"{path}: classes {missing} have no rows; K taken from max label = {class_count}"
        logger.warning(message)
        warnings = (message,)

    return Dataset(
        features=np.asarray(features, dtype=np.float64),
        labels=labels_array,
        class_count=class_count,
        name=path.stem,
        warnings=warnings,
        allow_missing_classes=bool(missing),
    )


def load_feature_matrix(path: Union[str, Path]) -> np.ndarray:
    """Every column of a numeric CSV as a float64 matrix (header optional)"""

    path = Path(path)
    if not path.exists():
        raise DataFormatError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as handle:
        rows = [(number, row) for number, row in enumerate(csv.reader(handle), start=1) if row]
    if rows and not all(_is_number(cell) for cell in rows[0][1]):
        rows = rows[1:]
    if not rows:
        raise DataFormatError(f"{path}: no data rows")

    width = len(rows[0][1])
    matrix = []
    for number, row in rows:
        if len(row) != width:
            raise DataFormatError(f"{path}:{number}: expected {width} fields, got {len(row)}")
        try:
            values = [float(cell) for cell in row]
        except ValueError as exc:
            raise DataFormatError(f"{path}:{number}: cannot parse row ({exc})") from exc
        if not all(math.isfinite(v) for v in values):
            raise DataFormatError(f"{path}:{number}: non-finite value in row {number}")
        matrix.append(values)
    return np.asarray(matrix, dtype=np.float64)


def save_csv(dataset: Dataset, path: Union[str, Path]) -> Path:
    """Write a dataset with header f0..f{d-1},label; floats round-trip exactly"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow([f"f{i}" for i in range(dataset.dim)] + ["label"])
        for row, label in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])
    return path


def make_ssl_split(
    dataset: Dataset,
    labels_per_class: int,
    test_fraction: float = 0.2,
    seed: int = 0,
    test_per_class: Optional[int] = None,
) -> SslSplit:
    """
    Stratified split: per class, a test share, then exactly labels_per_class
    labeled rows; everything else (distractors included) is unlabeled.

    Args:
        dataset: Rows to split
        labels_per_class: Labeled rows drawn from each class
        test_fraction: Share of each class held out for testing
        seed: Seed of the shuffles
        test_per_class: Absolute test rows per class, overrides test_fraction

    Returns:
        Index sets for the labeled, unlabeled and test rows
    """

    if labels_per_class < 1:
        raise ConfigError(f"labels_per_class must be >= 1, got {labels_per_class}")
    if not 0 <= test_fraction < 1:
        raise ConfigError(f"test_fraction must be in [0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    labeled, labeled_labels, unlabeled, test = [], [], [], []
    deficient = []
    for cls in range(dataset.class_count):
        members = rng.permutation(np.flatnonzero(dataset.labels == cls))
        n_test = test_per_class if test_per_class is not None else int(round(members.size * test_fraction))
        pool = members[n_test:]
        if pool.size < labels_per_class + 1:
            deficient.append(f"class {cls}: {pool.size} rows after test removal, need {labels_per_class + 1}")
            continue
        test.append(members[:n_test])
        labeled.append(pool[:labels_per_class])
        labeled_labels.append(np.full(labels_per_class, cls))
        unlabeled.append(pool[labels_per_class:])

    if deficient:
        raise ConfigError("insufficient samples for split: " + "; ".join(deficient))

    unlabeled.append(np.flatnonzero(dataset.distractor_mask))

    labeled_idx = np.concatenate(labeled)
    order = np.argsort(labeled_idx, kind="stable")
    unlabeled_idx = np.sort(np.concatenate(unlabeled))

    split = SslSplit(
        labeled=labeled_idx[order],
        labeled_labels=np.concatenate(labeled_labels)[order],
        unlabeled=unlabeled_idx,
        test=np.sort(np.concatenate(test)),
        _unlabeled_labels=dataset.labels[unlabeled_idx],
    )
    logger.debug(
        f"Split {dataset.name}: {split.labeled.size} labeled, "
        f"{split.unlabeled.size} unlabeled, {split.test.size} test"
    )
    return split


class DatasetService:
    """Builds datasets and splits from a DataConfig"""

    def build(self, config: DataConfig, seed: int) -> Dataset:
        if config.source == "gaussian_mixture":
            return generate_gaussian_mixture(
                seed=seed,
                classes=config.classes,
                per_class=config.per_class,
                dim=config.dim,
                separation=config.separation,
                distractor_classes=config.distractor_classes,
            )
        if config.source == "rings":
            return generate_rings(
                seed=seed,
                classes=config.classes,
                per_class=config.per_class,
                noise=config.noise,
                distractor_classes=config.distractor_classes,
            )
        return load_csv(config.csv_path, config.csv_schema)

    def split(self, dataset: Dataset, config: DataConfig, seed: int) -> SslSplit:
        return make_ssl_split(
            dataset,
            labels_per_class=config.labels_per_class,
            test_fraction=config.test_fraction,
            seed=seed,
            test_per_class=config.test_per_class,
        )

    def prepare(self, config: DataConfig, seed: int) -> Tuple[Dataset, SslSplit]:
        dataset = self.build(config, seed)
        split = self.split(dataset, config, seed)
        logger.info(
            f"Dataset {dataset.name}: {dataset.n_rows} rows, K={dataset.class_count}, "
            f"{split.labeled.size}/{split.unlabeled.size}/{split.test.size} labeled/unlabeled/test"
        )
        return dataset, split


# Singleton instance
dataset_service = DatasetService()
