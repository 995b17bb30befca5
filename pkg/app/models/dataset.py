from dataclasses import dataclass, field
from typing import Any, Dict, Tuple
import numpy as np

from app.core.autograd import as_matrix
from app.core.exceptions import ConfigError, ShapeError


# Label carried by rows of out-of-distribution clusters; never in [0, K)
DISTRACTOR_LABEL = -1


def _frozen(array: np.ndarray) -> np.ndarray:
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Dataset:
    """Feature rows with integer class labels in [0, K) (distractor rows: -1)"""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str
    warnings: Tuple[str, ...] = ()
    allow_missing_classes: bool = False

    def __post_init__(self):
        features = _frozen(as_matrix(self.features, name=f"{self.name} features"))
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise ShapeError(f"{self.name}: {labels.shape[0]} labels for {features.shape[0]} rows")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ConfigError(f"{self.name}: labels must be integers")
        labels = _frozen(labels.astype(np.int64))
        if self.class_count < 2:
            raise ConfigError(f"{self.name}: need at least 2 classes, got {self.class_count}")

        valid = (labels == DISTRACTOR_LABEL) | ((labels >= 0) & (labels < self.class_count))
        if not np.all(valid):
            bad = np.unique(labels[~valid]).tolist()
            raise ConfigError(f"{self.name}: labels {bad} outside [0, {self.class_count})")

        present = np.unique(labels[labels >= 0])
        if not self.allow_missing_classes and present.size != self.class_count:
            missing = sorted(set(range(self.class_count)) - set(present.tolist()))
            raise ConfigError(f"{self.name}: classes {missing} have no rows")

        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    @property
    def distractor_mask(self) -> np.ndarray:
        return self.labels == DISTRACTOR_LABEL

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.class_count)


@dataclass(frozen=True)
class TrainingView:
    """
    Everything a training run may read.

    Unlabeled rows come without labels; this is the only data type the
    trainer accepts.
    """

    labeled_features: np.ndarray
    labeled_labels: np.ndarray
    unlabeled_features: np.ndarray
    test_features: np.ndarray
    test_labels: np.ndarray
    class_count: int
    name: str = "dataset"

    @property
    def dim(self) -> int:
        return self.labeled_features.shape[1]

    def feature_scale(self) -> float:
        """Mean per-column standard deviation of all training rows"""
        pooled = np.concatenate([self.labeled_features, self.unlabeled_features], axis=0)
        scale = float(np.mean(np.std(pooled, axis=0)))
        return scale if scale > 0 else 1.0


@dataclass(frozen=True)
class SslSplit:
    """Disjoint labeled / unlabeled / test index sets over one Dataset"""

    labeled: np.ndarray
    labeled_labels: np.ndarray
    unlabeled: np.ndarray
    test: np.ndarray
    _unlabeled_labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        for name in ("labeled", "labeled_labels", "unlabeled", "test", "_unlabeled_labels"):
            object.__setattr__(self, name, _frozen(np.asarray(getattr(self, name), dtype=np.int64)))
        sets = [set(self.labeled.tolist()), set(self.unlabeled.tolist()), set(self.test.tolist())]
        if (sets[0] & sets[1]) or (sets[0] & sets[2]) or (sets[1] & sets[2]):
            raise ConfigError("labeled, unlabeled and test index sets must be disjoint")
        if self.labeled_labels.shape != self.labeled.shape:
            raise ShapeError("labeled_labels must align with labeled indices")

    def hidden_unlabeled_labels(self) -> np.ndarray:
        """True labels of the unlabeled rows. Evaluation only: never pass to training code."""
        return self._unlabeled_labels

    def training_view(self, dataset: Dataset) -> TrainingView:
        return TrainingView(
            labeled_features=dataset.features[self.labeled],
            labeled_labels=self.labeled_labels.copy(),
            unlabeled_features=dataset.features[self.unlabeled],
            test_features=dataset.features[self.test],
            test_labels=dataset.labels[self.test],
            class_count=dataset.class_count,
            name=dataset.name,
        )

    def to_dict(self) -> Dict[str, Any]:
        """Index lists for the split command (hidden labels excluded)"""
        return {
            "labeled": self.labeled.tolist(),
            "labeled_labels": self.labeled_labels.tolist(),
            "unlabeled": self.unlabeled.tolist(),
            "test": self.test.tolist(),
        }
