import math
from typing import List, Literal, Optional, Tuple, Union
from pydantic import BaseModel, Field, field_validator, model_validator
from loguru import logger


class LabelWeights(BaseModel):
    """Per-row importance of labeled, pseudo-labeled, prototype and low-confidence rows"""
    labeled: float = Field(1.0, ge=0, description="lambda_x")
    confident: float = Field(1.0, ge=0, description="lambda_u up (pseudo-labeled)")
    prototype: float = Field(1.0, ge=0, description="lambda_c")
    unconfident: float = Field(0.2, ge=0, description="lambda_u down (unique-label rows)")

    class Config:
        extra = "forbid"

    @field_validator("labeled", "confident", "prototype", "unconfident")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("weights must be finite")
        return value

    @model_validator(mode="after")
    def _warn_order(self) -> "LabelWeights":
        if self.unconfident > self.confident:
            logger.warning(
                f"low-confidence weight {self.unconfident} exceeds confident weight {self.confident}"
            )
        return self


class KernelConfig(BaseModel):
    """Gaussian kernel bandwidth for the MMD term"""
    bandwidth_mode: Literal["median_heuristic", "fixed"] = "median_heuristic"
    sigma: Optional[float] = Field(None, gt=0, description="Bandwidth in fixed mode")
    recompute_each_step: bool = True

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _sigma_for_fixed(self) -> "KernelConfig":
        if self.bandwidth_mode == "fixed" and self.sigma is None:
            raise ValueError("sigma is required when bandwidth_mode is 'fixed'")
        return self


class AugmentPolicy(BaseModel):
    """Stochastic perturbation applied independently to each feature row"""
    kind: Literal["weak", "strong"]
    jitter_sigma: float = Field(..., ge=0, description="Gaussian jitter, in units of feature std")
    dropout_prob: float = Field(0.0, ge=0, lt=1)
    scale_range: Tuple[float, float] = (1.0, 1.0)
    rotation_max: float = Field(0.0, ge=0, le=math.pi, description="Radians, 2-D data only")

    class Config:
        extra = "forbid"

    @field_validator("scale_range")
    @classmethod
    def _positive_scale(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if low <= 0 or high <= 0:
            raise ValueError("scale_range bounds must be positive")
        if low > high:
            raise ValueError("scale_range must be (low, high) with low <= high")
        return value

    @model_validator(mode="after")
    def _weak_has_no_dropout(self) -> "AugmentPolicy":
        if self.kind == "weak" and self.dropout_prob != 0:
            raise ValueError("weak policy must have dropout_prob = 0")
        return self

    @classmethod
    def identity(cls, kind: Literal["weak", "strong"] = "strong") -> "AugmentPolicy":
        return cls(kind=kind, jitter_sigma=0.0, dropout_prob=0.0, scale_range=(1.0, 1.0), rotation_max=0.0)


def _default_weak() -> AugmentPolicy:
    return AugmentPolicy(kind="weak", jitter_sigma=0.05, scale_range=(0.95, 1.05))


def _default_strong() -> AugmentPolicy:
    return AugmentPolicy(
        kind="strong",
        jitter_sigma=0.25,
        dropout_prob=0.1,
        scale_range=(0.8, 1.2),
        rotation_max=math.pi / 6,
    )


class AugmentConfig(BaseModel):
    """Weak/strong pair; weak must perturb less than strong"""
    weak: AugmentPolicy = Field(default_factory=_default_weak)
    strong: AugmentPolicy = Field(default_factory=_default_strong)
    augment_labeled: bool = Field(False, description="Weak-augment labeled rows before embedding")

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _asymmetry(self) -> "AugmentConfig":
        if self.weak.kind != "weak" or self.strong.kind != "strong":
            raise ValueError("weak/strong policies must declare matching kinds")
        # identity pair (both zero) is allowed for exact-replay experiments
        both_identity = self.weak.jitter_sigma == 0 and self.strong.jitter_sigma == 0
        if not both_identity and self.weak.jitter_sigma >= self.strong.jitter_sigma:
            raise ValueError("weak jitter_sigma must be smaller than strong jitter_sigma")
        return self


class CsvSchema(BaseModel):
    """Column layout of a feature CSV"""
    label_column: Union[str, int] = Field(-1, description="Header name or 0-based position")
    feature_columns: Optional[List[Union[str, int]]] = Field(None, description="Defaults to every other column")

    class Config:
        extra = "forbid"


class DataConfig(BaseModel):
    """Dataset source and labeled/unlabeled/test split"""
    source: Literal["gaussian_mixture", "rings", "csv"] = "gaussian_mixture"
    classes: int = Field(2, ge=2)
    per_class: int = Field(200, ge=1)
    dim: int = Field(2, ge=2)
    separation: float = Field(3.0, gt=0)
    noise: float = Field(0.1, ge=0)
    distractor_classes: int = Field(0, ge=0)
    csv_path: Optional[str] = None
    csv_schema: CsvSchema = Field(default_factory=CsvSchema)
    labels_per_class: int = Field(4, ge=1)
    test_fraction: float = Field(0.2, ge=0, lt=1)
    test_per_class: Optional[int] = Field(None, ge=0)
    seed: Optional[int] = Field(None, description="Defaults to the run seed")

    class Config:
        extra = "forbid"

    @model_validator(mode="after")
    def _csv_path(self) -> "DataConfig":
        if self.source == "csv" and not self.csv_path:
            raise ValueError("csv_path is required when source is 'csv'")
        return self


class TrainConfig(BaseModel):
    """Every hyperparameter of a training run"""

    # Optimisation
    batch_size: int = Field(64, ge=2, description="Labeled batch size B")
    mu: int = Field(7, ge=1, description="Unlabeled-to-labeled batch ratio")
    epochs: int = Field(256, ge=1)
    eta0: float = Field(0.03, gt=0, description="Initial learning rate")
    momentum: float = Field(0.9, ge=0, lt=1)
    lr_schedule: Literal["epoch", "step"] = "epoch"
    grad_clip: Optional[float] = Field(None, gt=0, description="Global gradient-norm cap")

    # Pseudo-labeling and contrastive loss
    tau: float = Field(0.95, gt=0, lt=1, description="Confidence threshold")
    temperature: float = Field(0.2, gt=0, description="Contrastive temperature T")
    pseudo_temperature: float = Field(0.1, gt=0, description="Pseudo-labeling temperature T'")
    temperature_placement: Literal["standard", "printed"] = "standard"
    lambda_weights: LabelWeights = Field(default_factory=LabelWeights)

    # Distribution matching
    lambda_mmd: float = Field(1.0, ge=0)
    epsilon_p: Optional[float] = Field(None, ge=0, description="Entropy threshold; defaults to 0.5 ln K")
    selection_temperature: Literal["none", "pseudo"] = "none"
    kernel: KernelConfig = Field(default_factory=KernelConfig)

    # Model
    hidden_widths: List[int] = Field(default_factory=lambda: [64, 32])
    embed_dim: int = Field(16, ge=1)
    activation: Literal["relu", "tanh"] = "relu"

    # Data and augmentation
    data: DataConfig = Field(default_factory=DataConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)

    seed: int = 0

    class Config:
        extra = "forbid"
        json_schema_extra = {
            "example": {
                "batch_size": 64,
                "mu": 7,
                "epochs": 256,
                "eta0": 0.03,
                "momentum": 0.9,
                "lambda_mmd": 1.0,
                "seed": 0,
            }
        }

    @field_validator("lambda_mmd", "eta0", "temperature", "pseudo_temperature")
    @classmethod
    def _finite(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value

    @field_validator("hidden_widths")
    @classmethod
    def _positive_widths(cls, value: List[int]) -> List[int]:
        if any(width < 1 for width in value):
            raise ValueError("hidden widths must be positive")
        return value

    @property
    def unlabeled_batch_size(self) -> int:
        return self.batch_size * self.mu

    def resolved_epsilon_p(self, class_count: int) -> float:
        if self.epsilon_p is not None:
            return self.epsilon_p
        return 0.5 * math.log(class_count)

    def data_seed(self) -> int:
        return self.seed if self.data.seed is None else self.data.seed
