from typing import Dict, List, Optional
from pydantic import BaseModel, Field, model_validator


class LossBreakdown(BaseModel):
    """Loss terms and diagnostics of one optimizer step"""
    step: int
    epoch: int
    lr: float
    l_ssc: float
    l_mmd: float
    l_total: float
    lambda_mmd: float
    n_confident: int = 0
    mean_confidence: float = 0.0
    n_mmd_selected_l: int = 0
    n_mmd_selected_u: int = 0
    mmd_sigma: Optional[float] = None
    skipped: bool = False

    @model_validator(mode="after")
    def _total_identity(self) -> "LossBreakdown":
        if abs(self.l_total - (self.l_ssc + self.lambda_mmd * self.l_mmd)) > 1e-12:
            raise ValueError("l_total must equal l_ssc + lambda_mmd * l_mmd")
        return self


class EpochSummary(BaseModel):
    """End-of-epoch evaluation"""
    epoch: int
    steps: int
    test_accuracy: Optional[float] = None
    mean_l_total: float = 0.0


class TrainResult(BaseModel):
    """Artifacts of a training run"""
    run_dir: str
    metrics_path: str
    checkpoint_path: str
    config_path: str
    epochs_completed: int
    steps_completed: int
    final_accuracy: Optional[float] = None
    history: List[LossBreakdown] = []
    epochs: List[EpochSummary] = []


class GradCheckTerm(BaseModel):
    """Worst finite-difference disagreement of one loss term"""
    term: str
    worst_relative_error: float
    worst_seed: int
    passed: bool


class GradCheckReport(BaseModel):
    """Outcome of the finite-difference suite"""
    seeds: int
    tolerance: float
    step: float
    terms: List[GradCheckTerm] = []

    @property
    def passed(self) -> bool:
        return all(term.passed for term in self.terms)

    @property
    def failed_terms(self) -> List[str]:
        return [term.term for term in self.terms if not term.passed]


class AblationArm(BaseModel):
    """Test accuracy of one ablation arm across seeds"""
    arm: str
    lambda_mmd: float
    seeds: List[int]
    accuracies: List[float]
    mean_accuracy: float
    std_accuracy: float


class AblationSummary(BaseModel):
    """Base vs. w.mmd comparison"""
    arms: List[AblationArm] = []
    output_dir: str = ""

    def by_arm(self) -> Dict[str, float]:
        return {arm.arm: arm.mean_accuracy for arm in self.arms}
