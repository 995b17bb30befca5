# Services exports
from app.services.datasets import DatasetService, dataset_service
from app.services.trainer import TrainerService, trainer_service
from app.services.gradcheck import GradCheckService, gradcheck_service
from app.services.ablation import AblationService, ablation_service

__all__ = [
    "DatasetService",
    "dataset_service",
    "TrainerService",
    "trainer_service",
    "GradCheckService",
    "gradcheck_service",
    "AblationService",
    "ablation_service",
]
