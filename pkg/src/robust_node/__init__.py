"""Robust training of a neural ODE classifier under control disturbances."""

from .adversary import AdversaryConfig, robust_cost, worst_case_disturbance
from .data import Dataset, generate_dataset, sample_disturbance
from .errors import ConfigError, DivergenceError, LambdaTooSmallError, TrainingError
from .evaluate import EvalReport, evaluate
from .model import ModelConfig, endpoints, integrate, load_control, save_control
from .projector import ConstraintStack, project_to_kernel
from .sensitivity import SensitivityMatrix, compute_L, compute_L_batch
from .trainer import TrainConfig, TrainState, train_robust, train_standard

__version__ = "0.1.0"

__all__ = [
    "AdversaryConfig",
    "ConfigError",
    "ConstraintStack",
    "Dataset",
    "DivergenceError",
    "EvalReport",
    "LambdaTooSmallError",
    "ModelConfig",
    "SensitivityMatrix",
    "TrainConfig",
    "TrainState",
    "TrainingError",
    "compute_L",
    "compute_L_batch",
    "endpoints",
    "evaluate",
    "generate_dataset",
    "integrate",
    "load_control",
    "project_to_kernel",
    "robust_cost",
    "sample_disturbance",
    "save_control",
    "train_robust",
    "train_standard",
    "worst_case_disturbance",
]
