"""Two-tier ensembles: per-family instance averaging, then learned softmax fusion across families."""

from .domain import BinaryLabel, EnsembleConfig, FamilyId, InstanceId, Probability, make_probability
from .ensemble import (
    FusionWeights,
    average_instances,
    bce_grad_y,
    bce_loss,
    fuse,
    fusion_gradient,
    sigmoid,
    softmax_weights,
)
from .errors import TwoTierError
from .metrics import MetricsReport, ScoredSet, auc, evaluate, report_table
from .training import TrainingConfig, train_base_instances, train_fusion, train_two_phase

__version__ = "0.1.0"

__all__ = [
    "BinaryLabel",
    "EnsembleConfig",
    "FamilyId",
    "FusionWeights",
    "InstanceId",
    "MetricsReport",
    "Probability",
    "ScoredSet",
    "TrainingConfig",
    "TwoTierError",
    "auc",
    "average_instances",
    "bce_grad_y",
    "bce_loss",
    "evaluate",
    "fuse",
    "fusion_gradient",
    "make_probability",
    "report_table",
    "sigmoid",
    "softmax_weights",
    "train_base_instances",
    "train_fusion",
    "train_two_phase",
]
