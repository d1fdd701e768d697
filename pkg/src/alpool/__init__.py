"""Pool-based active learning with committee-disagreement acquisition.

Train a committee on a small labeled seed, rank the unlabeled pool by
summed prediction entropy plus pairwise KL disagreement, query the top
fraction for labels (simulated oracle or human annotator over HTTP), and
track how much of the annotation budget the loop saves.
"""

from .data import Dataset, PoolState, SplitSpec, UNKNOWN
from .engine import AlSession, BudgetLedger, SessionConfig
from .errors import AlError
from .model import Classifier, ModelConfig, TrainConfig

__all__ = [
    "AlError",
    "AlSession",
    "BudgetLedger",
    "Classifier",
    "Dataset",
    "ModelConfig",
    "PoolState",
    "SessionConfig",
    "SplitSpec",
    "TrainConfig",
    "UNKNOWN",
]

__version__ = "0.1.0"
