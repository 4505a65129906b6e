"""Online decision-tree learning by Monte Carlo Tree Search with Thompson Sampling."""

from .data import AttributeSchema, Dataset, Instance, kfold, one_hot_encode, parse_csv, replay_stream, xor_stream
from .mcts import ExperimentConfig, FitResult, fit

__all__ = [
    "AttributeSchema", "Dataset", "Instance", "ExperimentConfig", "FitResult",
    "fit", "kfold", "one_hot_encode", "parse_csv", "replay_stream", "xor_stream",
]
__version__ = "0.1.0"
