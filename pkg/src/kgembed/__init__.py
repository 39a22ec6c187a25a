"""Knowledge graph embedding models, training, evaluation and analysis."""

from . import analysis, data, evaluation, io, linalg, models, poincare, training
from .data import TripleStore, add_reciprocals, build_filter_index, build_store
from .evaluation import classify, evaluate_ranking
from .models import get_model
from .training import TrainConfig, default_config, train_epoch

__version__ = "0.1.0"

__all__ = [
    "analysis", "data", "evaluation", "io", "linalg", "models", "poincare", "training",
    "TripleStore", "add_reciprocals", "build_filter_index", "build_store",
    "classify", "evaluate_ranking", "get_model",
    "TrainConfig", "default_config", "train_epoch",
]
