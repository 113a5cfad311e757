"""Relation detection for KBQA by multi-view bilateral matching."""
from .config import ModelConfig, TrainConfig, ViewConfig
from .model import MultiViewMatcher, QuestionInstance, RelationCandidate, build_model

__version__ = "0.1.0"

__all__ = ["ModelConfig", "TrainConfig", "ViewConfig", "MultiViewMatcher", "QuestionInstance",
           "RelationCandidate", "build_model", "__version__"]
