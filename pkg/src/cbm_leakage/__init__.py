"""Concept bottleneck models with Monte-Carlo dropout concept predictors."""

from .clm import ConceptLabeler, ConceptPredictorConfig, Mode
from .target import ThreeNearestNeighbors

__version__ = "0.1.0"
