"""Sentence embedding service: batch encoding and cosine-similarity
fine-tuning over registered models, spoken over HTTP+JSON."""

from .app import create_app
from .encoder import HashedBagEncoder
from .registry import Hyperparameters, ModelRegistry, TrainingExample

__version__ = "0.1.0"
