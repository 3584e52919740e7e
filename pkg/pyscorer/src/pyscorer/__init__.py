"""Toy noisy-channel corrector plugin for N-best reranking toolkits."""

from .model import ToyCorrectorModel, align_words, edit_distance, fit, normalize_text
from .serve import handle_request, serve

__version__ = "0.1.0"

__all__ = [
    "ToyCorrectorModel",
    "align_words",
    "edit_distance",
    "fit",
    "handle_request",
    "normalize_text",
    "serve",
    "__version__",
]
