"""Embedding HTTP service and batch cache exporter."""

from .app import create_app
from .encoders import ClipTextEncoder, HashEncoder, build_encoder
from .export import export_cache
from .subsets import parse_corpus, render_subset, subset_texts

__version__ = "0.1.0"

__all__ = [
    "ClipTextEncoder",
    "HashEncoder",
    "build_encoder",
    "create_app",
    "export_cache",
    "parse_corpus",
    "render_subset",
    "subset_texts",
]
