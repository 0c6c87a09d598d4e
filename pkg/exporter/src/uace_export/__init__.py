"""Produce embedding bundles from real images, text concepts and a classifier."""

__version__ = "0.1.0"

from .classifiers import BuiltinClassifier, TorchScriptClassifier, make_classifier
from .encoders import ClipEncoder, TinyEncoder, make_encoder
from .export import ExportError, ExportSpec, export
from .format import write_bundle_dir

__all__ = [
    "BuiltinClassifier",
    "ClipEncoder",
    "ExportError",
    "ExportSpec",
    "TinyEncoder",
    "TorchScriptClassifier",
    "export",
    "make_classifier",
    "make_encoder",
    "write_bundle_dir",
]
