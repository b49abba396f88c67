"""Panoptic symbol spotting for vector drawings.

Converts every graphical primitive of a drawing into one point sample, runs a
layer-aware point transformer pipeline over the set, and assigns each
primitive a (semantic label, instance id) pair. Metrics weight primitives by
arc length.
"""

from .config import RunConfig, load_config, save_config
from .dataset_io import load_dataset, save_dataset
from .drawing import ClassDef, Drawing, GraphicalPrimitive, PointSample
from .metrics import SpottingReport, arc_iou, panoptic_quality
from .model import SpottingModel, panoptic_inference
from .synthetic import GeneratorSpec, generate_dataset, generate_synthetic
from .training import evaluate_model, load_checkpoint, predict_drawing, train

__version__ = "0.1.0"

__all__ = [
    "ClassDef",
    "Drawing",
    "GeneratorSpec",
    "GraphicalPrimitive",
    "PointSample",
    "RunConfig",
    "SpottingModel",
    "SpottingReport",
    "arc_iou",
    "evaluate_model",
    "generate_dataset",
    "generate_synthetic",
    "load_checkpoint",
    "load_config",
    "load_dataset",
    "panoptic_inference",
    "panoptic_quality",
    "predict_drawing",
    "save_config",
    "save_dataset",
    "train",
    "__version__",
]
