"""Image contrast enhancement from maximum-likelihood mixture statistics."""
from .enhancement import EnhancementResult, PipelineConfig, ShiftStrategy, enhance
from .estimation import FitReport, GaussianMode, MixtureModel
from .image_core import GrayImage, IntensityField, load_pgm, normalize, quantize, save_pgm

__all__ = [
    "EnhancementResult",
    "FitReport",
    "GaussianMode",
    "GrayImage",
    "IntensityField",
    "MixtureModel",
    "PipelineConfig",
    "ShiftStrategy",
    "enhance",
    "load_pgm",
    "normalize",
    "quantize",
    "save_pgm",
]
