"""Seeded synthetic test images drawn from a Gaussian mixture."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimation import GaussianMode, MixtureModel
from .image_core import GrayImage, IntensityField, quantize

TWO_MODE = MixtureModel((GaussianMode(0.5, 0.3, 0.05), GaussianMode(0.5, 0.7, 0.05)))


@dataclass(frozen=True)
class SynthSpec:
    width: int
    height: int
    model: MixtureModel
    seed: int = 0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"dimensions must be >= 1, got {self.width}x{self.height}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def sample_mixture(model: MixtureModel, size: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``size`` values from ``model`` truncated to [0, 1] by rejection."""
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        k = rng.choice(model.K, size=need, p=model.weights)
        v = rng.normal(model.means[k], model.stds[k])
        v = v[(v >= 0.0) & (v <= 1.0)]
        out[filled : filled + v.size] = v
        filled += v.size
    return out


def synth_field(spec: SynthSpec) -> IntensityField:
    rng = np.random.default_rng(spec.seed)
    values = sample_mixture(spec.model, spec.width * spec.height, rng)
    return IntensityField(spec.width, spec.height, values)


def synth_image(spec: SynthSpec) -> GrayImage:
    return quantize(synth_field(spec))
