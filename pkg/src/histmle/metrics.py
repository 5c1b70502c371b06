"""Contrast measures used to compare an image before and after enhancement."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .histogram import Histogram, image_histogram
from .image_core import GrayImage, IntensityField, normalize


@dataclass(frozen=True)
class MetricRecord:
    rms_contrast: float
    michelson: float | None  # None when max + min == 0
    entropy_bits: float
    min_level: int
    max_level: int

    def to_dict(self) -> dict:
        return asdict(self)


def rms_contrast(field: IntensityField) -> float:
    """Population standard deviation of the intensities."""
    v = field.flat()
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))


def michelson_contrast(field: IntensityField) -> float | None:
    v = field.flat()
    lo, hi = float(v.min()), float(v.max())
    if hi + lo == 0:
        return None
    return (hi - lo) / (hi + lo)


def shannon_entropy(hist: Histogram) -> float:
    p = hist.counts[hist.counts > 0] / hist.n
    return float(-np.sum(p * np.log2(p))) + 0.0


def measure(image: GrayImage) -> MetricRecord:
    field = normalize(image)
    return MetricRecord(
        rms_contrast=rms_contrast(field),
        michelson=michelson_contrast(field),
        entropy_bits=shannon_entropy(image_histogram(field, 256)),
        min_level=int(image.levels.min()),
        max_level=int(image.levels.max()),
    )
