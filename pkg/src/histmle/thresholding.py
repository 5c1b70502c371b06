"""Binarization thresholds and binary maps."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np

from .estimation import MixtureModel
from .histogram import Histogram
from .image_core import GrayImage, IntensityField


class DegenerateHistogram(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdSet:
    values: tuple[float, ...]
    method: Literal["midrange", "otsu", "modal-midpoint"]

    def __post_init__(self):
        v = tuple(float(t) for t in self.values)
        object.__setattr__(self, "values", v)
        if any(not 0.0 <= t <= 1.0 for t in v):
            raise ValueError(f"thresholds must lie in [0, 1], got {v}")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError(f"thresholds must be strictly increasing, got {v}")


@dataclass(frozen=True, eq=False)
class BinaryMap:
    width: int
    height: int
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.size != self.width * self.height:
            raise ValueError("bits length must equal width * height")
        bits = bits.reshape(self.height, self.width).copy()
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    def to_image(self) -> GrayImage:
        return GrayImage(self.width, self.height, self.bits * 255)

    def __eq__(self, other):
        if not isinstance(other, BinaryMap):
            return NotImplemented
        return bool(np.array_equal(self.bits, other.bits))

    __hash__ = None


def midrange_threshold(field: IntensityField) -> float:
    v = field.flat()
    return (float(v.max()) + float(v.min())) / 2


def otsu_threshold(hist: Histogram) -> float:
    """Bin edge maximising the between-class variance; ties go to the lowest edge."""
    if np.count_nonzero(hist.counts) < 2:
        raise DegenerateHistogram("Otsu needs at least two non-empty bins")
    # Bin centres are affine in the bin index, so with index moments the
    # criterion is (s0*n1 - s1*n0)^2 / (n0*n1) up to a constant factor:
    # a ratio of integers, compared exactly so ties really are ties.
    counts = [int(c) for c in hist.counts]
    n = sum(counts)
    s = sum(j * c for j, c in enumerate(counts))
    best_num, best_den, best_t = 0, 1, None
    n0 = s0 = 0
    for t in range(1, len(counts)):
        n0 += counts[t - 1]
        s0 += (t - 1) * counts[t - 1]
        n1 = n - n0
        if n0 == 0 or n1 == 0:
            continue
        num = (s0 * n1 - (s - s0) * n0) ** 2
        den = n0 * n1
        if best_t is None or num * best_den > best_num * den:
            best_num, best_den, best_t = num, den, t
    return float(hist.grid.origin + best_t * hist.grid.width)


def modal_midpoints(model: MixtureModel) -> ThresholdSet:
    if model.K < 2:
        raise ValueError("need at least two modes to separate")
    mu = model.means
    return ThresholdSet(tuple((mu[:-1] + mu[1:]) / 2), "modal-midpoint")


def binarize(field: IntensityField, t: float) -> BinaryMap:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    return BinaryMap(field.width, field.height, (field.values >= t).astype(np.uint8))
