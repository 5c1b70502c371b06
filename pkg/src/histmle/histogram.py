"""Bin grid, sample counting and the piecewise-constant density estimator."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .image_core import IntensityField


class OutOfRange(ValueError):
    def __init__(self, msg, index=None):
        super().__init__(msg)
        self.index = index


class EmptyInput(ValueError):
    pass


@dataclass(frozen=True)
class BinGrid:
    """Bins [origin + j*width, origin + (j+1)*width) for j = 0..bin_count-1.

    The last bin is closed on the right so the grid's top edge has a home.
    """

    origin: float
    width: float
    bin_count: int

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"bin width must be positive, got {self.width}")
        if self.bin_count < 1:
            raise ValueError(f"bin_count must be >= 1, got {self.bin_count}")

    @property
    def top(self) -> float:
        return self.origin + self.bin_count * self.width

    def edges(self) -> np.ndarray:
        return self.origin + np.arange(self.bin_count + 1) * self.width

    def centers(self) -> np.ndarray:
        return self.origin + (np.arange(self.bin_count) + 0.5) * self.width

    def indices(self, x) -> np.ndarray:
        """Vectorised bin lookup; raises OutOfRange on the first bad value."""
        x = np.asarray(x, dtype=np.float64)
        bad = ~((x >= self.origin) & (x <= self.top))
        if bad.any():
            i = int(np.flatnonzero(bad.ravel())[0])
            raise OutOfRange(
                f"value {x.ravel()[i]!r} at index {i} outside [{self.origin}, {self.top}]",
                index=i,
            )
        j = np.floor((x - self.origin) / self.width).astype(np.int64)
        j = np.clip(j, 0, self.bin_count - 1)
        # floor() of the ratio can land one bin off near an edge; settle it
        # against the edges exactly as the bins are defined
        left = self.origin + j * self.width
        j = np.where(x < left, j - 1, j)
        right = self.origin + (j + 1) * self.width
        j = np.where((x >= right) & (j < self.bin_count - 1), j + 1, j)
        return j


def bin_index(grid: BinGrid, x: float) -> int:
    """Zero-based index of the bin holding ``x``."""
    return int(grid.indices(x))


@dataclass(frozen=True, eq=False)
class Histogram:
    grid: BinGrid
    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.shape != (self.grid.bin_count,):
            raise ValueError("counts length must equal grid.bin_count")
        if (counts < 0).any():
            raise ValueError("counts must be non-negative")
        if counts.sum() < 1:
            raise EmptyInput("histogram holds no samples")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    def densities(self) -> np.ndarray:
        """f*_h on every bin: count / (n * h)."""
        return self.counts / (self.n * self.grid.width)

    def probabilities(self) -> np.ndarray:
        return self.counts / self.n

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.counts, other.counts))

    __hash__ = None


def build_histogram(samples, grid: BinGrid) -> Histogram:
    samples = np.asarray(samples, dtype=np.float64).ravel()
    if samples.size == 0:
        raise EmptyInput("no samples to count")
    j = grid.indices(samples)
    return Histogram(grid, np.bincount(j, minlength=grid.bin_count))


def density(hist: Histogram, x: float) -> float:
    j = bin_index(hist.grid, x)
    return hist.counts[j] / (hist.n * hist.grid.width)


def level_grid(bins: int = 256) -> BinGrid:
    return BinGrid(0.0, 1.0 / bins, bins)


def image_histogram(field: IntensityField, bins: int = 256) -> Histogram:
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    return build_histogram(field.flat(), level_grid(bins))


def merge(a: Histogram, b: Histogram) -> Histogram:
    if a.grid != b.grid:
        raise ValueError("cannot merge histograms on different grids")
    return Histogram(a.grid, a.counts + b.counts)


def histogram_csv(grid: BinGrid, counts, dens) -> str:
    """Render ``bin_left,bin_right,count,density`` rows.

    ``counts`` may be real-valued (expected counts of a model density).
    """
    edges = grid.edges()
    out = io.StringIO()
    out.write("bin_left,bin_right,count,density\n")
    for j in range(grid.bin_count):
        c = counts[j]
        c = str(int(c)) if float(c).is_integer() else format(float(c), ".12g")
        out.write(
            f"{edges[j]:.12g},{edges[j + 1]:.12g},{c},{float(dens[j]):.12g}\n"
        )
    return out.getvalue()


def to_csv(hist: Histogram) -> str:
    return histogram_csv(hist.grid, hist.counts, hist.densities())
