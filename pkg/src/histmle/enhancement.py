"""Desired-histogram construction by mode-mean shifting, and histogram specification.

The pipeline fits a Gaussian mixture to the image intensities, pushes the
modes up to and including ``pivot`` toward the darkest observed level and
the modes above it toward the brightest, renders the shifted mixture as a
target histogram, and remaps pixels through the CDF-matching lookup table.
"""
from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.special import ndtr

from . import estimation
from .estimation import FitReport, MixtureModel
from .histogram import Histogram, image_histogram
from .image_core import GrayImage, normalize
from .metrics import MetricRecord, measure
from .thresholding import midrange_threshold, modal_midpoints

log = logging.getLogger(__name__)

LEVELS = 256
# CDF comparisons treat values within this distance as equal
CDF_TOL = 1e-12
NARROW_RANGE = 0.1


class ShiftError(ValueError):
    pass


class InvalidPivot(ShiftError):
    pass


class OrderViolation(ShiftError):
    pass


class PipelineError(RuntimeError):
    """A pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


class ShiftStrategy(enum.Enum):
    FULL = "full"
    HALF = "half"


@dataclass(frozen=True)
class ShiftPlan:
    pivot: int  # modes 1..pivot move left, pivot+1..K move right
    deltas: tuple[float, ...]
    strategy: ShiftStrategy
    min_val: float
    max_val: float

    def to_dict(self) -> dict:
        return {
            "pivot": self.pivot,
            "strategy": self.strategy.value,
            "deltas": list(self.deltas),
            "min_val": self.min_val,
            "max_val": self.max_val,
        }


def compute_shift_plan(
    model: MixtureModel,
    min_val: float,
    max_val: float,
    pivot: int,
    strategy: ShiftStrategy = ShiftStrategy.FULL,
) -> ShiftPlan:
    """Per-mode mean displacements that pull the modes apart around ``pivot``.

    Full: every mode k <= pivot moves left by (mu_1 - min_val); every mode
    k > pivot moves right by (max_val - mu_k) / (K - pivot). Half halves both.
    """
    K = model.K
    if not 1 <= pivot <= K - 1:
        raise InvalidPivot(f"pivot must be in [1, {K - 1}] for K={K}, got {pivot}")
    mu = model.means
    if not (min_val <= mu[0] and mu[-1] <= max_val):
        raise ShiftError(
            f"mode means {mu.tolist()} not within [{min_val}, {max_val}]"
        )
    scale = 0.5 if strategy is ShiftStrategy.HALF else 1.0
    left = -(mu[0] - min_val) * scale
    right = (max_val - mu[pivot:]) / (K - pivot) * scale
    deltas = np.concatenate([np.full(pivot, left), right])
    shifted = mu + deltas
    if np.any(np.diff(shifted) <= 0):
        raise OrderViolation(f"shifted means not increasing: {shifted.tolist()}")
    return ShiftPlan(pivot, tuple(deltas.tolist()), strategy, float(min_val), float(max_val))


def apply_shift(model: MixtureModel, plan: ShiftPlan) -> MixtureModel:
    if len(plan.deltas) != model.K:
        raise ShiftError(f"plan has {len(plan.deltas)} deltas for a {model.K}-mode model")
    mu = np.clip(model.means + np.asarray(plan.deltas), plan.min_val, plan.max_val)
    if np.any(np.diff(mu) <= 0):
        raise OrderViolation(f"shifted means not increasing: {mu.tolist()}")
    return estimation.shifted_means(model, mu)


def desired_histogram(model: MixtureModel, levels: int = LEVELS) -> np.ndarray:
    """Probability of each level bin [v/L, (v+1)/L) under the mixture truncated to [0, 1]."""
    if levels < 2:
        raise ValueError(f"levels must be >= 2, got {levels}")
    edges = np.arange(levels + 1) / levels
    z = (edges[:, None] - model.means) / model.stds
    cdf = ndtr(z) @ model.weights
    mass = np.diff(cdf)
    total = cdf[-1] - cdf[0]
    if not total > 0:
        raise ValueError("mixture puts no mass on [0, 1]")
    return np.maximum(mass, 0.0) / mass.sum()


def level_density(image: GrayImage) -> np.ndarray:
    counts = np.bincount(image.levels.ravel(), minlength=LEVELS)
    return counts / counts.sum()


def specification_lut(source, target) -> np.ndarray:
    """LUT[v] = smallest w with CDF_target(w) >= CDF_source(v)."""
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape:
        raise ValueError("source and target must cover the same levels")
    for name, d in (("source", source), ("target", target)):
        if abs(math.fsum(d) - 1.0) > 1e-9 or (d < 0).any():
            raise ValueError(f"{name} is not a probability distribution")
    cdf_s = np.cumsum(source)
    cdf_t = np.cumsum(target)
    lut = np.searchsorted(cdf_t, cdf_s - CDF_TOL, side="left")
    return np.minimum(lut, source.size - 1)


def remap(image: GrayImage, lut) -> GrayImage:
    lut = np.asarray(lut)
    if lut.shape != (LEVELS,):
        raise ValueError(f"LUT must have {LEVELS} entries, got shape {lut.shape}")
    if lut.min() < 0 or lut.max() > 255:
        raise ValueError("LUT entries must lie in [0, 255]")
    if np.any(np.diff(lut) < 0):
        raise ValueError("LUT must be non-decreasing")
    return GrayImage(image.width, image.height, lut.astype(np.uint8)[image.levels])


@dataclass(frozen=True)
class PipelineConfig:
    modes: int = 2
    estimator: Literal["em", "segmented"] = "em"
    strategy: ShiftStrategy = ShiftStrategy.HALF
    pivot: int | Literal["auto"] = "auto"
    bins: int = 256
    tol: float = estimation.DEFAULT_TOL
    max_iter: int = estimation.DEFAULT_MAX_ITER
    range: Literal["observed", "full"] = "observed"

    def __post_init__(self):
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", ShiftStrategy(self.strategy))
        if self.modes < 1:
            raise ValueError(f"modes must be >= 1, got {self.modes}")
        if self.estimator not in ("em", "segmented"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.range not in ("observed", "full"):
            raise ValueError(f"unknown range {self.range!r}")
        if self.pivot != "auto" and not (
            isinstance(self.pivot, int) and 1 <= self.pivot < self.modes
        ):
            raise ValueError(f"pivot must be 'auto' or an integer in [1, {self.modes - 1}]")
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if not self.tol > 0 or self.max_iter < 1:
            raise ValueError("tol must be positive and max_iter >= 1")

    def resolved_pivot(self) -> int:
        return math.ceil(self.modes / 2) if self.pivot == "auto" else int(self.pivot)


@dataclass(frozen=True)
class EnhancementResult:
    enhanced: GrayImage
    source_hist: Histogram
    desired: np.ndarray  # probability per 8-bit level
    lut: np.ndarray
    fit: FitReport
    plan: ShiftPlan
    shifted: MixtureModel
    threshold: float  # midrange threshold of the input
    metrics_before: MetricRecord
    metrics_after: MetricRecord
    warnings: tuple[str, ...] = field(default=())

    def report(self, stationarity=None) -> dict:
        out = {
            "fit": self.fit.to_dict(),
            "threshold": self.threshold,
            "plan": self.plan.to_dict(),
            "shifted_modes": self.shifted.to_dict(),
            "lut": [int(v) for v in self.lut],
            "metrics_before": self.metrics_before.to_dict(),
            "metrics_after": self.metrics_after.to_dict(),
            "warnings": list(self.warnings),
        }
        if stationarity is not None:
            out["stationarity"] = stationarity.to_dict()
        return out


class _stage:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc is not None and not isinstance(exc, PipelineError) and isinstance(exc, Exception):
            raise PipelineError(self.name, exc) from exc
        return False


def fit_image(samples, config: PipelineConfig, hist: Histogram, threshold: float) -> FitReport:
    K = config.modes
    if config.estimator == "em":
        return estimation.fit_mixture_em(
            samples, K, tol=config.tol, max_iter=config.max_iter, hist=hist
        )
    if K == 1:
        thresholds = ()
    elif K == 2:
        thresholds = (threshold,)
    else:
        pre = estimation.fit_mixture_em(
            samples, K, tol=config.tol, max_iter=config.max_iter, hist=hist
        )
        thresholds = modal_midpoints(pre.model).values
    return estimation.fit_mixture_segmented(samples, thresholds, hist=hist)


def enhance(image: GrayImage, config: PipelineConfig = PipelineConfig()) -> EnhancementResult:
    warnings = []
    with _stage("normalize"):
        fld = normalize(image)
        x = fld.flat()
    with _stage("histogram"):
        hist = image_histogram(fld, config.bins)
    with _stage("threshold"):
        threshold = midrange_threshold(fld)
        lo, hi = float(x.min()), float(x.max())
        if hi - lo < NARROW_RANGE:
            msg = (
                f"dynamic range {hi - lo:.4f} is below {NARROW_RANGE}; "
                "shifts scale with max - min and may be extreme"
            )
            log.warning(msg)
            warnings.append(msg)
    with _stage("estimation"):
        if config.modes > 1 and np.ptp(x) < estimation.SIGMA_MIN:
            raise estimation.DegenerateVariance("image is constant; no modes to separate")
        fit = fit_image(x, config, hist, threshold)
    with _stage("shift"):
        if config.range == "full":
            lo, hi = 0.0, 1.0
        # a mean is a weighted average of samples but may round an ulp past them
        mu = fit.model.means
        lo, hi = min(lo, float(mu[0])), max(hi, float(mu[-1]))
        plan = compute_shift_plan(fit.model, lo, hi, config.resolved_pivot(), config.strategy)
        shifted = apply_shift(fit.model, plan)
    with _stage("desired"):
        desired = desired_histogram(shifted, LEVELS)
    with _stage("specification"):
        lut = specification_lut(level_density(image), desired)
    with _stage("remap"):
        out = remap(image, lut)
    with _stage("metrics"):
        before, after = measure(image), measure(out)
    return EnhancementResult(
        enhanced=out,
        source_hist=hist,
        desired=desired,
        lut=lut,
        fit=fit,
        plan=plan,
        shifted=shifted,
        threshold=threshold,
        metrics_before=before,
        metrics_after=after,
        warnings=tuple(warnings),
    )
