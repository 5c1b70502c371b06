"""Maximum-likelihood estimation of the modal statistics of an intensity histogram.

Two routes produce a :class:`MixtureModel`:

* ``fit_mixture_em`` maximises the full i.i.d. mixture likelihood with EM;
* ``fit_mixture_segmented`` splits the samples at fixed thresholds and takes
  the closed-form Gaussian MLE of each class.

``check_stationarity`` certifies a fit by the first- and second-order
conditions on each mode mean.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .histogram import BinGrid, EmptyInput, Histogram, build_histogram, level_grid

log = logging.getLogger(__name__)

SIGMA_MIN = 1e-4
WEIGHT_FLOOR = 1e-6
DEFAULT_TOL = 1e-8
DEFAULT_MAX_ITER = 500

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class EstimationError(ValueError):
    pass


class TooFewSamples(EstimationError):
    pass


class DegenerateVariance(EstimationError):
    pass


class CollapsedComponent(EstimationError):
    pass


class EmptyClass(EstimationError):
    pass


@dataclass(frozen=True)
class GaussianMode:
    weight: float
    mean: float
    std: float

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"weight must be in (0, 1], got {self.weight}")
        if not self.std >= SIGMA_MIN:
            raise ValueError(f"std {self.std} below floor {SIGMA_MIN}")


@dataclass(frozen=True)
class MixtureModel:
    modes: tuple[GaussianMode, ...]

    def __post_init__(self):
        modes = tuple(self.modes)
        object.__setattr__(self, "modes", modes)
        if not modes:
            raise ValueError("a mixture needs at least one mode")
        total = math.fsum(m.weight for m in modes)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {total}, not 1")
        means = [m.mean for m in modes]
        if any(b <= a for a, b in zip(means, means[1:])):
            raise ValueError(f"mode means must be strictly increasing, got {means}")

    @classmethod
    def from_arrays(cls, weights, means, stds) -> MixtureModel:
        order = np.argsort(np.asarray(means, dtype=np.float64), kind="stable")
        return cls(
            tuple(
                GaussianMode(float(weights[k]), float(means[k]), float(stds[k]))
                for k in order
            )
        )

    @property
    def K(self) -> int:
        return len(self.modes)

    @property
    def weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.modes])

    @property
    def means(self) -> np.ndarray:
        return np.array([m.mean for m in self.modes])

    @property
    def stds(self) -> np.ndarray:
        return np.array([m.std for m in self.modes])

    def pdf(self, x) -> np.ndarray:
        return np.exp(logsumexp(_component_logpdf(self, x), axis=1))

    def to_dict(self) -> list[dict]:
        return [{"weight": m.weight, "mean": m.mean, "std": m.std} for m in self.modes]


@dataclass(frozen=True)
class FitReport:
    model: MixtureModel
    log_likelihood: float
    iterations: int
    converged: bool
    noise_rms: float
    # log-likelihood at init and after each EM iteration (empty for closed-form fits)
    history: tuple[float, ...] = field(default=(), compare=False)
    reseeded: bool = False

    def to_dict(self) -> dict:
        return {
            "modes": self.model.to_dict(),
            "log_likelihood": self.log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
            "noise_rms": self.noise_rms,
        }


class GaussianEstimate(NamedTuple):
    mean: float
    std: float
    degenerate: bool


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64).ravel()
    if x.size == 0:
        raise EmptyInput("no samples")
    return x


def _component_logpdf(model: MixtureModel, x) -> np.ndarray:
    """log(w_k * phi(x; mu_k, sigma_k)) as an (n, K) array."""
    x = np.asarray(x, dtype=np.float64).reshape(-1, 1)
    w, mu, sd = model.weights, model.means, model.stds
    z = (x - mu) / sd
    return np.log(w) - np.log(sd) - _LOG_SQRT_2PI - 0.5 * z * z


def gaussian_mle(samples) -> GaussianEstimate:
    """Sample mean and 1/n standard deviation, floored at ``SIGMA_MIN``."""
    x = _as_samples(samples)
    mean = float(np.mean(x))
    std = float(np.sqrt(np.mean((x - mean) ** 2)))
    degenerate = std < SIGMA_MIN
    if degenerate:
        log.debug("degenerate variance (std=%g), flooring at %g", std, SIGMA_MIN)
        std = SIGMA_MIN
    return GaussianEstimate(mean, std, degenerate)


def log_likelihood(model: MixtureModel, samples) -> float:
    x = _as_samples(samples)
    return float(np.sum(logsumexp(_component_logpdf(model, x), axis=1)))


def default_histogram(samples) -> Histogram:
    """Histogram used for the noise diagnostic when the caller supplies none."""
    x = _as_samples(samples)
    lo, hi = float(x.min()), float(x.max())
    if lo >= 0.0 and hi <= 1.0:
        grid = level_grid(256)
    else:
        span = max(hi - lo, SIGMA_MIN)
        grid = BinGrid(lo, span / 256, 256)
    return build_histogram(x, grid)


def estimate_noise(hist: Histogram, model: MixtureModel) -> float:
    """RMS residual between the histogram density and the model pdf at bin centres."""
    resid = hist.densities() - model.pdf(hist.grid.centers())
    return float(np.sqrt(np.mean(resid * resid)))


def auto_init(samples, K: int) -> MixtureModel:
    x = _as_samples(samples)
    means = np.quantile(x, np.arange(1, K + 1) / (K + 1))
    std = max(float(np.std(x)) / K, SIGMA_MIN)
    return _build_model(np.full(K, 1.0 / K), means, np.full(K, std))


def _build_model(weights, means, stds) -> MixtureModel:
    stds = np.maximum(stds, SIGMA_MIN)
    weights = weights / weights.sum()
    order = np.argsort(means, kind="stable")
    means = means[order]
    if np.any(np.diff(means) <= 0):
        raise CollapsedComponent(f"mode means coincide: {means.tolist()}")
    return MixtureModel.from_arrays(weights[order], means, stds[order])


def fit_mixture_em(
    samples,
    K: int,
    init: MixtureModel | str = "auto",
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    hist: Histogram | None = None,
) -> FitReport:
    """Fit a K-mode Gaussian mixture to the samples by expectation-maximisation.

    Stops once the relative log-likelihood gain drops below ``tol`` or after
    ``max_iter`` iterations. A component whose weight falls below 1e-6 is
    re-seeded once at the worst-explained sample; a second collapse raises
    :class:`CollapsedComponent`.
    """
    x = _as_samples(samples)
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if x.size < K:
        raise TooFewSamples(f"{x.size} samples cannot support {K} modes")
    if K > 1 and float(np.std(x)) < SIGMA_MIN:
        raise DegenerateVariance(
            f"samples have (near) zero variance; cannot separate {K} modes"
        )
    if K > 1 and np.unique(x).size < K:
        raise TooFewSamples(f"fewer than {K} distinct sample values")

    if isinstance(init, str):
        if init != "auto":
            raise ValueError(f"unknown init {init!r}")
        init = auto_init(x, K)
    elif init.K != K:
        raise ValueError(f"init has {init.K} modes, expected {K}")

    w, mu, sd = init.weights, init.means, init.stds
    # Quantised images repeat a few hundred values; iterate over the distinct
    # values weighted by multiplicity, which leaves every EM sum unchanged.
    xs, mult = np.unique(x, return_counts=True)
    xc = xs.reshape(-1, 1)
    mult = mult.astype(np.float64)
    mc = mult.reshape(-1, 1)
    n = x.size

    def e_step(w, mu, sd):
        z = (xc - mu) / sd
        with np.errstate(divide="ignore"):  # a collapsed weight may be exactly 0
            lp = np.log(w) - np.log(sd) - _LOG_SQRT_2PI - 0.5 * z * z
        row = logsumexp(lp, axis=1)
        return np.exp(lp - row[:, None]), float(np.dot(mult, row)), row

    resp, ll, row = e_step(w, mu, sd)
    history = [ll]
    converged = False
    reseeded = False
    it = 0
    while it < max_iter:
        it += 1
        nk = (mc * resp).sum(axis=0)
        w = nk / n
        if np.any(w < WEIGHT_FLOOR):
            k = int(np.argmin(w))
            if reseeded:
                raise CollapsedComponent(
                    f"component {k} collapsed again (weight {w[k]:.3g}) after re-seeding"
                )
            reseeded = True
            log.info("component %d collapsed (weight %.3g); re-seeding", k, w[k])
            w, mu, sd = _reseed(xs, x, row, w, mu, sd, k)
            resp, ll, row = e_step(w, mu, sd)
            history.append(ll)
            continue
        wr = mc * resp
        mu = (wr * xc).sum(axis=0) / nk
        var = (wr * (xc - mu) ** 2).sum(axis=0) / nk
        sd = np.maximum(np.sqrt(var), SIGMA_MIN)
        resp, new_ll, row = e_step(w, mu, sd)
        history.append(new_ll)
        gain = (new_ll - ll) / abs(ll) if ll != 0 else abs(new_ll - ll)
        ll = new_ll
        if gain < tol:
            converged = True
            break
    log.debug("EM stopped after %d iterations, ll=%.10g, converged=%s", it, ll, converged)

    model = _build_model(w, mu, sd)
    hist = hist if hist is not None else default_histogram(x)
    return FitReport(
        model=model,
        log_likelihood=ll,
        iterations=it,
        converged=converged,
        noise_rms=estimate_noise(hist, model),
        history=tuple(history),
        reseeded=reseeded,
    )


def _reseed(xs, x, row, w, mu, sd, k):
    w = w.copy()
    mu = mu.copy()
    sd = sd.copy()
    mu[k] = xs[int(np.argmin(row))]
    sd[k] = max(float(np.std(x)) / len(w), SIGMA_MIN)
    w[k] = 1.0 / len(w)
    return w / w.sum(), mu, sd


def classify(samples, thresholds: Sequence[float]) -> np.ndarray:
    """Class index per sample; a sample equal to a threshold goes to the upper class."""
    return np.searchsorted(np.asarray(thresholds, dtype=np.float64), samples, side="right")


def fit_mixture_segmented(
    samples, thresholds: Sequence[float], hist: Histogram | None = None
) -> FitReport:
    x = _as_samples(samples)
    t = np.asarray(thresholds, dtype=np.float64).ravel()
    if np.any(np.diff(t) <= 0):
        raise ValueError(f"thresholds must be strictly increasing, got {t.tolist()}")
    labels = classify(x, t)
    K = t.size + 1
    weights, means, stds = [], [], []
    for k in range(K):
        cls = x[labels == k]
        if cls.size == 0:
            lo = -math.inf if k == 0 else t[k - 1]
            hi = math.inf if k == K - 1 else t[k]
            raise EmptyClass(f"no samples in class {k} [{lo}, {hi})")
        est = gaussian_mle(cls)
        if K == 1 and est.degenerate:
            log.warning("single class has degenerate variance; std floored")
        weights.append(cls.size / x.size)
        means.append(est.mean)
        stds.append(est.std)
    model = _build_model(np.array(weights), np.array(means), np.array(stds))
    hist = hist if hist is not None else default_histogram(x)
    return FitReport(
        model=model,
        log_likelihood=log_likelihood(model, x),
        iterations=0,
        converged=True,
        noise_rms=estimate_noise(hist, model),
    )


@dataclass(frozen=True)
class StationarityReport:
    gradient: tuple[float, ...]
    curvature: tuple[float, ...]
    n: int
    eps: float

    @property
    def passed(self) -> bool:
        return all(abs(g) < self.eps * self.n for g in self.gradient) and all(
            c < 0 for c in self.curvature
        )

    def to_dict(self) -> dict:
        return {
            "gradient": list(self.gradient),
            "curvature": list(self.curvature),
            "eps": self.eps,
            "passed": self.passed,
        }


def mean_derivatives(model: MixtureModel, samples) -> tuple[np.ndarray, np.ndarray]:
    """Analytic first and second derivatives of the log-likelihood in each mode mean.

    With responsibilities r and standardised offsets d = (x - mu) / sigma^2,
    dl/dmu = sum r d and d2l/dmu2 = sum r (d^2 - 1/sigma^2) - r^2 d^2.
    """
    x = _as_samples(samples).reshape(-1, 1)
    lp = _component_logpdf(model, x)
    r = np.exp(lp - logsumexp(lp, axis=1, keepdims=True))
    var = model.stds**2
    d = (x - model.means) / var
    grad = (r * d).sum(axis=0)
    curv = (r * (d * d - 1.0 / var) - r * r * d * d).sum(axis=0)
    return grad, curv


def check_stationarity(model: MixtureModel, samples, eps: float = 1e-4) -> StationarityReport:
    x = _as_samples(samples)
    grad, curv = mean_derivatives(model, x)
    return StationarityReport(tuple(grad.tolist()), tuple(curv.tolist()), x.size, eps)


def shifted_means(model: MixtureModel, means) -> MixtureModel:
    """Copy of ``model`` with new means, weights and stds untouched."""
    return MixtureModel(
        tuple(replace(m, mean=float(v)) for m, v in zip(model.modes, means))
    )
