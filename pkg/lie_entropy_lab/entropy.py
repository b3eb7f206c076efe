import math
from collections.abc import Callable

import numpy as np
from pydantic import BaseModel
from scipy.special import digamma
from sklearn.neighbors import KDTree

from lie_entropy_lab.config import QUADRATURE_RTOL, ROUNDOFF_FLOOR
from lie_entropy_lab.errors import DegenerateDensity, InsufficientSamples
from lie_entropy_lab.groups import GroupElement, LieGroupModel, jacobian_batch
from lie_entropy_lab.kernels import (
    SmoothingKernel,
    algebra_log_density_batch,
    group_log_density_batch,
    kernel_entropy,
    sample_kernel,
)
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import FinSuppMeasure
from lie_entropy_lab.mixtures import SmoothedMixture
from lie_entropy_lab.montecarlo import EntropyEstimate, RngStream, run_chunked

LogDensity = Callable[[np.ndarray], np.ndarray]
PointSampler = Callable[[np.random.Generator, int], np.ndarray]

MIN_KNN_SAMPLES = 1000
# relative accuracy of the radial quadrature behind C_{a,r}, carried into log C_{a,r}
NORMALIZATION_BIAS = 10 * QUADRATURE_RTOL


class AffineCheckReport(BaseModel):
    pushed_entropy: EntropyEstimate
    expected_entropy: float
    entropy_gap: float
    kl_gap: float
    passed: bool


def require_finite(values: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        count = int(np.sum(~np.isfinite(values)))
        logger.error(f"{count} sampled point(s) with zero density while estimating {what}")
        raise DegenerateDensity(f"{count} samples while estimating {what}")
    return values


def chart_bias(kernel: SmoothingKernel, chart_bias_constant: float) -> float:
    """Budget charged for the chart correction of H(s_{a,r}) on non-abelian models."""
    if kernel.model.is_abelian:
        return 0.0
    return chart_bias_constant * kernel.support_radius


def mixture_density(mu: FinSuppMeasure, kernel: SmoothingKernel, x: GroupElement) -> float:
    mixture = SmoothedMixture(mu, kernel)
    return float(np.exp(mixture.log_density_at(x.array[None])[0]))


def smoothed_entropy(
    mu: FinSuppMeasure,
    kernel: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> EntropyEstimate:
    """Resubstitution estimate of H(g s_{a,r}) for g ~ mu."""
    mixture = SmoothedMixture(mu, kernel)

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        return -mixture.log_density(mixture.sample(generator, size))

    values = require_finite(run_chunked(sampler, n_samples, rng, threads), "H(g s)")
    return EntropyEstimate.from_samples(values, bias_budget=NORMALIZATION_BIAS)


def _scale_contrast(mixture: SmoothedMixture, source: np.ndarray, unit: np.ndarray) -> np.ndarray:
    # -log p_{g s}(g_i s) + log p_s(s): its mean is H(g s) - H(s)
    sample = mixture.realize(source, unit)
    return -mixture.log_density(sample) + group_log_density_batch(mixture.kernel, sample.coords)


def entropy_at_scale(
    mu: FinSuppMeasure,
    kernel: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    chart_bias_constant: float = 1.0,
) -> EntropyEstimate:
    """
    H_a(g; r) = H(g s_{a,r}) - H(s_{a,r}).
    Both terms are estimated on the same draws of s, so the normalizing constant cancels.
    """
    mixture = SmoothedMixture(mu, kernel)

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        return _scale_contrast(mixture, *mixture.draw(generator, size))

    values = require_finite(run_chunked(sampler, n_samples, rng, threads), "H_a(g; r)")
    estimate = EntropyEstimate.from_samples(values)
    bias = ROUNDOFF_FLOOR * (1 + abs(estimate.value)) + chart_bias(kernel, chart_bias_constant)
    return estimate.model_copy(update={"bias_budget": bias})


def entropy_between_scales(
    mu: FinSuppMeasure,
    a: float,
    r1: float,
    r2: float,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    chart_bias_constant: float = 1.0,
) -> EntropyEstimate:
    """
    H_a(g; r1 | r2) = H_a(g; r1) - H_a(g; r2).
    Both scales share the atom draws and the unit kernel draws, rescaled by r1 and r2.
    """
    if not r1 < r2:
        raise ValueError("entropy_between_scales needs r1 < r2.")

    fine = SmoothedMixture(mu, SmoothingKernel(model=mu.model, a=a, r=r1))
    coarse = SmoothedMixture(mu, SmoothingKernel(model=mu.model, a=a, r=r2))

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        source, unit = fine.draw(generator, size)
        return _scale_contrast(fine, source, unit) - _scale_contrast(coarse, source, unit)

    values = require_finite(run_chunked(sampler, n_samples, rng, threads), "H_a(g; r1|r2)")
    estimate = EntropyEstimate.from_samples(values)
    bias = (
        ROUNDOFF_FLOOR * (1 + abs(estimate.value))
        + chart_bias(fine.kernel, chart_bias_constant)
        + chart_bias(coarse.kernel, chart_bias_constant)
    )
    return estimate.model_copy(update={"bias_budget": bias})


def kl_divergence(
    nu_log_density: LogDensity,
    mu_log_density: LogDensity,
    sampler_nu: PointSampler,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> EntropyEstimate:
    """
    D(nu || mu) = -E_nu[log(d nu / d mu)], with this sign D(nu || Haar) = H(nu).
    Densities are passed as log densities on stacked points.
    """

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        points = sampler_nu(generator, size)
        reference = mu_log_density(points)
        if np.any(~np.isfinite(reference)):
            logger.error("Reference measure has zero density at a sample of nu")
            raise DegenerateDensity("nu is not absolutely continuous on the sampled support")
        return reference - nu_log_density(points)

    values = run_chunked(sampler, n_samples, rng, threads)
    return EntropyEstimate.from_samples(values)


def knn_entropy_oracle(
    samples: np.ndarray,
    k: int = 3,
    model: LieGroupModel | None = None,
    generator: np.random.Generator | None = None,
) -> float:
    """
    Kozachenko-Leonenko entropy estimate (max-norm balls) of chart-coordinate samples.
    With a group model the chart Jacobian converts the value to entropy relative to Haar.
    Bias decays like n^{-1/dim}.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]

    count, dim = samples.shape
    if count < MIN_KNN_SAMPLES:
        raise InsufficientSamples(f"{count} < {MIN_KNN_SAMPLES}")

    points = samples
    if generator is not None:
        # break ties between repeated samples
        points = samples + 1e-10 * generator.standard_normal(samples.shape)

    tree = KDTree(points, metric="chebyshev")
    distances, _ = tree.query(points, k=k + 1)
    radii = np.maximum(distances[:, k], np.finfo(float).tiny)

    value = digamma(count) - digamma(k) + dim * math.log(2) + dim * float(np.mean(np.log(radii)))
    if model is not None:
        value -= float(np.mean(np.log(jacobian_batch(model, samples))))
    return float(value)


def kernel_entropy_on_group(
    kernel: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> EntropyEstimate:
    """H(s_{a,r}) = H(beta_{a,r}) - E[log j(beta_{a,r})]: quadrature plus a chart MC term."""
    quadrature_value = kernel_entropy(kernel).quadrature_value
    if kernel.model.is_abelian:
        return EntropyEstimate(
            value=quadrature_value,
            std_error=0.0,
            n_samples=n_samples,
            bias_budget=NORMALIZATION_BIAS * (1 + abs(quadrature_value)),
        )

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        return np.log(jacobian_batch(kernel.model, sample_kernel(kernel, generator, size)))

    correction = EntropyEstimate.from_samples(run_chunked(sampler, n_samples, rng, threads))
    return EntropyEstimate(
        value=quadrature_value - correction.value,
        std_error=correction.std_error,
        n_samples=n_samples,
        bias_budget=NORMALIZATION_BIAS * (1 + abs(quadrature_value)),
    )


def affine_pushforward_check(
    kernel: SmoothingKernel,
    matrix: np.ndarray,
    offset: np.ndarray,
    n_samples: int,
    rng: RngStream,
    sigmas: float = 4.0,
) -> "AffineCheckReport":
    """
    On the abelian model, the image of beta under x -> A x + b has entropy
    H(beta) + log|det A|, and KL divergences are unchanged by the map.
    """
    if not kernel.model.is_abelian:
        raise ValueError("The affine change of variables is checked on the abelian model only.")

    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    offset = np.asarray(offset, dtype=float)
    inverse = np.linalg.inv(matrix)
    log_det = float(np.log(abs(np.linalg.det(matrix))))
    widened = kernel.r * 1.25
    wider = kernel.with_scale(widened) if kernel.a * widened < kernel.model.chart_radius else kernel

    def pushed(base: SmoothingKernel) -> LogDensity:
        return lambda y: algebra_log_density_batch(base, (y - offset) @ inverse.T) - log_det

    def sample_pushed(generator: np.random.Generator, size: int) -> np.ndarray:
        return sample_kernel(kernel, generator, size) @ matrix.T + offset

    def sample_base(generator: np.random.Generator, size: int) -> np.ndarray:
        return sample_kernel(kernel, generator, size)

    pushed_entropy = kl_divergence(
        pushed(kernel), lambda y: np.zeros(y.shape[0]), sample_pushed, n_samples, rng.child(0)
    )
    expected_entropy = kernel_entropy(kernel).quadrature_value + log_det

    def base_density(base: SmoothingKernel) -> LogDensity:
        return lambda x: algebra_log_density_batch(base, x)

    base_kl = kl_divergence(
        base_density(kernel), base_density(wider), sample_base, n_samples, rng.child(1)
    )
    pushed_kl = kl_divergence(
        pushed(kernel), pushed(wider), sample_pushed, n_samples, rng.child(1)
    )

    entropy_gap = abs(pushed_entropy.value - expected_entropy)
    kl_gap = abs(pushed_kl.value - base_kl.value)
    return AffineCheckReport(
        pushed_entropy=pushed_entropy,
        expected_entropy=expected_entropy,
        entropy_gap=entropy_gap,
        kl_gap=kl_gap,
        passed=bool(
            entropy_gap <= pushed_entropy.tolerance(sigmas) + NORMALIZATION_BIAS
            and kl_gap <= sigmas * math.hypot(pushed_kl.std_error, base_kl.std_error) + 1e-9
        ),
    )
