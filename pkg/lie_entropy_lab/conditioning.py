"""
Conditioning a discrete group variable on a smoothed observation of itself.

For g ~ mu and an independent kernel sample s, the law of g given y = g*s is the posterior over
the atoms, w_i proportional to p_i * density of g_i s at y. Everything here is built on that
finite posterior.
"""

import math
from collections import defaultdict
from collections.abc import Hashable, Sequence
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.special import logsumexp

from lie_entropy_lab.entropy import (
    NORMALIZATION_BIAS,
    entropy_between_scales,
    kernel_entropy_on_group,
    require_finite,
)
from lie_entropy_lab.errors import OutsideChart, ZeroDensityObservation
from lie_entropy_lab.groups import (
    GroupElement,
    exp_batch,
    identity,
    log_batch,
    mul_batch,
    relative_arrays,
)
from lie_entropy_lab.kernels import (
    SmoothingKernel,
    group_log_density_batch,
    kernel_trace,
    sample_kernel,
)
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import FinSuppMeasure, Weight
from lie_entropy_lab.mixtures import SmoothedMixture, component_log_densities
from lie_entropy_lab.montecarlo import EntropyEstimate, RngStream, run_chunked

WITNESS_SCHEME = "condition on g*s_{a,2r}, anchor h = observation"
SUPPORT_SLACK = 1 + 1e-12


class PosteriorWeights(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    measure: FinSuppMeasure
    weights: np.ndarray
    observation: GroupElement

    @model_validator(mode="after")
    def validate_weights(self):
        if self.weights.shape != (self.measure.support_size,):
            raise ValueError("One posterior weight per atom is required.")
        if np.any(self.weights < 0) or abs(float(np.sum(self.weights)) - 1) > 1e-9:
            raise ValueError("Posterior weights must be nonnegative and sum to 1.")
        return self

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights > 0)


class TraceWitness(BaseModel):
    t: float = Field(ge=0)
    radius: float = Field(gt=0)
    scheme: str
    std_error: float = Field(ge=0)


class TraceProductReport(BaseModel):
    product_trace: float
    factor_trace: float
    residual: float
    epsilon: float
    constant: float
    bound_constant: float
    n_samples: int
    passed: bool


class VarianceBoundReport(BaseModel):
    entropy: EntropyEstimate
    trace: float
    bound: float
    excess: float
    epsilon: float
    constant: float
    passed: bool


class EntropyIncreaseReport(BaseModel):
    c: float
    conditional_trace: EntropyEstimate
    entropy_gap: EntropyEstimate
    rhs: float
    margin: float
    tolerance: float
    passed: bool


def _chart_coords(anchor: GroupElement, elements: Sequence[GroupElement]) -> np.ndarray:
    coords, inside = log_batch(anchor.model, relative_arrays([anchor] * len(elements), elements))
    if not np.all(inside):
        offending = np.flatnonzero(~inside).tolist()
        logger.error(f"Atoms {offending} are outside the chart around the anchor")
        raise OutsideChart(f"{len(offending)} atom(s)", offending=offending)
    return coords


def _weighted_trace(weights: np.ndarray, coords: np.ndarray) -> float:
    mean = np.array([math.fsum(column) for column in (weights[:, None] * coords).T])
    second = math.fsum((weights * np.sum(coords**2, axis=-1)).tolist())
    return max(0.0, second - float(mean @ mean))


def trace_about(g0: GroupElement, mu: FinSuppMeasure) -> float:
    """tr_{g0}(g): trace of the covariance of log(g0^-1 g) for g ~ mu."""
    return _weighted_trace(mu.weight_array, _chart_coords(g0, mu.elements))


def posterior_given_smoothed(
    mu: FinSuppMeasure,
    kernel: SmoothingKernel,
    y: GroupElement,
) -> PosteriorWeights:
    mixture = SmoothedMixture(mu, kernel)
    _, log_components = component_log_densities(kernel, mixture.inverses, y.array[None])
    log_joint = log_components[0] + mixture.log_weights

    if not np.any(np.isfinite(log_joint)):
        logger.error("Observation has zero density under every smoothed atom")
        raise ZeroDensityObservation(f"kernel a={kernel.a!r}, r={kernel.r!r}")

    weights = np.exp(log_joint - logsumexp(log_joint))
    return PosteriorWeights(measure=mu, weights=weights / np.sum(weights), observation=y)


def _posterior_rows(mixture: SmoothedMixture, log_components: np.ndarray, candidates: np.ndarray):
    log_joint = log_components + mixture.log_weights[candidates]
    normalizer = logsumexp(log_joint, axis=1, keepdims=True)
    if not np.all(np.isfinite(normalizer)):
        logger.error("Sampled observation has zero density under every smoothed atom")
        raise ZeroDensityObservation("sampled observation")
    return np.exp(log_joint - normalizer)


def _check_witness_radius(sample_coords: np.ndarray, kernel: SmoothingKernel):
    norms = np.linalg.norm(sample_coords, axis=-1)
    if np.any(norms > kernel.support_radius * SUPPORT_SLACK):
        offending = np.flatnonzero(norms > kernel.support_radius * SUPPORT_SLACK).tolist()
        logger.error(f"Anchor constraint violated by {len(offending)} sample(s)")
        raise OutsideChart(f"|log(h^-1 g)| > {kernel.support_radius!r}", offending=offending)


def conditional_trace(
    mu: FinSuppMeasure,
    k2: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> EntropyEstimate:
    """
    E[tr_y(g | y)] for y = g*s: per sample, the exact posterior trace
    sum w_i |X_i|^2 - |sum w_i X_i|^2 with X_i = log(y^-1 g_i).
    """
    mixture = SmoothedMixture(mu, k2)

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        sample = mixture.sample(generator, size)
        _check_witness_radius(sample.coords, k2)
        out = np.zeros(size)

        for terms in mixture.component_terms(sample):
            weights = _posterior_rows(mixture, terms.log_components, terms.candidates)
            live = np.isfinite(terms.log_components)[..., None]
            X = np.where(live, -terms.relative_coords, 0.0)
            first = np.einsum("nq,nqd->nd", weights, X)
            second = np.einsum("nq,nq->n", weights, np.sum(X**2, axis=-1))
            out[terms.rows] = np.maximum(second - np.sum(first**2, axis=-1), 0.0)

        return out

    return EntropyEstimate.from_samples(run_chunked(sampler, n_samples, rng, threads))


def conditional_entropy_given_smoothed(
    mu: FinSuppMeasure,
    k1: SmoothingKernel,
    k2: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> EntropyEstimate:
    """
    H(g s1 | g s2). Outer draws of y = g*s2 each get a posterior-weighted mixture of the
    g_i s1, whose entropy is estimated by resubstitution; both levels use ceil(sqrt(n)) draws.
    """
    if k1.model != mu.model or k2.model != mu.model:
        raise ValueError("Both kernels must live on the measure's group model.")

    outer = SmoothedMixture(mu, k2)
    n_outer = n_inner = math.ceil(math.sqrt(n_samples))

    def inner_entropy(generator: np.random.Generator, weights: np.ndarray, atoms: np.ndarray):
        cumulative = np.cumsum(weights)
        uniform = generator.random(n_inner) * cumulative[-1]
        picks = np.searchsorted(cumulative, uniform, side="right")
        picks = np.minimum(picks, atoms.shape[0] - 1)
        coords = sample_kernel(k1, generator, n_inner)
        points = mul_batch(mu.model, outer.elements[atoms[picks]], exp_batch(mu.model, coords))

        _, log_components = component_log_densities(k1, outer.inverses[atoms], points)
        log_components[np.arange(n_inner), picks] = group_log_density_batch(k1, coords)
        values = -logsumexp(log_components + np.log(weights), axis=1)
        return float(np.mean(require_finite(values, "H(g s1 | g s2)")))

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        sample = outer.sample(generator, size)
        out = np.zeros(size)

        for terms in outer.component_terms(sample):
            posterior = _posterior_rows(outer, terms.log_components, terms.candidates)
            for row, weights in zip(terms.rows, posterior, strict=True):
                live = weights > 0
                out[row] = inner_entropy(generator, weights[live], terms.candidates[live])

        return out

    values = run_chunked(sampler, n_outer, rng, threads)
    return EntropyEstimate.from_samples(values, bias_budget=NORMALIZATION_BIAS)


def trace_at_scale_witness(
    mu: FinSuppMeasure,
    a: float,
    r: float,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> TraceWitness:
    """Lower bound for tr(g; 2ar) from conditioning on g*s_{a,2r} with anchor the observation."""
    k2 = SmoothingKernel(model=mu.model, a=a, r=2 * r)
    radius = k2.support_radius
    estimate = conditional_trace(mu, k2, n_samples, rng, threads)
    return TraceWitness(
        t=estimate.value / radius**2,
        radius=radius,
        scheme=WITNESS_SCHEME,
        std_error=estimate.std_error / radius**2,
    )


def trace_product_check(
    mu_a: FinSuppMeasure,
    kernel: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    anchor: GroupElement | None = None,
    bound_constant: float = 10.0,
) -> TraceProductReport:
    """
    tr_{g0}(a b) against tr_{g0}(a) + tr_e(b) for a ~ mu_a and b ~ s_{a,r}, evaluated on the
    same draws so that the residual isolates the product correction.
    """
    model = mu_a.model
    anchor = anchor if anchor is not None else identity(model)
    atom_coords = _chart_coords(anchor, mu_a.elements)
    relative = relative_arrays([anchor] * mu_a.support_size, mu_a.elements)
    mixture = SmoothedMixture(mu_a, kernel)

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        source, unit = mixture.draw(generator, size)
        Y = kernel.r * unit
        product = mul_batch(model, relative[source], exp_batch(model, Y))
        Z, inside = log_batch(model, product)
        if not np.all(inside):
            logger.error("Product left the chart around the anchor")
            raise OutsideChart("a*b outside chart", offending=np.flatnonzero(~inside).tolist())
        return np.concatenate([Z, atom_coords[source] + Y], axis=-1)

    stacked = run_chunked(sampler, n_samples, rng, threads)
    uniform = np.full(n_samples, 1 / n_samples)
    product_trace = _weighted_trace(uniform, stacked[:, : model.dim])
    factor_trace = _weighted_trace(uniform, stacked[:, model.dim :])

    residual = product_trace - factor_trace
    epsilon = max(float(np.max(np.linalg.norm(atom_coords, axis=-1))), kernel.support_radius)
    constant = abs(residual) / epsilon**3
    return TraceProductReport(
        product_trace=product_trace,
        factor_trace=factor_trace,
        residual=residual,
        epsilon=epsilon,
        constant=constant,
        bound_constant=bound_constant,
        n_samples=n_samples,
        passed=constant <= bound_constant,
    )


def _normalize(pairs: list[tuple[GroupElement, Weight]]) -> list[tuple[GroupElement, Weight]]:
    weights = [weight for _, weight in pairs]
    if all(isinstance(weight, Fraction) for weight in weights):
        total = sum(weights, Fraction(0))
        return [(element, weight / total) for element, weight in pairs]

    total = math.fsum(float(weight) for weight in weights)
    return [(element, float(weight) / total) for element, weight in pairs]


def discrete_conditional_laws(
    joint: Sequence[tuple[Hashable, GroupElement, Weight]],
) -> dict[Hashable, FinSuppMeasure]:
    """Per-label conditional laws of an enumerated joint law of (label, element)."""
    grouped: dict[Hashable, list[tuple[GroupElement, Weight]]] = defaultdict(list)
    for label, element, weight in joint:
        if weight > 0:
            grouped[label].append((element, weight))

    return {
        label: FinSuppMeasure.from_pairs(pairs[0][0].model, _normalize(pairs))
        for label, pairs in grouped.items()
    }


def variance_entropy_bound(
    kernel: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    bound_constant: float = 10.0,
) -> VarianceBoundReport:
    """
    H(g) <= (l/2) log((2 pi e / l) tr(g)) + K eps for g = g0*s_{a,r}, supported in B_eps(g0),
    eps = a*r. Both sides are invariant under the translation by g0.
    """
    dim = kernel.dim
    entropy = kernel_entropy_on_group(kernel, n_samples, rng, threads)
    trace = kernel_trace(kernel)
    bound = dim / 2 * math.log(2 * math.pi * math.e / dim * trace)
    excess = entropy.value - bound
    epsilon = kernel.support_radius
    constant = max(0.0, excess) / epsilon
    return VarianceBoundReport(
        entropy=entropy,
        trace=trace,
        bound=bound,
        excess=excess,
        epsilon=epsilon,
        constant=constant,
        passed=excess <= bound_constant * epsilon + entropy.tolerance(),
    )


def entropy_increase_check(
    mu: FinSuppMeasure,
    k1: SmoothingKernel,
    k2: SmoothingKernel,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    sigmas: float = 4.0,
    slack_constant: float = 1.0,
    chart_bias_constant: float = 1.0,
) -> EntropyIncreaseReport:
    """E[tr_y(g | y)] >= (2/l)(H(g; s1|s2) - c) tr_e(s1) for y = g*s2."""
    if k1.a != k2.a or not k1.r < k2.r:
        raise ValueError("The entropy increase check needs a common a and r1 < r2.")

    dim = mu.model.dim
    trace_s1 = kernel_trace(k1)
    entropy_s1 = kernel_entropy_on_group(k1, n_samples, rng.child(0), threads)
    c = dim / 2 * math.log(2 * math.pi * math.e / dim * trace_s1) - entropy_s1.value

    conditional = conditional_trace(mu, k2, n_samples, rng.child(1), threads)
    gap = entropy_between_scales(
        mu, k1.a, k1.r, k2.r, n_samples, rng.child(2), threads, chart_bias_constant
    )

    scale = 2 / dim * trace_s1
    rhs = scale * (gap.value - c)
    slack = 0.0 if mu.model.is_abelian else scale * slack_constant * k2.support_radius
    noise = math.hypot(conditional.std_error, scale * gap.std_error, scale * entropy_s1.std_error)
    tolerance = (
        sigmas * noise
        + scale * (gap.bias_budget + entropy_s1.bias_budget)
        + slack
    )
    margin = conditional.value - rhs
    return EntropyIncreaseReport(
        c=c,
        conditional_trace=conditional,
        entropy_gap=gap,
        rhs=rhs,
        margin=margin,
        tolerance=tolerance,
        passed=margin >= -tolerance,
    )
