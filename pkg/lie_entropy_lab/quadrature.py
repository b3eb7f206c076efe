"""
One-dimensional quadrature on the abelian line.

These give deterministic reference values for smoothed two-atom laws and for the family of
compactly supported densities used by the entropy inequalities.
"""

import math
from collections.abc import Callable, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import stats
from scipy.integrate import quad
from scipy.special import entr

from lie_entropy_lab.kernels import SmoothingKernel, kernel_entropy, normalizing_constant

Density = Callable[[float], float]

QUAD_OPTIONS = {"epsabs": 1e-13, "epsrel": 1e-11, "limit": 200}


class CompactDensity(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    density: Density
    lower: float
    upper: float
    breakpoints: tuple[float, ...] = ()


def _segments(
    lower: float, upper: float, breakpoints: Sequence[float]
) -> list[tuple[float, float]]:
    edges = sorted({lower, upper, *(x for x in breakpoints if lower < x < upper)})
    return list(zip(edges[:-1], edges[1:], strict=True))


def integrate(
    function: Density, lower: float, upper: float, breakpoints: Sequence[float] = ()
) -> float:
    return math.fsum(
        quad(function, left, right, **QUAD_OPTIONS)[0]
        for left, right in _segments(lower, upper, breakpoints)
    )


def density_entropy(item: CompactDensity) -> float:
    def integrand(x: float) -> float:
        return float(entr(item.density(x)))

    return integrate(integrand, item.lower, item.upper, item.breakpoints)


def density_mean_variance(item: CompactDensity) -> tuple[float, float]:
    mean = integrate(lambda x: x * item.density(x), item.lower, item.upper, item.breakpoints)
    second = integrate(lambda x: x * x * item.density(x), item.lower, item.upper, item.breakpoints)
    return mean, second - mean**2


def kl_divergence_1d(first: CompactDensity, second: CompactDensity) -> float:
    """D(first || second) = -int first log(first/second), on the support of `first`."""

    def integrand(x: float) -> float:
        p = first.density(x)
        if p <= 0:
            return 0.0
        return -p * math.log(p / second.density(x))

    return integrate(integrand, first.lower, first.upper, (*first.breakpoints, *second.breakpoints))


def kernel_density_1d(kernel: SmoothingKernel) -> Density:
    constant = normalizing_constant(kernel)
    radius = kernel.support_radius

    def density(x: float) -> float:
        if abs(x) > radius:
            return 0.0
        return constant * math.exp(-(x**2) / (2 * kernel.r**2))

    return density


def smoothed_atoms_1d(
    centers: Sequence[float],
    weights: Sequence[float],
    kernel: SmoothingKernel,
    name: str = "smoothed atoms",
) -> CompactDensity:
    base = kernel_density_1d(kernel)
    radius = kernel.support_radius
    pairs = list(zip(centers, weights, strict=True))

    def density(x: float) -> float:
        return sum(weight * base(x - center) for center, weight in pairs)

    breakpoints = tuple(
        point for center in centers for point in (center - radius, center, center + radius)
    )
    return CompactDensity(
        name=name,
        density=density,
        lower=min(centers) - radius,
        upper=max(centers) + radius,
        breakpoints=breakpoints,
    )


def entropy_at_scale_1d(
    centers: Sequence[float], weights: Sequence[float], kernel: SmoothingKernel
) -> float:
    mixture = smoothed_atoms_1d(centers, weights, kernel)
    return density_entropy(mixture) - kernel_entropy(kernel).quadrature_value


def posterior_variance_1d(
    centers: Sequence[float], weights: Sequence[float], kernel: SmoothingKernel
) -> float:
    """E_y[Var(g | y)] for g ~ sum w_i delta_{c_i} observed through y = g + beta_{a,r}."""
    base = kernel_density_1d(kernel)
    mixture = smoothed_atoms_1d(centers, weights, kernel)
    pairs = list(zip(centers, weights, strict=True))

    def integrand(y: float) -> float:
        terms = [(center, weight * base(y - center)) for center, weight in pairs]
        total = sum(term for _, term in terms)
        if total <= 0:
            return 0.0
        first = sum(center * term for center, term in terms)
        second = sum(center * center * term for center, term in terms)
        return second - first**2 / total

    return integrate(integrand, mixture.lower, mixture.upper, mixture.breakpoints)


def compact_density_family() -> list[CompactDensity]:
    """Twenty compactly supported densities on the line."""
    family = [
        CompactDensity(name="uniform[0,1]", density=stats.uniform(0, 1).pdf, lower=0, upper=1),
        CompactDensity(name="uniform[-2,3]", density=stats.uniform(-2, 5).pdf, lower=-2, upper=3),
    ]

    for shape in (0.0, 0.3, 0.5, 1.0):
        family.append(
            CompactDensity(
                name=f"triangular(c={shape})",
                density=stats.triang(shape).pdf,
                lower=0,
                upper=1,
                breakpoints=(shape,),
            )
        )

    for alpha, beta in ((2, 2), (2, 5), (5, 2), (3, 3), (1.5, 4)):
        family.append(
            CompactDensity(
                name=f"beta({alpha},{beta})",
                density=stats.beta(alpha, beta).pdf,
                lower=0,
                upper=1,
            )
        )

    for bound in (1.0, 2.0, 3.0):
        family.append(
            CompactDensity(
                name=f"truncnorm(+-{bound})",
                density=stats.truncnorm(-bound, bound).pdf,
                lower=-bound,
                upper=bound,
            )
        )

    family.append(
        CompactDensity(
            name="cosine bump",
            density=lambda x: (1 + math.cos(math.pi * x)) / 2 if abs(x) <= 1 else 0.0,
            lower=-1,
            upper=1,
        )
    )
    family.append(
        CompactDensity(
            name="epanechnikov",
            density=lambda x: 0.75 * (1 - x * x) if abs(x) <= 1 else 0.0,
            lower=-1,
            upper=1,
        )
    )

    for separation in (0.5, 1.0, 2.0, 4.0):
        family.append(_two_bumps(separation))

    return family


def _two_bumps(separation: float) -> CompactDensity:
    bump = stats.truncnorm(-1, 1, scale=0.5)

    def density(x: float) -> float:
        return 0.5 * bump.pdf(x) + 0.5 * bump.pdf(x - separation)

    return CompactDensity(
        name=f"two bumps (d={separation})",
        density=lambda x: float(density(x)),
        lower=-0.5,
        upper=separation + 0.5,
        breakpoints=(0.5, separation - 0.5),
    )


def variance_entropy_excess(item: CompactDensity) -> float:
    """H(X) - 1/2 log(2 pi e Var X); nonpositive for every density."""
    _, variance = density_mean_variance(item)
    return density_entropy(item) - 0.5 * math.log(2 * math.pi * math.e * variance)


def sample_compact_density(
    item: CompactDensity, generator: np.random.Generator, size: int
) -> np.ndarray:
    """Rejection sampling under the density's maximum on a fine grid."""
    grid = np.linspace(item.lower, item.upper, 2001)
    ceiling = 1.05 * max(item.density(float(x)) for x in grid)
    accepted: list[np.ndarray] = []
    needed = size

    while needed > 0:
        proposals = generator.uniform(item.lower, item.upper, 2 * needed + 16)
        heights = generator.uniform(0, ceiling, proposals.shape[0])
        values = np.array([item.density(float(x)) for x in proposals])
        batch = proposals[heights < values][:needed]
        accepted.append(batch)
        needed -= batch.shape[0]

    return np.concatenate(accepted)
