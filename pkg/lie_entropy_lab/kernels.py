import math
from functools import lru_cache

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import quad
from scipy.special import entr, gammaln

from lie_entropy_lab.config import QUADRATURE_RTOL
from lie_entropy_lab.groups import (
    AlgebraVector,
    GroupElement,
    LieGroupModel,
    assert_same_model,
    exp_batch,
    jacobian_batch,
    log_batch,
    relative_arrays,
)

QUADRATURE_LIMIT = 200


class SmoothingKernel(BaseModel):
    """The truncated Gaussian beta_{a,r} on the Lie algebra and its image s_{a,r} = exp(beta)."""

    model_config = ConfigDict(frozen=True)

    model: LieGroupModel
    a: float = Field(ge=1)
    r: float = Field(gt=0)

    @model_validator(mode="after")
    def validate_chart(self):
        if self.a * self.r >= self.model.chart_radius:
            raise ValueError(
                f"constraint a*r < chart_radius violated: a*r = {self.a * self.r!r}, "
                f"chart_radius = {self.model.chart_radius!r} for {self.model.display_name}"
            )
        return self

    @property
    def dim(self) -> int:
        return self.model.dim

    @property
    def support_radius(self) -> float:
        return self.a * self.r

    def with_scale(self, r: float) -> "SmoothingKernel":
        return SmoothingKernel(model=self.model, a=self.a, r=r)


class KernelEntropy(BaseModel):
    formula_value: float
    quadrature_value: float

    @property
    def residual(self) -> float:
        return self.formula_value - self.quadrature_value


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere in R^dim."""
    return math.exp(math.log(2) + dim / 2 * math.log(math.pi) - gammaln(dim / 2))


def _radial_quad(integrand, upper: float) -> float:
    value, _ = quad(integrand, 0, upper, epsabs=0, epsrel=QUADRATURE_RTOL, limit=QUADRATURE_LIMIT)
    return value


@lru_cache(maxsize=256)
def unit_radial_integrals(dim: int, a: float) -> tuple[float, float]:
    """Mass and second moment of e^{-|x|^2/2} restricted to the ball of radius a in R^dim."""
    sphere = sphere_area(dim)
    mass = sphere * _radial_quad(lambda u: u ** (dim - 1) * math.exp(-(u**2) / 2), a)
    second = sphere * _radial_quad(lambda u: u ** (dim + 1) * math.exp(-(u**2) / 2), a)
    return mass, second


def normalizing_constant(kernel: SmoothingKernel) -> float:
    mass, _ = unit_radial_integrals(kernel.dim, kernel.a)
    return kernel.r ** (-kernel.dim) * (1 / mass)


def log_normalizing_constant(kernel: SmoothingKernel) -> float:
    mass, _ = unit_radial_integrals(kernel.dim, kernel.a)
    return -kernel.dim * math.log(kernel.r) - math.log(mass)


def algebra_log_density_batch(kernel: SmoothingKernel, coords: np.ndarray) -> np.ndarray:
    squared = np.sum(np.atleast_2d(coords) ** 2, axis=-1)
    log_density = log_normalizing_constant(kernel) - squared / (2 * kernel.r**2)
    return np.where(squared <= kernel.support_radius**2, log_density, -np.inf)


def algebra_density(kernel: SmoothingKernel, X: AlgebraVector) -> float:
    if X.norm > kernel.support_radius:
        return 0.0
    return normalizing_constant(kernel) * math.exp(-(X.norm**2) / (2 * kernel.r**2))


def sample_unit_kernel(dim: int, a: float, generator: np.random.Generator, size: int) -> np.ndarray:
    """Rejection sampling of beta_{a,1}: standard normals conditioned on |z| <= a."""
    accepted: list[np.ndarray] = []
    needed = size
    acceptance = unit_radial_integrals(dim, a)[0] / (2 * math.pi) ** (dim / 2)

    while needed > 0:
        batch = generator.standard_normal((int(needed / acceptance * 1.1) + 16, dim))
        batch = batch[np.sum(batch**2, axis=-1) <= a**2]
        accepted.append(batch[:needed])
        needed -= accepted[-1].shape[0]

    return np.concatenate(accepted, axis=0) if accepted else np.zeros((0, dim))


def sample_kernel(
    kernel: SmoothingKernel, generator: np.random.Generator, size: int = 1
) -> np.ndarray:
    return kernel.r * sample_unit_kernel(kernel.dim, kernel.a, generator, size)


def sample_group(
    kernel: SmoothingKernel,
    generator: np.random.Generator,
    size: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Samples of s_{a,r} as (chart coordinates, stacked group elements)."""
    coords = sample_kernel(kernel, generator, size)
    return coords, exp_batch(kernel.model, coords)


def kernel_entropy(kernel: SmoothingKernel) -> KernelEntropy:
    dim, r = kernel.dim, kernel.r
    constant = normalizing_constant(kernel)
    sphere = sphere_area(dim)

    # substituting |x| = r*v keeps the integrand on [0, a] for every r
    quadrature_value = _radial_quad(
        lambda v: sphere * (r * v) ** (dim - 1) * r * float(entr(constant * math.exp(-(v**2) / 2))),
        kernel.a,
    )
    formula_value = dim / 2 * math.log(2 * math.pi * math.e * r**2)
    return KernelEntropy(formula_value=formula_value, quadrature_value=quadrature_value)


def kernel_trace(kernel: SmoothingKernel) -> float:
    mass, second = unit_radial_integrals(kernel.dim, kernel.a)
    return kernel.r**2 * second / mass


def group_log_density_batch(kernel: SmoothingKernel, coords: np.ndarray) -> np.ndarray:
    """log of the Haar density of s_{a,r} at exp(coords)."""
    coords = np.atleast_2d(coords)
    log_density = algebra_log_density_batch(kernel, coords)
    inside = np.isfinite(log_density)
    jacobian = np.ones(coords.shape[0])
    if np.any(inside):
        jacobian[inside] = jacobian_batch(kernel.model, coords[inside])
    return log_density + np.log(jacobian)


def group_density(kernel: SmoothingKernel, center: GroupElement, x: GroupElement) -> float:
    assert_same_model(center, x)
    coords, inside = log_batch(kernel.model, relative_arrays([center], [x]))
    if not inside[0]:
        return 0.0
    return float(np.exp(group_log_density_batch(kernel, coords)[0]))
