from collections.abc import Iterator

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.special import logsumexp

from lie_entropy_lab.groups import exp_batch, inv_batch, log_batch, mul_batch, neighbour_lists
from lie_entropy_lab.kernels import SmoothingKernel, group_log_density_batch, sample_unit_kernel
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import FinSuppMeasure

# Two points within a*r of a common point are within this multiple of a*r of each other,
# up to second order corrections in the chart.
PRUNING_FACTOR = 3.0


class MixtureSample(BaseModel):
    """Points g_source * exp(coords), with coords drawn from the kernel."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    source: np.ndarray
    coords: np.ndarray
    points: np.ndarray


class ComponentTerms(BaseModel):
    """Per-component log densities for the samples `rows`, all drawn from one source atom."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    rows: np.ndarray
    candidates: np.ndarray
    relative_coords: np.ndarray
    log_components: np.ndarray


def component_log_densities(
    kernel: SmoothingKernel,
    inverses: np.ndarray,
    points: np.ndarray,
    source_position: int | None = None,
    source_coords: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    log density of g_j s_{a,r} at each point, for the atoms whose inverses are given.
    Returns chart coordinates log(g_j^-1 x) with shape (m, q, dim) and log densities (m, q).
    When the sampled coordinates of the source atom are known they replace the recomputed ones.
    """
    model = kernel.model
    count, size = points.shape[0], inverses.shape[0]

    relative = mul_batch(model, inverses[None], points[:, None])
    flat = relative.reshape(count * size, *model.element_shape)
    coords, inside = log_batch(model, flat)
    coords = coords.reshape(count, size, model.dim)
    inside = inside.reshape(count, size)

    if source_position is not None and source_coords is not None:
        coords[:, source_position] = source_coords
        inside[:, source_position] = True

    safe = np.where(inside[..., None], coords, 0.0)
    log_density = group_log_density_batch(kernel, safe.reshape(count * size, model.dim))
    log_density = np.where(inside, log_density.reshape(count, size), -np.inf)
    return coords, log_density


class SmoothedMixture:
    """The law of g*s_{a,r} for g ~ measure, evaluated through its Haar density."""

    def __init__(self, measure: FinSuppMeasure, kernel: SmoothingKernel):
        self.measure = measure
        self.kernel = kernel
        self.model = measure.model
        self.elements = measure.element_arrays
        self.inverses = inv_batch(self.model, self.elements)
        self.weights = measure.weight_array
        self.log_weights = np.log(self.weights)
        self.cumulative = np.cumsum(self.weights)
        self.neighbours = self._neighbours()

    def _neighbours(self) -> list[np.ndarray] | None:
        radius = PRUNING_FACTOR * self.kernel.support_radius
        if radius >= self.model.chart_radius or self.measure.support_size == 1:
            return None

        neighbours = neighbour_lists(self.model, self.elements, radius)
        logger.debug(
            f"Neighbour pruning at radius {radius!r}: "
            f"max {max(len(found) for found in neighbours)} of {len(neighbours)} atoms"
        )
        return neighbours

    def candidates(self, index: int) -> np.ndarray:
        if self.neighbours is None:
            return np.arange(self.measure.support_size)
        return self.neighbours[index]

    def draw(self, generator: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Source atom indices and unit-scale kernel samples."""
        uniform = generator.random(size) * self.cumulative[-1]
        source = np.searchsorted(self.cumulative, uniform, side="right")
        source = np.minimum(source, self.measure.support_size - 1)
        unit = sample_unit_kernel(self.model.dim, self.kernel.a, generator, size)
        return source, unit

    def realize(self, source: np.ndarray, unit: np.ndarray) -> MixtureSample:
        coords = self.kernel.r * unit
        points = mul_batch(self.model, self.elements[source], exp_batch(self.model, coords))
        return MixtureSample(source=source, coords=coords, points=points)

    def sample(self, generator: np.random.Generator, size: int) -> MixtureSample:
        return self.realize(*self.draw(generator, size))

    def component_terms(self, sample: MixtureSample) -> Iterator[ComponentTerms]:
        order = np.argsort(sample.source, kind="stable")
        atoms, starts = np.unique(sample.source[order], return_index=True)
        stops = [*starts[1:], order.shape[0]]

        for atom, start, stop in zip(atoms, starts, stops, strict=True):
            rows = order[start:stop]
            candidates = self.candidates(int(atom))
            position = int(np.searchsorted(candidates, atom))
            relative_coords, log_components = component_log_densities(
                self.kernel,
                self.inverses[candidates],
                sample.points[rows],
                source_position=position,
                source_coords=sample.coords[rows],
            )
            yield ComponentTerms(
                rows=rows,
                candidates=candidates,
                relative_coords=relative_coords,
                log_components=log_components,
            )

    def log_density(self, sample: MixtureSample) -> np.ndarray:
        out = np.empty(sample.source.shape[0])
        for terms in self.component_terms(sample):
            out[terms.rows] = logsumexp(
                terms.log_components + self.log_weights[terms.candidates],
                axis=1,
            )
        return out

    def log_density_at(self, points: np.ndarray) -> np.ndarray:
        """log density at arbitrary points, against every atom."""
        _, log_components = component_log_densities(self.kernel, self.inverses, points)
        return logsumexp(log_components + self.log_weights, axis=1)
