import math
from collections.abc import Iterator, Sequence
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, PrivateAttr, model_validator
from scipy.special import entr

from lie_entropy_lab.config import DEDUP_TOL, SUPPORT_CAP
from lie_entropy_lab.errors import SupportOverflow
from lie_entropy_lab.groups import (
    Distance,
    GroupElement,
    LieGroupModel,
    assert_same_model,
    candidate_pairs,
    from_array,
    identity,
    mul_batch,
    multiply,
    neighbour_pairs,
    pair_distances,
)
from lie_entropy_lab.logger import logger

Weight = Fraction | float

WEIGHT_SUM_TOL = 1e-12


class Atom(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    element: GroupElement
    weight: Weight


class FinSuppMeasure(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    model: LieGroupModel
    atoms: list[Atom]

    _arrays: np.ndarray | None = PrivateAttr(default=None)

    @model_validator(mode="after")
    def validate_atoms(self):
        if not self.atoms:
            raise ValueError("A measure needs at least one atom.")

        if any(atom.element.model != self.model for atom in self.atoms):
            raise ValueError("Every atom must belong to the measure's group model.")

        weights = [atom.weight for atom in self.atoms]
        if any(weight <= 0 for weight in weights):
            raise ValueError("Atom weights must be positive.")

        if all(isinstance(weight, Fraction) for weight in weights):
            if sum(weights, Fraction(0)) != 1:
                raise ValueError("Rational weights must sum to exactly 1.")
        elif abs(math.fsum(float(weight) for weight in weights) - 1) > WEIGHT_SUM_TOL:
            raise ValueError("Weights must sum to 1.")

        return self

    @classmethod
    def delta(cls, element: GroupElement) -> "FinSuppMeasure":
        return cls(model=element.model, atoms=[Atom(element=element, weight=Fraction(1))])

    @classmethod
    def uniform(cls, elements: Sequence[GroupElement]) -> "FinSuppMeasure":
        weight = Fraction(1, len(elements))
        return cls.from_pairs(elements[0].model, [(item, weight) for item in elements])

    @classmethod
    def from_pairs(
        cls,
        model: LieGroupModel,
        pairs: Sequence[tuple[GroupElement, Weight]],
        dedup_tol: float = DEDUP_TOL,
    ) -> "FinSuppMeasure":
        merged = merge_atoms(model, pairs, dedup_tol)
        return cls(model=model, atoms=[Atom(element=g, weight=w) for g, w in merged])

    @property
    def support_size(self) -> int:
        return len(self.atoms)

    @property
    def elements(self) -> list[GroupElement]:
        return [atom.element for atom in self.atoms]

    @property
    def weights(self) -> list[Weight]:
        return [atom.weight for atom in self.atoms]

    @property
    def weight_array(self) -> np.ndarray:
        return np.array([float(weight) for weight in self.weights])

    @property
    def element_arrays(self) -> np.ndarray:
        if self._arrays is None:
            self._arrays = np.stack([atom.element.array for atom in self.atoms])
        return self._arrays

    @property
    def is_exact(self) -> bool:
        return all(
            atom.element.is_exact and isinstance(atom.weight, Fraction) for atom in self.atoms
        )


def add_weights(first: Weight, second: Weight) -> Weight:
    if isinstance(first, Fraction) and isinstance(second, Fraction):
        return first + second
    return float(first) + float(second)


def merge_atoms(
    model: LieGroupModel,
    pairs: Sequence[tuple[GroupElement, Weight]],
    dedup_tol: float = DEDUP_TOL,
) -> list[tuple[GroupElement, Weight]]:
    """
    Merge coinciding atoms and return them in canonical (sorted key) order.
    Exact elements merge on equality; a pair involving an inexact element merges when its
    chart distance is below `dedup_tol`.
    """
    by_key: dict[tuple, tuple[GroupElement, Weight]] = {}
    for element, weight in pairs:
        key = element.sort_key
        if key in by_key:
            kept, total = by_key[key]
            by_key[key] = (kept, add_weights(total, weight))
        else:
            by_key[key] = (element, weight)

    merged = [by_key[key] for key in sorted(by_key)]
    if all(element.is_exact for element, _ in merged) or len(merged) < 2:
        return merged

    arrays = np.stack([element.array for element, _ in merged])
    candidates = candidate_pairs(model, arrays, dedup_tol)
    mixed = [
        (i, j)
        for i, j in candidates
        if not (merged[i][0].is_exact and merged[j][0].is_exact)
    ]
    if not mixed:
        return merged

    values, far = pair_distances(
        [merged[i][0] for i, _ in mixed],
        [merged[j][0] for _, j in mixed],
    )
    parent = list(range(len(merged)))

    def find(index: int) -> int:
        while parent[index] != index:
            parent[index] = parent[parent[index]]
            index = parent[index]
        return index

    for (i, j), value, is_far in zip(mixed, values, far, strict=True):
        if not is_far and value < dedup_tol:
            root_i, root_j = find(i), find(j)
            parent[max(root_i, root_j)] = min(root_i, root_j)

    groups: dict[int, tuple[GroupElement, Weight]] = {}
    for index, (element, weight) in enumerate(merged):
        root = find(index)
        if root in groups:
            kept, total = groups[root]
            groups[root] = (kept, add_weights(total, weight))
        else:
            groups[root] = (element, weight)

    logger.debug(f"Merged {len(merged) - len(groups)} near-duplicate atoms")
    return [groups[root] for root in sorted(groups)]


def convolve(
    mu: FinSuppMeasure,
    nu: FinSuppMeasure,
    support_cap: int = SUPPORT_CAP,
    dedup_tol: float = DEDUP_TOL,
) -> FinSuppMeasure:
    if mu.model != nu.model:
        assert_same_model(mu.atoms[0].element, nu.atoms[0].element)

    model = mu.model
    raw_count = mu.support_size * nu.support_size
    if raw_count > 64 * support_cap:
        logger.error(f"Convolution would form {raw_count} products, cap is {support_cap}")
        raise SupportOverflow(f"{raw_count} products > cap {support_cap}")

    exact = all(atom.element.is_exact for atom in mu.atoms + nu.atoms)
    pairs: list[tuple[GroupElement, Weight]] = []

    if exact:
        for left in mu.atoms:
            for right in nu.atoms:
                product = multiply(left.element, right.element)
                pairs.append((product, multiply_weights(left.weight, right.weight)))
    else:
        left_arrays = mu.element_arrays[:, None]
        right_arrays = nu.element_arrays[None, :]
        products = mul_batch(model, left_arrays, right_arrays)
        products = products.reshape(raw_count, *model.element_shape)
        weights = [
            multiply_weights(left.weight, right.weight)
            for left in mu.atoms
            for right in nu.atoms
        ]
        pairs = [
            (from_array(model, product), weight)
            for product, weight in zip(products, weights, strict=True)
        ]

    merged = merge_atoms(model, pairs, dedup_tol)
    if len(merged) > support_cap:
        logger.error(f"Convolution support {len(merged)} exceeds cap {support_cap}")
        raise SupportOverflow(f"{len(merged)} atoms > cap {support_cap}")

    return FinSuppMeasure(model=model, atoms=[Atom(element=g, weight=w) for g, w in merged])


def multiply_weights(first: Weight, second: Weight) -> Weight:
    if isinstance(first, Fraction) and isinstance(second, Fraction):
        return first * second
    return float(first) * float(second)


def convolution_powers(
    mu: FinSuppMeasure,
    n: int,
    support_cap: int = SUPPORT_CAP,
) -> Iterator[FinSuppMeasure]:
    """Yield mu^{*1}, ..., mu^{*n}."""
    power = mu
    yield power
    for _ in range(1, n):
        power = convolve(power, mu, support_cap=support_cap)
        yield power


def convolution_power(mu: FinSuppMeasure, n: int, support_cap: int = SUPPORT_CAP) -> FinSuppMeasure:
    if n < 1:
        raise ValueError("Convolution powers start at n = 1.")

    power = mu
    for _ in range(1, n):
        power = convolve(power, mu, support_cap=support_cap)
    return power


def shannon_entropy(mu: FinSuppMeasure) -> float:
    return math.fsum(entr(mu.weight_array).tolist())


class SeparationReport(BaseModel):
    n: int
    M_n: Distance
    S_n: float
    pair_count: int
    union_size: int

    @property
    def is_upper_bound(self) -> bool:
        """S_n computed from the sentinel only bounds the true rate from above."""
        return self.M_n.at_least


class SeparationProfile(BaseModel):
    reports: list[SeparationReport]
    S_mu_estimate: float
    estimate_has_sentinel: bool


def _min_separation(model: LieGroupModel, elements: list[GroupElement]) -> Distance:
    sentinel = Distance(value=model.chart_radius, at_least=True)
    if len(elements) < 2:
        return sentinel

    _, values = neighbour_pairs(elements, model.chart_radius)
    if len(values) == 0:
        return sentinel
    return Distance(value=float(np.min(values)))


def _separation_report(
    model: LieGroupModel,
    n: int,
    union: list[GroupElement],
) -> SeparationReport:
    separation = _min_separation(model, union)
    size = len(union)
    return SeparationReport(
        n=n,
        M_n=separation,
        S_n=-math.log(separation.value) / n,
        pair_count=size * (size - 1) // 2,
        union_size=size,
    )


def _union(model: LieGroupModel, union: list[GroupElement], new: list[GroupElement]):
    pairs = [(element, Fraction(1)) for element in union + new]
    return [element for element, _ in merge_atoms(model, pairs)]


def separation_profile(
    mu: FinSuppMeasure,
    n_max: int,
    support_cap: int = SUPPORT_CAP,
) -> SeparationProfile:
    """Separation reports for n = 1..n_max over supports of mu^{*0}, ..., mu^{*n}."""
    model = mu.model
    union = [identity(model)]
    reports = []

    for n, power in enumerate(convolution_powers(mu, n_max, support_cap), start=1):
        union = _union(model, union, power.elements)
        if len(union) > support_cap:
            raise SupportOverflow(f"union of supports has {len(union)} atoms")
        report = _separation_report(model, n, union)
        logger.info(
            f"Separation n={n}: M_n={report.M_n.value!r}"
            f"{' (lower bound)' if report.M_n.at_least else ''}, union size {len(union)}"
        )
        reports.append(report)

    best = max(reports, key=lambda report: report.S_n)
    return SeparationProfile(
        reports=reports,
        S_mu_estimate=best.S_n,
        estimate_has_sentinel=any(report.is_upper_bound for report in reports),
    )


def separation_rate(
    mu: FinSuppMeasure,
    n: int,
    support_cap: int = SUPPORT_CAP,
) -> SeparationReport:
    if n < 1:
        raise ValueError("Separation rates start at n = 1.")

    model = mu.model
    union = [identity(model)]
    for power in convolution_powers(mu, n, support_cap):
        union = _union(model, union, power.elements)
        if len(union) > support_cap:
            logger.error(f"Union of supports outgrew the cap at n={n}")
            raise SupportOverflow(f"union of supports has {len(union)} atoms")

    return _separation_report(model, n, union)


def rw_entropy_estimate(mu: FinSuppMeasure, n: int, support_cap: int = SUPPORT_CAP) -> float:
    """min over k <= n of H(mu^{*k}) / k, an upper bound for the random walk entropy."""
    if n < 1:
        raise ValueError("Random walk entropy needs n >= 1.")

    return min(
        shannon_entropy(power) / k
        for k, power in enumerate(convolution_powers(mu, n, support_cap), start=1)
    )
