"""
Matrix Lie group models with exp/log charts.

Every model fixes an orthonormal basis of its Lie algebra, which pins the inner product:

- abelian(l): standard basis of R^l, elements are stored as l-vectors.
- sl2r: E = [[0,1],[0,0]], F = [[0,0],[1,0]], H/sqrt(2) = diag(1,-1)/sqrt(2), orthonormal for
  the Frobenius product <A, B> = tr(A^T B).
- so3: axis generators hat(e_1), hat(e_2), hat(e_3), so |X| is the rotation angle.
- heisenberg3: E_12, E_23, E_13 (coordinates x, y, z of [[0,x,z],[0,0,y],[0,0,0]]).

The batch functions (`*_batch`) work on stacked numpy arrays and are what the estimators use;
the scalar operations wrap them for single elements.
"""

from collections.abc import Sequence
from enum import Enum
from fractions import Fraction
from math import pi, sqrt

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from sklearn.neighbors import KDTree

from lie_entropy_lab.errors import ModelMismatchError, OutsideChart
from lie_entropy_lab.logger import logger

ExactEntries = tuple[Fraction, ...] | tuple[tuple[Fraction, ...], ...]

RELATION_TOL = 1e-12
SERIES_THRESHOLD = 1e-8


class ModelName(str, Enum):
    abelian = "abelian"
    sl2r = "sl2r"
    so3 = "so3"
    heisenberg3 = "heisenberg3"

    @property
    def display_name(self):
        match = {
            self.abelian: "Abelian",
            self.sl2r: "SL2R",
            self.so3: "SO3",
            self.heisenberg3: "Heisenberg3",
        }
        return match[self]

    @property
    def default_dim(self) -> int | None:
        match = {
            self.abelian: None,
            self.sl2r: 3,
            self.so3: 3,
            self.heisenberg3: 3,
        }
        return match[self]

    @property
    def chart_radius(self) -> float:
        match = {
            self.abelian: 1.0,
            self.sl2r: 0.5,
            self.so3: pi - 0.01,
            self.heisenberg3: 1.0,
        }
        return match[self]

    @property
    def matrix_size(self) -> int | None:
        match = {
            self.abelian: None,
            self.sl2r: 2,
            self.so3: 3,
            self.heisenberg3: 3,
        }
        return match[self]

    @property
    def hat_norm_factor(self) -> float:
        """Ratio between the Frobenius norm of hat(X) and |X|."""
        return sqrt(2.0) if self is ModelName.so3 else 1.0


class LieGroupModel(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: ModelName
    dim: int

    @model_validator(mode="after")
    def validate_dim(self):
        expected = self.name.default_dim
        if self.dim <= 0:
            raise ValueError("Algebra dimension must be a positive integer.")
        if expected is not None and self.dim != expected:
            raise ValueError(f"{self.name.display_name} has algebra dimension {expected}.")
        return self

    @classmethod
    def create(cls, name: ModelName | str, dim: int | None = None) -> "LieGroupModel":
        name = ModelName(name)
        if dim is None:
            dim = name.default_dim or 1
        return cls(name=name, dim=dim)

    @property
    def chart_radius(self) -> float:
        return self.name.chart_radius

    @property
    def is_abelian(self) -> bool:
        return self.name is ModelName.abelian

    @property
    def element_shape(self) -> tuple[int, ...]:
        size = self.name.matrix_size
        return (self.dim,) if size is None else (size, size)

    @property
    def display_name(self) -> str:
        if self.is_abelian:
            return f"Abelian({self.dim})"
        return self.name.display_name

    def identity_array(self) -> np.ndarray:
        if self.is_abelian:
            return np.zeros(self.dim)
        return np.eye(self.element_shape[0])


# Algebra <-> matrix coordinates


def hat_batch(model: LieGroupModel, coords: np.ndarray) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    n = coords.shape[0]

    if model.name is ModelName.sl2r:
        h = coords[:, 2] / sqrt(2.0)
        out = np.zeros((n, 2, 2))
        out[:, 0, 0] = h
        out[:, 0, 1] = coords[:, 0]
        out[:, 1, 0] = coords[:, 1]
        out[:, 1, 1] = -h
        return out

    if model.name is ModelName.so3:
        out = np.zeros((n, 3, 3))
        out[:, 0, 1] = -coords[:, 2]
        out[:, 0, 2] = coords[:, 1]
        out[:, 1, 0] = coords[:, 2]
        out[:, 1, 2] = -coords[:, 0]
        out[:, 2, 0] = -coords[:, 1]
        out[:, 2, 1] = coords[:, 0]
        return out

    if model.name is ModelName.heisenberg3:
        out = np.zeros((n, 3, 3))
        out[:, 0, 1] = coords[:, 0]
        out[:, 1, 2] = coords[:, 1]
        out[:, 0, 2] = coords[:, 2]
        return out

    return coords.copy()


def vee_batch(model: LieGroupModel, matrices: np.ndarray) -> np.ndarray:
    if model.name is ModelName.sl2r:
        return np.stack(
            [
                matrices[:, 0, 1],
                matrices[:, 1, 0],
                (matrices[:, 0, 0] - matrices[:, 1, 1]) / sqrt(2.0),
            ],
            axis=-1,
        )

    if model.name is ModelName.so3:
        return np.stack([matrices[:, 2, 1], matrices[:, 0, 2], matrices[:, 1, 0]], axis=-1)

    if model.name is ModelName.heisenberg3:
        return np.stack([matrices[:, 0, 1], matrices[:, 1, 2], matrices[:, 0, 2]], axis=-1)

    return np.array(matrices, dtype=float)


def _sl2r_cosh_sinhc(delta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """cosh(phi) and sinh(phi)/phi for phi^2 = delta, continued to delta < 0."""
    phi = np.sqrt(np.abs(delta))
    hyperbolic = delta > 0
    safe_phi = np.where(phi > 0, phi, 1.0)

    with np.errstate(over="ignore"):
        cosh = np.where(hyperbolic, np.cosh(phi), np.cos(phi))
        sinhc = np.where(hyperbolic, np.sinh(phi), np.sin(phi)) / safe_phi

    small = np.abs(delta) < SERIES_THRESHOLD
    cosh = np.where(small, 1 + delta / 2 + delta**2 / 24, cosh)
    sinhc = np.where(small, 1 + delta / 6 + delta**2 / 120, sinhc)
    return cosh, sinhc


def _sl2r_delta(coords: np.ndarray) -> np.ndarray:
    # -det(hat(X)), the square of the eigenvalues of hat(X)
    return coords[:, 2] ** 2 / 2 + coords[:, 0] * coords[:, 1]


def exp_batch(model: LieGroupModel, coords: np.ndarray) -> np.ndarray:
    coords = np.atleast_2d(np.asarray(coords, dtype=float))

    if model.is_abelian:
        return coords.copy()

    matrices = hat_batch(model, coords)
    eye = np.broadcast_to(model.identity_array(), matrices.shape)

    if model.name is ModelName.sl2r:
        cosh, sinhc = _sl2r_cosh_sinhc(_sl2r_delta(coords))
        return cosh[:, None, None] * eye + sinhc[:, None, None] * matrices

    if model.name is ModelName.so3:
        theta = np.linalg.norm(coords, axis=-1)
        small = theta < 1e-4
        safe = np.where(small, 1.0, theta)
        first = np.where(small, 1 - theta**2 / 6, np.sin(safe) / safe)
        second = np.where(small, 0.5 - theta**2 / 24, (1 - np.cos(safe)) / safe**2)
        squared = matrices @ matrices
        return eye + first[:, None, None] * matrices + second[:, None, None] * squared

    # Heisenberg3: hat(X)^3 = 0
    return eye + matrices + (matrices @ matrices) / 2


def log_batch(model: LieGroupModel, elements: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Principal logarithm of stacked elements.
    Returns the chart coordinates and a mask of elements strictly inside the chart;
    coordinates of masked-out elements are meaningless.
    """
    elements = np.asarray(elements, dtype=float)
    radius = model.chart_radius

    if model.is_abelian:
        coords = elements.copy()
        return coords, np.linalg.norm(coords, axis=-1) < radius

    if model.name is ModelName.sl2r:
        half_trace = (elements[:, 0, 0] + elements[:, 1, 1]) / 2
        offset = half_trace - 1
        factor = np.full_like(half_trace, np.nan)

        small = np.abs(offset) < 1e-6
        hyperbolic = (half_trace > 1) & ~small
        elliptic = (half_trace < 1) & (half_trace > -1) & ~small

        factor[small] = 1 - offset[small] / 3 + 2 * offset[small] ** 2 / 15
        factor[hyperbolic] = np.arccosh(half_trace[hyperbolic]) / np.sqrt(
            offset[hyperbolic] * (half_trace[hyperbolic] + 1)
        )
        factor[elliptic] = np.arccos(half_trace[elliptic]) / np.sqrt(
            -offset[elliptic] * (half_trace[elliptic] + 1)
        )

        eye = np.broadcast_to(np.eye(2), elements.shape)
        traceless = elements - half_trace[:, None, None] * eye
        coords = vee_batch(model, factor[:, None, None] * traceless)

    elif model.name is ModelName.so3:
        skew = vee_batch(model, elements - np.swapaxes(elements, 1, 2))
        sine = np.linalg.norm(skew, axis=-1) / 2
        cosine = (np.trace(elements, axis1=1, axis2=2) - 1) / 2
        theta = np.arctan2(sine, cosine)
        small = sine < 1e-6
        safe = np.where(small, 1.0, sine)
        factor = np.where(small & (cosine > 0), 0.5 * (1 + theta**2 / 6), theta / (2 * safe))
        coords = factor[:, None] * skew
        coords[small & (cosine <= 0)] = np.nan

    else:
        nilpotent = elements - np.eye(3)
        coords = vee_batch(model, nilpotent - (nilpotent @ nilpotent) / 2)

    norms = np.linalg.norm(coords, axis=-1)
    inside = np.isfinite(norms) & (norms < radius)
    return coords, inside


def mul_batch(model: LieGroupModel, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if model.is_abelian:
        return left + right
    return left @ right


def inv_batch(model: LieGroupModel, elements: np.ndarray) -> np.ndarray:
    if model.is_abelian:
        return -elements

    if model.name is ModelName.so3:
        return np.swapaxes(elements, -1, -2).copy()

    if model.name is ModelName.sl2r:
        out = np.empty_like(elements)
        out[..., 0, 0] = elements[..., 1, 1]
        out[..., 0, 1] = -elements[..., 0, 1]
        out[..., 1, 0] = -elements[..., 1, 0]
        out[..., 1, 1] = elements[..., 0, 0]
        return out

    a, b, c = elements[..., 0, 1], elements[..., 1, 2], elements[..., 0, 2]
    out = np.broadcast_to(np.eye(3), elements.shape).copy()
    out[..., 0, 1] = -a
    out[..., 1, 2] = -b
    out[..., 0, 2] = a * b - c
    return out


def jacobian_batch(model: LieGroupModel, coords: np.ndarray) -> np.ndarray:
    """
    j(X), the density of the pushforward of Lebesgue measure under exp with respect to Haar
    measure at exp(X): the reciprocal of det((1 - exp(-ad_X)) / ad_X).
    """
    coords = np.atleast_2d(np.asarray(coords, dtype=float))

    if model.name is ModelName.sl2r:
        _, sinhc = _sl2r_cosh_sinhc(_sl2r_delta(coords))
        return 1 / sinhc**2

    if model.name is ModelName.so3:
        half = np.linalg.norm(coords, axis=-1) / 2
        small = half < 1e-4
        safe = np.where(small, 1.0, half)
        return np.where(small, 1 + half**2 / 3, (safe / np.sin(safe)) ** 2)

    return np.ones(coords.shape[0])


# Exact rational arithmetic


def _exact_mul(model: LieGroupModel, left: ExactEntries, right: ExactEntries) -> ExactEntries:
    if model.is_abelian:
        return tuple(x + y for x, y in zip(left, right, strict=True))

    columns = list(zip(*right, strict=True))
    return tuple(
        tuple(
            sum((x * y for x, y in zip(row, column, strict=True)), Fraction(0))
            for column in columns
        )
        for row in left
    )


def _exact_inv(model: LieGroupModel, entries: ExactEntries) -> ExactEntries:
    if model.is_abelian:
        return tuple(-x for x in entries)

    if model.name is ModelName.so3:
        return tuple(zip(*entries, strict=True))

    if model.name is ModelName.sl2r:
        (a, b), (c, d) = entries
        return ((d, -b), (-c, a))

    a, b, c = entries[0][1], entries[1][2], entries[0][2]
    one, zero = Fraction(1), Fraction(0)
    return ((one, -a, a * b - c), (zero, one, -b), (zero, zero, one))


def _exact_to_array(entries: ExactEntries) -> np.ndarray:
    return np.array(entries, dtype=float)


def _relations_hold(model: LieGroupModel, array: np.ndarray) -> bool:
    if model.is_abelian:
        return bool(np.all(np.isfinite(array)))

    scale = max(1.0, float(np.max(np.abs(array))) ** 2)
    tol = RELATION_TOL * scale

    if model.name is ModelName.sl2r:
        return abs(np.linalg.det(array) - 1) <= tol

    if model.name is ModelName.so3:
        orthogonal = np.max(np.abs(array.T @ array - np.eye(3))) <= tol
        return bool(orthogonal and abs(np.linalg.det(array) - 1) <= tol)

    lower = array[np.tril_indices(3, -1)]
    return bool(np.all(np.abs(lower) <= tol) and np.all(np.abs(np.diag(array) - 1) <= tol))


# Value types


class GroupElement(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: LieGroupModel
    array: np.ndarray
    exact: tuple | None = None

    @model_validator(mode="after")
    def validate_relations(self):
        if self.array.shape != self.model.element_shape:
            raise ValueError(
                f"{self.model.display_name} elements have shape {self.model.element_shape}, "
                f"got {self.array.shape}."
            )
        if not _relations_hold(self.model, self.array):
            raise ValueError(f"Matrix violates the {self.model.display_name} relations.")
        return self

    @property
    def is_exact(self) -> bool:
        return self.exact is not None

    @property
    def sort_key(self) -> tuple:
        if self.exact is not None:
            if self.model.is_abelian:
                return tuple(self.exact)
            return tuple(x for row in self.exact for x in row)
        return tuple(self.array.ravel().tolist())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GroupElement):
            return NotImplemented
        if self.model != other.model:
            return False
        if self.exact is not None and other.exact is not None:
            return self.exact == other.exact
        return bool(np.array_equal(self.array, other.array))

    def __hash__(self) -> int:
        return hash((self.model.name, self.model.dim, self.sort_key))


class AlgebraVector(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    model: LieGroupModel
    coords: np.ndarray

    @model_validator(mode="after")
    def validate_coords(self):
        if self.coords.shape != (self.model.dim,):
            raise ValueError(f"Expected {self.model.dim} coordinates, got {self.coords.shape}.")
        return self

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coords))


class Distance(BaseModel):
    """A chart distance; `at_least` marks the sentinel for pairs at or beyond the chart radius."""

    model_config = ConfigDict(frozen=True)

    value: float
    at_least: bool = False


def _to_fraction(value) -> Fraction | None:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int | np.integer) and not isinstance(value, bool):
        return Fraction(int(value))
    return None


def element(model: LieGroupModel, entries) -> GroupElement:
    """Build an element from nested entries; all-rational entries keep an exact copy."""
    if isinstance(entries, np.ndarray):
        return GroupElement(model=model, array=np.array(entries, dtype=float))

    rows = [entries] if model.is_abelian else entries
    fractions = [[_to_fraction(value) for value in row] for row in rows]

    if all(value is not None for row in fractions for value in row):
        exact_rows = tuple(tuple(row) for row in fractions)
        exact = exact_rows[0] if model.is_abelian else exact_rows
        return GroupElement(model=model, array=_exact_to_array(exact), exact=exact)

    return GroupElement(model=model, array=np.array(entries, dtype=float))


def from_array(model: LieGroupModel, array: np.ndarray) -> GroupElement:
    """Wrap an array produced by the batch functions without re-checking relations."""
    return GroupElement.model_construct(model=model, array=array, exact=None)


def algebra_vector(model: LieGroupModel, coords) -> AlgebraVector:
    return AlgebraVector(model=model, coords=np.asarray(coords, dtype=float).reshape(model.dim))


def identity(model: LieGroupModel) -> GroupElement:
    if model.is_abelian:
        exact = tuple(Fraction(0) for _ in range(model.dim))
    else:
        size = model.element_shape[0]
        exact = tuple(
            tuple(Fraction(int(i == j)) for j in range(size))
            for i in range(size)
        )
    return GroupElement(model=model, array=_exact_to_array(exact), exact=exact)


def assert_same_model(*items: GroupElement | AlgebraVector):
    models = {item.model for item in items}
    if len(models) > 1:
        names = ", ".join(sorted(model.display_name for model in models))
        logger.error(f"Model mismatch between operands: {names}")
        raise ModelMismatchError(names)


def multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    assert_same_model(g, h)
    model = g.model

    if g.exact is not None and h.exact is not None:
        exact = _exact_mul(model, g.exact, h.exact)
        return GroupElement.model_construct(model=model, array=_exact_to_array(exact), exact=exact)

    product = mul_batch(model, g.array[None], h.array[None])[0]
    return from_array(model, product)


def inverse(g: GroupElement) -> GroupElement:
    if g.exact is not None:
        exact = _exact_inv(g.model, g.exact)
        return GroupElement.model_construct(
            model=g.model, array=_exact_to_array(exact), exact=exact
        )
    return from_array(g.model, inv_batch(g.model, g.array[None])[0])


def exp(X: AlgebraVector) -> GroupElement:
    if not np.any(X.coords):
        return identity(X.model)
    return from_array(X.model, exp_batch(X.model, X.coords[None])[0])


def log(g: GroupElement) -> AlgebraVector:
    coords, inside = log_batch(g.model, g.array[None])
    if not inside[0]:
        logger.error(f"Logarithm undefined within the {g.model.display_name} chart")
        raise OutsideChart(f"radius {g.model.chart_radius}")
    return AlgebraVector(model=g.model, coords=coords[0])


def chart_jacobian(X: AlgebraVector) -> float:
    if X.norm >= X.model.chart_radius:
        logger.error(f"Jacobian requested outside the chart, |X| = {X.norm!r}")
        raise OutsideChart(f"|X| = {X.norm} >= {X.model.chart_radius}")
    return float(jacobian_batch(X.model, X.coords[None])[0])


def relative_arrays(lefts: Sequence[GroupElement], rights: Sequence[GroupElement]) -> np.ndarray:
    """Stacked g^-1 h for paired elements, exact whenever both operands are exact."""
    model = lefts[0].model
    shape = model.element_shape
    out = np.empty((len(lefts), *shape))

    for index, (g, h) in enumerate(zip(lefts, rights, strict=True)):
        if g.exact is not None and h.exact is not None:
            out[index] = _exact_to_array(_exact_mul(model, _exact_inv(model, g.exact), h.exact))
        else:
            out[index] = mul_batch(model, inv_batch(model, g.array), h.array)

    return out


def pair_distances(
    lefts: Sequence[GroupElement],
    rights: Sequence[GroupElement],
) -> tuple[np.ndarray, np.ndarray]:
    """Chart distances of paired elements plus the mask of sentinel (far) pairs."""
    if len(lefts) == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)

    model = lefts[0].model
    coords, inside = log_batch(model, relative_arrays(lefts, rights))
    values = np.where(inside, np.linalg.norm(np.where(inside[:, None], coords, 0.0), axis=-1), 0.0)
    values = np.where(inside, values, model.chart_radius)
    return values, ~inside


def distance(g: GroupElement, h: GroupElement) -> Distance:
    assert_same_model(g, h)
    values, far = pair_distances([g], [h])
    return Distance(value=float(values[0]), at_least=bool(far[0]))


def _ambient_radii(model: LieGroupModel, arrays: np.ndarray, radius: float) -> np.ndarray:
    # ||g - h||_F <= ||g||_F * (exp(||hat(log g^-1 h)||_F) - 1)
    count = arrays.shape[0]
    if model.is_abelian:
        return np.full(count, radius * (1 + 1e-9) + 1e-15)

    norms = np.linalg.norm(arrays.reshape(count, -1), axis=-1)
    return norms * np.expm1(model.name.hat_norm_factor * radius) * (1 + 1e-9) + 1e-15


def candidate_pairs(model: LieGroupModel, arrays: np.ndarray, radius: float) -> np.ndarray:
    """
    Index pairs (i, j), i < j, that may lie within chart distance `radius`;
    a superset of the true neighbour pairs found through an ambient KD-tree.
    """
    count = arrays.shape[0]
    if count < 2:
        return np.zeros((0, 2), dtype=int)

    flat = arrays.reshape(count, -1)
    tree = KDTree(flat)
    neighbours = tree.query_radius(flat, r=_ambient_radii(model, arrays, radius))

    pairs = [
        (i, int(j))
        for i, found in enumerate(neighbours)
        for j in found
        if j > i
    ]
    if not pairs:
        return np.zeros((0, 2), dtype=int)
    return np.array(sorted(pairs), dtype=int)


def _float_prefilter(
    model: LieGroupModel,
    arrays: np.ndarray,
    candidates: np.ndarray,
    radius: float,
) -> np.ndarray:
    """
    Drop candidate pairs whose floating point g^-1 h is provably farther than `radius` from the
    identity; the rounding error of the product is added to the threshold.
    """
    if model.is_abelian or len(candidates) == 0:
        return candidates

    inverses = inv_batch(model, arrays[candidates[:, 0]])
    rights = arrays[candidates[:, 1]]
    relative = mul_batch(model, inverses, rights)
    count = len(candidates)
    deviation = np.linalg.norm((relative - model.identity_array()).reshape(count, -1), axis=-1)
    rounding = (
        16
        * np.finfo(float).eps
        * np.linalg.norm(inverses.reshape(count, -1), axis=-1)
        * np.linalg.norm(rights.reshape(count, -1), axis=-1)
    )
    threshold = np.expm1(model.name.hat_norm_factor * radius) * (1 + 1e-9) + rounding + 1e-15
    return candidates[deviation <= threshold]


def neighbour_pairs(
    elements: Sequence[GroupElement],
    radius: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Pairs (i, j), i < j, with chart distance below `radius`, and their distances."""
    if not elements:
        return np.zeros((0, 2), dtype=int), np.zeros(0)

    model = elements[0].model
    arrays = np.stack([item.array for item in elements])
    candidates = _float_prefilter(model, arrays, candidate_pairs(model, arrays, radius), radius)
    if len(candidates) == 0:
        return candidates, np.zeros(0)

    values, far = pair_distances(
        [elements[i] for i in candidates[:, 0]],
        [elements[j] for j in candidates[:, 1]],
    )
    keep = ~far & (values < radius)
    return candidates[keep], values[keep]


def neighbour_lists(model: LieGroupModel, arrays: np.ndarray, radius: float) -> list[np.ndarray]:
    """For each element, the sorted indices (itself included) within chart distance `radius`."""
    count = arrays.shape[0]
    candidates = candidate_pairs(model, arrays, radius)
    lists: list[list[int]] = [[index] for index in range(count)]

    if len(candidates):
        left, right = candidates[:, 0], candidates[:, 1]
        relative = mul_batch(model, inv_batch(model, arrays[left]), arrays[right])
        coords, inside = log_batch(model, relative)
        close = inside & (np.linalg.norm(np.where(inside[:, None], coords, 0.0), axis=-1) < radius)
        for i, j in candidates[close]:
            lists[i].append(int(j))
            lists[j].append(int(i))

    return [np.array(sorted(found), dtype=int) for found in lists]
