"""Matrix models, exp/log charts, exact arithmetic and chart distances."""

import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from pydantic import ValidationError

from lie_entropy_lab.errors import ModelMismatchError, OutsideChart
from lie_entropy_lab.experiment import SANOV_PAIR
from lie_entropy_lab.groups import (
    LieGroupModel,
    ModelName,
    algebra_vector,
    chart_jacobian,
    distance,
    element,
    exp,
    exp_batch,
    from_array,
    identity,
    inverse,
    jacobian_batch,
    log,
    log_batch,
    multiply,
    neighbour_pairs,
    pair_distances,
)
from lie_entropy_lab.verification import finite_difference_jacobian

ALL_MODELS = [
    LieGroupModel.create(ModelName.abelian, 2),
    LieGroupModel.create(ModelName.sl2r),
    LieGroupModel.create(ModelName.so3),
    LieGroupModel.create(ModelName.heisenberg3),
]


def _ball(generator: np.random.Generator, dim: int, size: int, radius: float) -> np.ndarray:
    directions = generator.standard_normal((size, dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    return directions * radius * generator.random((size, 1))


class TestLieGroupModel:
    def test_default_dimensions(self):
        assert LieGroupModel.create("sl2r").dim == 3
        assert LieGroupModel.create("so3").dim == 3
        assert LieGroupModel.create("heisenberg3").dim == 3
        assert LieGroupModel.create("abelian").dim == 1

    def test_fixed_dimension_is_enforced(self):
        with pytest.raises(ValidationError):
            LieGroupModel(name=ModelName.sl2r, dim=2)

    def test_chart_radii(self):
        assert LieGroupModel.create("sl2r").chart_radius == 0.5
        assert LieGroupModel.create("abelian", 4).chart_radius == 1.0
        assert LieGroupModel.create("so3").chart_radius == pytest.approx(math.pi - 0.01)

    def test_display_name(self):
        assert LieGroupModel.create("abelian", 2).display_name == "Abelian(2)"
        assert LieGroupModel.create("heisenberg3").display_name == "Heisenberg3"


class TestExpLog:
    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda model: model.display_name)
    def test_round_trip_near_identity(self, model):
        """log(exp(X)) = X inside the chart."""
        generator = np.random.default_rng(7)
        X = _ball(generator, model.dim, 500, 0.3)
        coords, inside = log_batch(model, exp_batch(model, X))
        assert np.all(inside)
        np.testing.assert_allclose(coords, X, atol=1e-9)

    def test_zero_maps_to_exact_identity(self, sl2r):
        result = exp(algebra_vector(sl2r, [0, 0, 0]))
        assert result.is_exact
        assert result == identity(sl2r)

    def test_sl2r_nilpotent_exponential(self, sl2r):
        result = exp(algebra_vector(sl2r, [0.25, 0.0, 0.0]))
        np.testing.assert_allclose(result.array, [[1.0, 0.25], [0.0, 1.0]], atol=1e-15)

    def test_so3_rotation_angle_is_norm(self):
        so3 = LieGroupModel.create("so3")
        rotation = exp(algebra_vector(so3, [0.0, 0.0, 0.4]))
        cosine, sine = math.cos(0.4), math.sin(0.4)
        np.testing.assert_allclose(rotation.array[:2, :2], [[cosine, -sine], [sine, cosine]])
        assert rotation.array[2, 2] == pytest.approx(1.0)

    def test_log_outside_chart_raises(self, sl2r):
        generator = element(sl2r, SANOV_PAIR[0])
        with pytest.raises(OutsideChart):
            log(generator)

    def test_minus_identity_has_no_principal_log(self, sl2r):
        with pytest.raises(OutsideChart):
            log(element(sl2r, [[-1, 0], [0, -1]]))


class TestGroupElement:
    def test_relations_are_checked(self, sl2r):
        with pytest.raises(ValidationError):
            element(sl2r, [[1, 1], [0, 2]])

    def test_shape_is_checked(self, sl2r):
        with pytest.raises(ValidationError):
            element(sl2r, [[1, 0, 0], [0, 1, 0], [0, 0, 1]])

    def test_integer_entries_stay_exact(self, sl2r):
        a = element(sl2r, SANOV_PAIR[0])
        assert a.is_exact
        assert a.exact == ((Fraction(1), Fraction(2)), (Fraction(0), Fraction(1)))

    def test_float_entries_are_inexact(self, sl2r):
        assert not element(sl2r, [[1.0, 0.5], [0.0, 1.0]]).is_exact

    def test_exact_product(self, sl2r):
        a, b = (element(sl2r, entries) for entries in SANOV_PAIR)
        product = multiply(a, b)
        assert product.is_exact
        assert product.exact == ((5, 2), (2, 1))

    def test_exact_inverse(self, sl2r):
        a = element(sl2r, SANOV_PAIR[0])
        assert multiply(a, inverse(a)) == identity(sl2r)
        assert inverse(a).exact == ((1, -2), (0, 1))

    def test_heisenberg_inverse(self):
        model = LieGroupModel.create("heisenberg3")
        g = element(model, [[1, 2, 3], [0, 1, 5], [0, 0, 1]])
        assert multiply(g, inverse(g)) == identity(model)
        assert multiply(inverse(g), g) == identity(model)

    def test_equal_elements_hash_alike(self, sl2r):
        first = element(sl2r, SANOV_PAIR[1])
        second = element(sl2r, [list(row) for row in SANOV_PAIR[1]])
        assert first == second
        assert len({first, second}) == 1

    def test_model_mismatch(self, sl2r):
        with pytest.raises(ModelMismatchError):
            multiply(identity(sl2r), identity(LieGroupModel.create("so3")))


class TestJacobian:
    def test_identity_density_is_one(self):
        for model in ALL_MODELS:
            assert jacobian_batch(model, np.zeros((1, model.dim)))[0] == pytest.approx(1.0)

    def test_so3_closed_form(self):
        so3 = LieGroupModel.create("so3")
        half = 0.3
        value = chart_jacobian(algebra_vector(so3, [0.0, 2 * half, 0.0]))
        assert value == pytest.approx((half / math.sin(half)) ** 2, rel=1e-12)

    @pytest.mark.parametrize("model", ALL_MODELS, ids=lambda model: model.display_name)
    def test_matches_finite_differences(self, model):
        generator = np.random.default_rng(11)
        for X in _ball(generator, model.dim, 10, 0.3):
            expected = finite_difference_jacobian(model, X)
            assert jacobian_batch(model, X[None])[0] == pytest.approx(expected, abs=1e-6)

    def test_outside_chart_raises(self, sl2r):
        with pytest.raises(OutsideChart):
            chart_jacobian(algebra_vector(sl2r, [0.6, 0.0, 0.0]))


class TestDistance:
    def test_left_invariance_and_symmetry(self, sl2r):
        generator = np.random.default_rng(3)
        g, h, k = (
            [from_array(sl2r, array) for array in exp_batch(sl2r, _ball(generator, 3, 50, 0.1))]
            for _ in range(3)
        )
        plain, _ = pair_distances(g, h)
        moved, _ = pair_distances(
            [multiply(x, y) for x, y in zip(k, g, strict=True)],
            [multiply(x, y) for x, y in zip(k, h, strict=True)],
        )
        swapped, _ = pair_distances(h, g)
        np.testing.assert_allclose(moved, plain, atol=1e-9)
        np.testing.assert_allclose(swapped, plain, atol=1e-9)

    def test_far_pairs_get_the_sentinel(self, sl2r):
        a, b = (element(sl2r, entries) for entries in SANOV_PAIR)
        result = distance(a, b)
        assert result.at_least
        assert result.value == 0.5

    def test_abelian_distance_is_euclidean(self):
        plane = LieGroupModel.create("abelian", 2)
        result = distance(element(plane, [0.1, 0.2]), element(plane, [0.4, 0.6]))
        assert not result.at_least
        assert result.value == pytest.approx(0.5)


class TestNeighbourPairs:
    def test_line(self, line):
        points = [element(line, [x]) for x in (0.0, 0.1, 0.5, 2.0)]
        pairs, values = neighbour_pairs(points, 0.3)
        assert pairs.tolist() == [[0, 1]]
        np.testing.assert_allclose(values, [0.1])

    def test_matches_brute_force(self, sl2r):
        """The KD-tree prefilter never drops a pair within the radius."""
        generator = np.random.default_rng(5)
        arrays = exp_batch(sl2r, _ball(generator, 3, 60, 0.3))
        elements = [from_array(sl2r, array) for array in arrays]
        radius = 0.1

        pairs, _ = neighbour_pairs(elements, radius)
        combos = list(itertools.combinations(range(len(elements)), 2))
        values, far = pair_distances(
            [elements[i] for i, _ in combos], [elements[j] for _, j in combos]
        )
        expected = {
            combo
            for combo, value, is_far in zip(combos, values, far, strict=True)
            if not is_far and value < radius
        }

        assert {tuple(pair) for pair in pairs.tolist()} == expected
        assert expected
