"""Posterior traces and the inequalities built on conditioning."""

import math
from fractions import Fraction

import numpy as np
import pytest

from lie_entropy_lab.conditioning import (
    WITNESS_SCHEME,
    conditional_entropy_given_smoothed,
    conditional_trace,
    discrete_conditional_laws,
    entropy_increase_check,
    posterior_given_smoothed,
    trace_about,
    trace_at_scale_witness,
    trace_product_check,
    variance_entropy_bound,
)
from lie_entropy_lab.entropy import kernel_entropy_on_group
from lie_entropy_lab.errors import OutsideChart, ZeroDensityObservation
from lie_entropy_lab.experiment import SANOV_PAIR
from lie_entropy_lab.groups import (
    LieGroupModel,
    algebra_vector,
    element,
    exp,
    identity,
    multiply,
)
from lie_entropy_lab.kernels import SmoothingKernel
from lie_entropy_lab.measures import FinSuppMeasure
from lie_entropy_lab.quadrature import posterior_variance_1d
from lie_entropy_lab.verification import bernoulli_measure


class TestTraceAbout:
    def test_coin_variance(self, bernoulli, line):
        assert trace_about(identity(line), bernoulli) == pytest.approx(0.01 / 4, abs=1e-15)

    def test_invariant_under_anchor_shift(self, bernoulli, line):
        shifted = trace_about(element(line, [Fraction(1, 20)]), bernoulli)
        assert shifted == pytest.approx(0.01 / 4, abs=1e-15)

    def test_atoms_outside_chart(self, sanov, sl2r):
        with pytest.raises(OutsideChart) as caught:
            trace_about(identity(sl2r), sanov)
        assert caught.value.offending == [0, 1]


class TestPosterior:
    def test_observation_at_an_atom(self, sanov, sl2r):
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.01)
        generator = element(sl2r, SANOV_PAIR[1])
        posterior = posterior_given_smoothed(sanov, kernel, generator)
        index = sanov.elements.index(generator)
        assert posterior.weights[index] == pytest.approx(1.0)
        assert posterior.support.tolist() == [index]

    def test_overlapping_atoms_share_weight(self, bernoulli, line):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.1)
        posterior = posterior_given_smoothed(bernoulli, kernel, element(line, [Fraction(1, 20)]))
        np.testing.assert_allclose(posterior.weights, [0.5, 0.5])

    def test_observation_between_separated_atoms(self, line):
        kernel = SmoothingKernel(model=line, a=2.0, r=0.01)
        with pytest.raises(ZeroDensityObservation):
            posterior_given_smoothed(bernoulli_measure(1), kernel, element(line, [0.5]))


class TestConditionalTrace:
    def test_matches_quadrature(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        estimate = conditional_trace(bernoulli, kernel, 20_000, rng)
        expected = posterior_variance_1d([0.0, 0.1], [0.5, 0.5], kernel)
        assert abs(estimate.value - expected) <= estimate.tolerance(4.0) + 1e-10

    def test_conditioning_reduces_trace(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        estimate = conditional_trace(bernoulli, kernel, 5000, rng)
        assert estimate.value <= trace_about(identity(line), bernoulli)

    def test_separated_atoms_are_identified(self, sanov, sl2r, rng):
        estimate = conditional_trace(sanov, SmoothingKernel(model=sl2r, a=2.0, r=0.02), 2000, rng)
        assert estimate.value == pytest.approx(0.0, abs=1e-15)

    def test_witness(self, bernoulli, rng):
        witness = trace_at_scale_witness(bernoulli, 3.0, 0.01, 5000, rng)
        assert witness.radius == pytest.approx(0.06)
        assert witness.scheme == WITNESS_SCHEME
        assert 0 < witness.t <= trace_about(identity(bernoulli.model), bernoulli) / 0.06**2


class TestConditionalEntropy:
    def test_separated_atoms(self, sanov, sl2r, rng):
        """Once y pins the atom, the remaining entropy is that of the finer kernel alone."""
        k1 = SmoothingKernel(model=sl2r, a=2.0, r=0.005)
        k2 = SmoothingKernel(model=sl2r, a=2.0, r=0.02)
        conditional = conditional_entropy_given_smoothed(sanov, k1, k2, 400, rng.child(0))
        reference = kernel_entropy_on_group(k1, 20_000, rng.child(1))
        assert conditional.n_samples == 20
        noise = math.hypot(conditional.std_error, reference.std_error)
        assert abs(conditional.value - reference.value) <= 4 * noise + 1e-6

    def test_kernels_share_the_model(self, sanov, line, sl2r, rng):
        k1 = SmoothingKernel(model=line, a=2.0, r=0.005)
        k2 = SmoothingKernel(model=sl2r, a=2.0, r=0.02)
        with pytest.raises(ValueError):
            conditional_entropy_given_smoothed(sanov, k1, k2, 100, rng)


class TestTraceProduct:
    def test_abelian_traces_add(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        report = trace_product_check(bernoulli, kernel, 5000, rng)
        assert report.residual == pytest.approx(0.0, abs=1e-15)
        assert report.passed

    def test_sl2r_residual_is_third_order(self, sl2r, rng):
        directions = [[0.02, 0, 0], [0, 0.02, 0], [0, 0, 0.02], [0.01, 0.01, 0]]
        atoms = [exp(algebra_vector(sl2r, coords)) for coords in directions]
        measure = FinSuppMeasure.uniform(atoms)
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.01)
        report = trace_product_check(measure, kernel, 20_000, rng)
        assert report.epsilon == pytest.approx(0.02)
        assert report.passed


class TestDiscreteConditionalLaws:
    def test_conditional_walks(self, sl2r):
        """Conditioning g1 g2 on the first step leaves the law of the second step."""
        a, b = (element(sl2r, entries) for entries in SANOV_PAIR)
        quarter = Fraction(1, 4)
        joint = [
            (first, multiply(first, second), quarter) for first in (a, b) for second in (a, b)
        ]
        laws = discrete_conditional_laws(
            [(label.sort_key, g, weight) for label, g, weight in joint]
        )
        assert len(laws) == 2
        for law in laws.values():
            assert law.support_size == 2
            assert law.weights == [Fraction(1, 2), Fraction(1, 2)]

    def test_zero_weights_are_dropped(self, line):
        laws = discrete_conditional_laws(
            [("x", element(line, [0]), Fraction(1)), ("y", element(line, [1]), Fraction(0))]
        )
        assert list(laws) == ["x"]


class TestEntropyBounds:
    def test_variance_bound(self, sl2r, rng):
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.005)
        report = variance_entropy_bound(kernel, 5000, rng)
        assert report.epsilon == pytest.approx(0.01)
        assert report.passed

    def test_variance_bound_is_tight_for_wide_abelian_kernels(self, rng):
        kernel = SmoothingKernel(model=LieGroupModel.create("abelian", 2), a=6.0, r=0.1)
        report = variance_entropy_bound(kernel, 100, rng)
        assert report.excess == pytest.approx(0.0, abs=1e-5)

    def test_truncated_kernel_stays_below_gaussian_bound(self, line, rng):
        report = variance_entropy_bound(SmoothingKernel(model=line, a=2.0, r=0.01), 100, rng)
        assert report.excess < 0
        assert report.constant == 0.0

    def test_increase_check_needs_matching_kernels(self, bernoulli, line, rng):
        k1 = SmoothingKernel(model=line, a=2.0, r=0.01)
        k2 = SmoothingKernel(model=line, a=3.0, r=0.02)
        with pytest.raises(ValueError):
            entropy_increase_check(bernoulli, k1, k2, 100, rng)

    def test_increase_check_separated_atoms(self, line, rng):
        """No entropy is gained between the scales, so the bound reduces to a trace >= -c term."""
        coin = bernoulli_measure(1)
        k1 = SmoothingKernel(model=line, a=3.0, r=0.01)
        k2 = SmoothingKernel(model=line, a=3.0, r=0.02)
        report = entropy_increase_check(coin, k1, k2, 2000, rng)
        assert report.conditional_trace.value == pytest.approx(0.0, abs=1e-15)
        assert report.entropy_gap.value == pytest.approx(0.0, abs=1e-9)
        assert report.c >= 0
        assert report.passed
