"""Entropy at a scale, between scales, and the reference estimators they are checked against."""

import math

import numpy as np
import pytest

from lie_entropy_lab.entropy import (
    affine_pushforward_check,
    entropy_at_scale,
    entropy_between_scales,
    kernel_entropy_on_group,
    kl_divergence,
    knn_entropy_oracle,
    mixture_density,
    require_finite,
    smoothed_entropy,
)
from lie_entropy_lab.errors import DegenerateDensity, InsufficientSamples
from lie_entropy_lab.groups import LieGroupModel, element, identity
from lie_entropy_lab.kernels import (
    SmoothingKernel,
    algebra_log_density_batch,
    kernel_entropy,
    normalizing_constant,
    sample_kernel,
)
from lie_entropy_lab.measures import FinSuppMeasure
from lie_entropy_lab.mixtures import SmoothedMixture
from lie_entropy_lab.quadrature import entropy_at_scale_1d
from lie_entropy_lab.verification import bernoulli_measure


class TestSmoothedMixture:
    def test_pruned_and_full_densities_agree(self, bernoulli, line):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        mixture = SmoothedMixture(bernoulli, kernel)
        sample = mixture.sample(np.random.default_rng(0), 500)
        np.testing.assert_allclose(
            mixture.log_density(sample), mixture.log_density_at(sample.points), rtol=1e-9
        )

    def test_far_atoms_are_pruned(self, sanov, sl2r):
        mixture = SmoothedMixture(sanov, SmoothingKernel(model=sl2r, a=2.0, r=0.01))
        assert [found.tolist() for found in mixture.neighbours] == [[0], [1]]

    def test_density_at_separated_atom(self, line):
        kernel = SmoothingKernel(model=line, a=2.0, r=0.05)
        coin = bernoulli_measure(1)
        density = mixture_density(coin, kernel, element(line, [1]))
        assert density == pytest.approx(0.5 * normalizing_constant(kernel))


class TestEntropyAtScale:
    def test_delta_at_identity_has_zero_entropy(self, sl2r, rng):
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.02)
        estimate = entropy_at_scale(FinSuppMeasure.delta(identity(sl2r)), kernel, 2000, rng)
        assert estimate.value == pytest.approx(0.0, abs=1e-12)
        assert estimate.std_error == pytest.approx(0.0, abs=1e-12)

    def test_separated_atoms_split_exactly(self, sanov, sl2r, rng):
        """Disjoint smoothed atoms: H_a(g; r) is the Shannon entropy of g."""
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.01)
        estimate = entropy_at_scale(sanov, kernel, 2000, rng)
        assert estimate.value == pytest.approx(math.log(2), abs=1e-9)
        assert estimate.bias_budget == pytest.approx(0.02, abs=1e-9)

    def test_overlapping_atoms_match_quadrature(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        estimate = entropy_at_scale(bernoulli, kernel, 20_000, rng)
        expected = entropy_at_scale_1d([0.0, 0.1], [0.5, 0.5], kernel)
        assert 0 < expected < math.log(2)
        assert abs(estimate.value - expected) <= estimate.tolerance(4.0) + 1e-8

    def test_thread_count_does_not_change_estimate(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        single = entropy_at_scale(bernoulli, kernel, 10_000, rng, threads=1)
        pooled = entropy_at_scale(bernoulli, kernel, 10_000, rng, threads=3)
        assert single == pooled

    def test_smoothed_entropy_is_gap_plus_kernel_entropy(self, bernoulli, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.02)
        total = smoothed_entropy(bernoulli, kernel, 20_000, rng)
        expected = entropy_at_scale_1d([0.0, 0.1], [0.5, 0.5], kernel) + kernel_entropy(
            kernel
        ).quadrature_value
        assert abs(total.value - expected) <= total.tolerance(4.0) + 1e-8


class TestEntropyBetweenScales:
    def test_separated_atoms_have_no_gap(self, sanov, rng):
        estimate = entropy_between_scales(sanov, 2.0, 0.005, 0.02, 2000, rng)
        assert estimate.value == pytest.approx(0.0, abs=1e-9)

    def test_gap_is_nonnegative_for_overlapping_atoms(self, bernoulli, rng):
        estimate = entropy_between_scales(bernoulli, 3.0, 0.01, 0.04, 20_000, rng)
        assert estimate.value > -estimate.tolerance(4.0)

    def test_needs_increasing_scales(self, sanov, rng):
        with pytest.raises(ValueError):
            entropy_between_scales(sanov, 2.0, 0.02, 0.01, 100, rng)


class TestReferenceEstimators:
    def test_knn_standard_normal(self):
        samples = np.random.default_rng(0).standard_normal(20_000)
        expected = 0.5 * math.log(2 * math.pi * math.e)
        assert knn_entropy_oracle(samples) == pytest.approx(expected, abs=0.03)

    def test_knn_anisotropic_plane(self):
        samples = np.random.default_rng(1).standard_normal((20_000, 2)) * [1.0, 0.5]
        expected = math.log(2 * math.pi * math.e) + math.log(0.5)
        assert knn_entropy_oracle(samples) == pytest.approx(expected, abs=0.05)

    def test_knn_needs_samples(self):
        with pytest.raises(InsufficientSamples):
            knn_entropy_oracle(np.zeros((10, 1)))

    def test_knn_on_the_group_matches_kernel_entropy(self, sl2r, rng):
        kernel = SmoothingKernel(model=sl2r, a=3.0, r=0.1)
        generator = np.random.default_rng(2)
        samples = sample_kernel(kernel, generator, 50_000)
        oracle = knn_entropy_oracle(samples, model=sl2r, generator=generator)
        estimate = kernel_entropy_on_group(kernel, 20_000, rng)
        assert oracle == pytest.approx(estimate.value, abs=0.05)

    def test_abelian_kernel_entropy_is_deterministic(self, rng):
        kernel = SmoothingKernel(model=LieGroupModel.create("abelian", 2), a=3.0, r=0.1)
        estimate = kernel_entropy_on_group(kernel, 100, rng)
        assert estimate.std_error == 0.0
        assert estimate.value == kernel_entropy(kernel).quadrature_value

    def test_divergence_from_itself_vanishes(self, line, rng):
        kernel = SmoothingKernel(model=line, a=3.0, r=0.1)

        def log_density(points):
            return algebra_log_density_batch(kernel, points)

        def sampler(generator, size):
            return sample_kernel(kernel, generator, size)

        estimate = kl_divergence(log_density, log_density, sampler, 1000, rng)
        assert estimate.value == 0.0

    def test_affine_change_of_variables(self, rng):
        kernel = SmoothingKernel(model=LieGroupModel.create("abelian", 2), a=3.0, r=0.1)
        report = affine_pushforward_check(
            kernel, np.array([[2.0, 0.5], [0.0, 1.0]]), np.array([0.1, -0.2]), 20_000, rng
        )
        assert report.expected_entropy == pytest.approx(
            kernel_entropy(kernel).quadrature_value + math.log(2.0)
        )
        assert report.kl_gap <= 1e-9
        assert report.passed

    def test_affine_check_is_abelian_only(self, sl2r, rng):
        kernel = SmoothingKernel(model=sl2r, a=2.0, r=0.01)
        with pytest.raises(ValueError):
            affine_pushforward_check(kernel, np.eye(3), np.zeros(3), 100, rng)

    def test_zero_density_samples_are_rejected(self):
        with pytest.raises(DegenerateDensity):
            require_finite(np.array([0.5, -np.inf]), "test values")
