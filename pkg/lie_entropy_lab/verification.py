"""
Property suites run by `lie-entropy-lab verify`.

Each suite returns named checks with a margin: the distance to the failure threshold, so a
nonnegative margin means the property held.
"""

import itertools
import math
from collections.abc import Callable
from fractions import Fraction

import numpy as np
from pydantic import BaseModel
from scipy import stats
from scipy.special import entr, erf

from lie_entropy_lab.conditioning import (
    conditional_entropy_given_smoothed,
    conditional_trace,
    discrete_conditional_laws,
    entropy_increase_check,
    trace_about,
    trace_at_scale_witness,
    trace_product_check,
    variance_entropy_bound,
)
from lie_entropy_lab.entropy import (
    affine_pushforward_check,
    entropy_at_scale,
    entropy_between_scales,
    kernel_entropy_on_group,
    knn_entropy_oracle,
)
from lie_entropy_lab.experiment import (
    SANOV_PAIR,
    ExperimentConfig,
    build_entropy_horizon,
    build_generators,
    build_kernels,
    build_model,
    build_stopping,
    build_walk_exponent,
)
from lie_entropy_lab.groups import (
    LieGroupModel,
    ModelName,
    algebra_vector,
    element,
    exp,
    exp_batch,
    identity,
    inv_batch,
    jacobian_batch,
    log_batch,
    mul_batch,
    multiply,
    pair_distances,
)
from lie_entropy_lab.kernels import (
    SmoothingKernel,
    kernel_entropy,
    kernel_trace,
    normalizing_constant,
    sample_group,
    sample_kernel,
)
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import (
    FinSuppMeasure,
    convolution_power,
    convolution_powers,
    convolve,
    separation_profile,
    separation_rate,
    shannon_entropy,
)
from lie_entropy_lab.montecarlo import RngStream
from lie_entropy_lab.quadrature import (
    compact_density_family,
    density_entropy,
    kl_divergence_1d,
    posterior_variance_1d,
    smoothed_atoms_1d,
    variance_entropy_excess,
)
from lie_entropy_lab.scales import TraceProfile, log_integral, select_scales
from lie_entropy_lab.walks import (
    StoppingTimeSpec,
    ldp_check,
    stopped_law,
    theorem_harness,
)

ROUNDTRIP_TOL = 1e-9
EXACT_TOL = 1e-12
KNN_TOL = 0.03
FINITE_DIFFERENCE_STEP = 1e-6
FINITE_DIFFERENCE_TOL = 1e-6
RANDOM_CASES = 1000
KERNEL_DIMS = (1, 2, 3)
KERNEL_TRUNCATIONS = (2.0, 3.0, 4.0, 6.0)
# the abelian chart radius is 1, so r stays below 1/6 for every truncation above
KERNEL_SCALES = (0.01, 0.1)


class CheckResult(BaseModel):
    suite: str
    name: str
    passed: bool
    margin: float
    detail: str = ""


class VerificationReport(BaseModel):
    config_hash: str
    seed: int
    checks: list[CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [check for check in self.checks if not check.passed]

    def to_record(self) -> dict:
        return {"passed": self.passed, **self.model_dump(mode="json")}


class SuiteContext(BaseModel):
    config: ExperimentConfig
    rng: RngStream
    threads: int = 1

    @property
    def n_samples(self) -> int:
        return self.config.mc.n_samples

    @property
    def sigmas(self) -> float:
        return self.config.tolerances.sigmas


def _result(suite: str, name: str, margin: float, detail: str = "") -> CheckResult:
    margin = float(margin)
    return CheckResult(suite=suite, name=name, passed=margin >= 0, margin=margin, detail=detail)


def sanov_measure() -> FinSuppMeasure:
    model = LieGroupModel.create(ModelName.sl2r)
    return FinSuppMeasure.uniform([element(model, entries) for entries in SANOV_PAIR])


def bernoulli_measure(d: float | int = 1, dim: int = 1) -> FinSuppMeasure:
    model = LieGroupModel.create(ModelName.abelian, dim)
    origin = element(model, [0] * dim)
    return FinSuppMeasure.uniform([origin, element(model, [d] + [0] * (dim - 1))])


def _random_coords(generator: np.random.Generator, dim: int, size: int, radius: float):
    directions = generator.standard_normal((size, dim))
    directions /= np.linalg.norm(directions, axis=-1, keepdims=True)
    return directions * radius * generator.random((size, 1))


def _all_models() -> list[LieGroupModel]:
    return [
        LieGroupModel.create(ModelName.abelian, 2),
        LieGroupModel.create(ModelName.sl2r),
        LieGroupModel.create(ModelName.so3),
        LieGroupModel.create(ModelName.heisenberg3),
    ]


def finite_difference_jacobian(model: LieGroupModel, coords: np.ndarray) -> float:
    """1/det of the left-trivialized differential of exp at X, by central differences."""
    base_inverse = inv_batch(model, exp_batch(model, coords[None]))
    columns = []
    for axis in range(model.dim):
        step = np.zeros(model.dim)
        step[axis] = FINITE_DIFFERENCE_STEP
        shifted = exp_batch(model, np.stack([coords + step, coords - step]))
        logs, _ = log_batch(model, mul_batch(model, np.repeat(base_inverse, 2, axis=0), shifted))
        columns.append((logs[0] - logs[1]) / (2 * FINITE_DIFFERENCE_STEP))
    return float(1 / np.linalg.det(np.stack(columns, axis=-1)))


def _chart_distances(model: LieGroupModel, lefts: np.ndarray, rights: np.ndarray):
    coords, inside = log_batch(model, mul_batch(model, inv_batch(model, lefts), rights))
    return np.linalg.norm(coords, axis=-1), inside


def lie_core_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "lie_core"
    generator = context.rng.generator()
    checks = []

    for model in _all_models():
        name = model.display_name
        X = _random_coords(generator, model.dim, RANDOM_CASES, 0.1)
        coords, inside = log_batch(model, exp_batch(model, X))
        error = float(np.max(np.abs(coords - X))) if np.all(inside) else 1.0
        checks.append(_result(suite, f"exp/log round trip {name}", ROUNDTRIP_TOL - error))

        g, h, k = (
            exp_batch(model, _random_coords(generator, model.dim, RANDOM_CASES, 0.1))
            for _ in range(3)
        )
        plain, _ = _chart_distances(model, g, h)
        moved, _ = _chart_distances(model, mul_batch(model, k, g), mul_batch(model, k, h))
        swapped, _ = _chart_distances(model, h, g)
        error = float(max(np.max(np.abs(plain - moved)), np.max(np.abs(plain - swapped))))
        checks.append(_result(suite, f"left invariant distance {name}", ROUNDTRIP_TOL - error))

        origin_error = abs(float(jacobian_batch(model, np.zeros((1, model.dim)))[0]) - 1)
        checks.append(_result(suite, f"j(0) = 1 {name}", EXACT_TOL - origin_error))

        samples = X[:20]
        oracle = np.array([finite_difference_jacobian(model, x) for x in samples])
        error = float(np.max(np.abs(jacobian_batch(model, samples) - oracle)))
        checks.append(
            _result(suite, f"Jacobian vs finite differences {name}", FINITE_DIFFERENCE_TOL - error)
        )

        norms = np.linalg.norm(X, axis=-1)
        fitted = float(np.max(np.abs(jacobian_batch(model, X) - 1) / np.maximum(norms, 1e-300)))
        bound = context.config.constants.jacobian_bound
        checks.append(
            _result(
                suite,
                f"|j(X) - 1| <= K|X| {name}",
                bound - fitted,
                f"observed ratio {fitted!r}, K = {bound!r}",
            )
        )

    sl2r = LieGroupModel.create(ModelName.sl2r)
    unipotent = exp(algebra_vector(sl2r, [0.01, 0.0, 0.0]))
    error = float(np.max(np.abs(unipotent.array - np.array([[1, 0.01], [0, 1]]))))
    checks.append(_result(suite, "SL2R nilpotent exponential", EXACT_TOL - error))

    return checks


def _brute_force_separation(mu: FinSuppMeasure, n: int) -> float:
    union = {identity(mu.model)}
    for power in convolution_powers(mu, n):
        union.update(power.elements)
    elements = list(union)
    pairs = list(itertools.combinations(elements, 2))
    values, far = pair_distances([g for g, _ in pairs], [h for _, h in pairs])
    near = values[~far]
    return float(np.min(near)) if near.shape[0] else mu.model.chart_radius


def discrete_measure_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "discrete_measure"
    generator = context.rng.generator()
    checks = []
    sanov = sanov_measure()

    for k, power in enumerate(convolution_powers(sanov, 10), start=1):
        error = abs(shannon_entropy(power) - k * math.log(2))
        distinct = power.support_size == 2**k and all(w == Fraction(1, 2**k) for w in power.weights)
        checks.append(
            _result(
                suite,
                f"Sanov H(mu^*{k}) = {k} log 2",
                EXACT_TOL - error if distinct else -1.0,
                f"{power.support_size} atoms",
            )
        )

    binomial = convolution_power(bernoulli_measure(), 10)
    direct = math.fsum(entr(stats.binom.pmf(np.arange(11), 10, 0.5)).tolist())
    error = abs(shannon_entropy(binomial) - direct)
    checks.append(_result(suite, "binomial(10, 1/2) entropy", EXACT_TOL - error))

    for n in range(1, 6):
        report = separation_rate(sanov, n)
        brute = _brute_force_separation(sanov, n)
        checks.append(
            _result(
                suite,
                f"Sanov M_{n} matches brute force",
                0.0 if report.M_n.value == brute else -abs(report.M_n.value - brute),
                f"M_{n} = {report.M_n.value!r}{' (at least)' if report.M_n.at_least else ''}",
            )
        )

    line = LieGroupModel.create(ModelName.abelian, 1)
    worst = math.inf
    for _ in range(100):
        measures = []
        for _ in range(2):
            size = int(generator.integers(1, 5))
            points = generator.choice(np.arange(-6, 7), size=size, replace=False)
            raw = generator.integers(1, 10, size=size)
            weights = [Fraction(int(w), int(np.sum(raw))) for w in raw]
            pairs = [(element(line, [int(p)]), w) for p, w in zip(points, weights, strict=True)]
            measures.append(FinSuppMeasure.from_pairs(line, pairs))
        first, second = measures
        slack = shannon_entropy(first) + shannon_entropy(second) - shannon_entropy(
            convolve(first, second)
        )
        worst = min(worst, slack)
    checks.append(_result(suite, "H(mu*nu) <= H(mu) + H(nu)", worst + EXACT_TOL))

    step = build_generators(context.config)
    separation = context.config.separation
    profile = separation_profile(step, separation.n_max, separation.support_cap)
    values = [report.M_n.value for report in profile.reports]
    increase = max((later - earlier for earlier, later in itertools.pairwise(values)), default=0.0)
    checks.append(
        _result(
            suite,
            "M_n nonincreasing for the configured measure",
            -max(increase, 0.0),
            f"S_mu estimate {profile.S_mu_estimate!r}",
        )
    )
    return checks


def smoothing_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "smoothing"
    checks = []

    for dim in KERNEL_DIMS:
        model = LieGroupModel.create(ModelName.abelian, dim)
        for r in KERNEL_SCALES:
            residuals = []
            for a in KERNEL_TRUNCATIONS:
                kernel = SmoothingKernel(model=model, a=a, r=r)
                unit = kernel_entropy(SmoothingKernel(model=model, a=a, r=KERNEL_SCALES[0]))
                value = kernel_entropy(kernel)
                scaling = value.quadrature_value - unit.quadrature_value
                expected = dim * math.log(r / KERNEL_SCALES[0])
                checks.append(
                    _result(
                        suite,
                        f"entropy log-r scaling dim={dim} a={a} r={r}",
                        1e-8 - abs(scaling - expected),
                    )
                )
                trace = kernel_trace(kernel)
                checks.append(
                    _result(
                        suite,
                        f"0 < tr(beta) <= l r^2 dim={dim} a={a} r={r}",
                        min(trace, dim * r**2 - trace),
                    )
                )
                residuals.append(abs(value.residual))

            drops = [earlier - later for earlier, later in itertools.pairwise(residuals)]
            checks.append(
                _result(suite, f"entropy residual decreasing in a dim={dim} r={r}", min(drops))
            )
            checks.append(
                _result(suite, f"entropy residual at a=6 dim={dim} r={r}", 1e-5 - residuals[-1])
            )

    line = LieGroupModel.create(ModelName.abelian, 1)
    kernel = SmoothingKernel(model=line, a=3.0, r=0.1)
    closed = 1 / (kernel.r * math.sqrt(2 * math.pi) * erf(kernel.a / math.sqrt(2)))
    error = abs(normalizing_constant(kernel) / closed - 1)
    checks.append(_result(suite, "C_{a,r} closed form in one dimension", 1e-10 - error))

    plane = LieGroupModel.create(ModelName.abelian, 2)
    kernel = SmoothingKernel(model=plane, a=3.0, r=0.1)
    samples = sample_kernel(kernel, context.rng.child(0).generator(), context.n_samples)
    squared = np.sum(samples**2, axis=-1)
    overshoot = float(np.max(np.sqrt(squared))) - kernel.support_radius
    checks.append(_result(suite, "kernel samples inside |X| <= ar", -max(overshoot, 0.0)))
    std_error = float(np.std(squared, ddof=1)) / math.sqrt(squared.shape[0])
    error = abs(float(np.mean(squared)) - kernel_trace(kernel))
    checks.append(
        _result(suite, "empirical kernel trace", context.sigmas * std_error - error)
    )

    for kernel in build_kernels(context.config):
        coords, elements = sample_group(kernel, context.rng.child(1).generator(), 1000)
        logs, inside = log_batch(kernel.model, elements)
        overshoot = (
            float(np.max(np.linalg.norm(logs, axis=-1))) - kernel.support_radius * (1 + 1e-9)
            if np.all(inside)
            else 1.0
        )
        checks.append(
            _result(
                suite,
                f"group samples within ar of Id ({kernel.model.display_name}, r={kernel.r})",
                -max(overshoot, 0.0),
            )
        )

    return checks


def entropy_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "entropy_mc"
    config = context.config
    checks = []
    a = config.kernel.a

    sanov = sanov_measure()
    n = config.separation.n_max
    separation = separation_rate(sanov, n, config.separation.support_cap)
    r = min(separation.M_n.value / (4 * a), 0.01)
    law = convolution_power(sanov, n, config.separation.support_cap)
    estimate = entropy_at_scale(
        law,
        SmoothingKernel(model=sanov.model, a=a, r=r),
        context.n_samples,
        context.rng.child(0),
        context.threads,
        config.constants.chart_bias,
    )
    checks.append(
        _result(
            suite,
            f"exact split H_a(q_{n}; r) = {n} log 2",
            estimate.tolerance(context.sigmas) - abs(estimate.value - n * math.log(2)),
            f"r = {r!r}, value = {estimate.value!r}",
        )
    )

    for index, kernel in enumerate(build_kernels(config)):
        estimate = entropy_at_scale(
            FinSuppMeasure.delta(identity(kernel.model)),
            kernel,
            context.n_samples,
            context.rng.child(1).child(index),
            context.threads,
            config.constants.chart_bias,
        )
        checks.append(
            _result(
                suite,
                f"H_a(delta_e; {kernel.r}) = 0",
                estimate.tolerance(context.sigmas) - abs(estimate.value),
            )
        )

    plane = LieGroupModel.create(ModelName.abelian, 2)
    report = affine_pushforward_check(
        SmoothingKernel(model=plane, a=3.0, r=0.1),
        np.array([[2.0, 0.5], [0.0, 1.5]]),
        np.array([0.3, -0.2]),
        context.n_samples,
        context.rng.child(2),
        context.sigmas,
    )
    checks.append(
        _result(
            suite,
            "affine change of variables",
            0.0 if report.passed else -report.entropy_gap,
            f"entropy gap {report.entropy_gap!r}, KL gap {report.kl_gap!r}",
        )
    )

    line = LieGroupModel.create(ModelName.abelian, 1)
    kernel = SmoothingKernel(model=line, a=3.0, r=0.1)
    generator = context.rng.child(3).generator()
    samples = sample_kernel(kernel, generator, max(context.n_samples, 50_000))
    oracle = knn_entropy_oracle(samples, generator=generator)
    error = abs(oracle - kernel_entropy(kernel).quadrature_value)
    checks.append(_result(suite, "nearest-neighbour oracle vs quadrature", KNN_TOL - error))

    worst = min(-variance_entropy_excess(item) for item in compact_density_family())
    checks.append(_result(suite, "H(Z) <= 1/2 log(2 pi e Var Z) on the 1-D family", worst + 1e-9))

    piece_kernel = SmoothingKernel(model=line, a=2.0, r=0.05)
    for d in (0.05, 0.1, 0.3):
        first = smoothed_atoms_1d([0.0], [0.5], piece_kernel)
        second = smoothed_atoms_1d([d], [0.5], piece_kernel)
        joint = smoothed_atoms_1d([0.0, d], [0.5, 0.5], piece_kernel)
        slack = density_entropy(joint) - density_entropy(first) - density_entropy(second)
        checks.append(_result(suite, f"H(l1 + l2) >= H(l1) + H(l2) d={d}", slack + 1e-9))

    for r1, r2, r3 in ((0.1, 0.15, 0.2), (0.05, 0.1, 0.12), (0.1, 0.2, 0.3)):
        lam = [
            smoothed_atoms_1d([0.0], [1.0], SmoothingKernel(model=line, a=2.0, r=value))
            for value in (r1, r2, r3)
        ]
        grid = np.linspace(lam[0].lower, lam[0].upper, 2001)
        sup = max(
            abs(math.log(lam[1].density(float(x)) / lam[2].density(float(x)))) for x in grid
        )
        gap = abs(kl_divergence_1d(lam[0], lam[1]) - kl_divergence_1d(lam[0], lam[2]))
        name = f"KL reference change bound r={r1},{r2},{r3}"
        checks.append(_result(suite, name, sup - gap + 1e-9))

    return checks


def conditioning_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "conditioning"
    config = context.config
    checks = []
    line = LieGroupModel.create(ModelName.abelian, 1)

    d = 0.1
    two_atoms = bernoulli_measure(Fraction(1, 10))
    error = abs(trace_about(identity(line), two_atoms) - d**2 / 4)
    checks.append(_result(suite, "Bernoulli trace d^2/4", EXACT_TOL - error))

    k2 = SmoothingKernel(model=line, a=3.0, r=d)
    estimate = conditional_trace(
        two_atoms, k2, context.n_samples, context.rng.child(0), context.threads
    )
    oracle = posterior_variance_1d([0.0, d], [0.5, 0.5], k2)
    checks.append(
        _result(
            suite,
            "conditional trace vs quadrature",
            estimate.tolerance(context.sigmas) + 1e-9 - abs(estimate.value - oracle),
            f"estimate {estimate.value!r}, quadrature {oracle!r}",
        )
    )
    checks.append(
        _result(
            suite,
            "conditioning reduces expected trace",
            d**2 / 4 + estimate.tolerance(context.sigmas) - estimate.value,
        )
    )

    k1 = SmoothingKernel(model=line, a=3.0, r=0.02)
    k2 = SmoothingKernel(model=line, a=3.0, r=0.05)
    conditional = conditional_entropy_given_smoothed(
        two_atoms, k1, k2, context.n_samples, context.rng.child(1), context.threads
    )
    gap = entropy_between_scales(
        two_atoms, 3.0, 0.02, 0.05, context.n_samples, context.rng.child(2), context.threads
    )
    lower = gap.plus(kernel_entropy_on_group(k1, context.n_samples, context.rng.child(3)))
    combined = conditional.minus(lower)
    checks.append(
        _result(
            suite,
            "H(g s1 | g s2) >= H(g; s1|s2) + H(s1)",
            combined.value + combined.tolerance(context.sigmas),
        )
    )

    increase = entropy_increase_check(
        two_atoms,
        k1,
        k2,
        context.n_samples,
        context.rng.child(4),
        context.threads,
        context.sigmas,
        config.constants.increase_slack,
        config.constants.chart_bias,
    )
    checks.append(
        _result(
            suite,
            "entropy increase lower bound on the conditional trace",
            increase.margin + increase.tolerance,
            f"c = {increase.c!r}",
        )
    )

    model = build_model(config)
    epsilon = 0.01
    kernel = SmoothingKernel(model=model, a=config.kernel.a, r=epsilon / config.kernel.a)
    bound = variance_entropy_bound(
        kernel,
        context.n_samples,
        context.rng.child(5),
        context.threads,
        config.constants.variance_bound,
    )
    checks.append(
        _result(
            suite,
            f"Gaussian variance bound on a smoothed atom ({model.display_name})",
            0.0 if bound.passed else -bound.excess,
            f"K = {bound.constant!r}",
        )
    )

    checks.extend(_product_decay_checks(context))
    checks.append(_conditional_convolution_check())

    ratios = []
    a, r = 3.0, 0.02
    n, threads = context.n_samples, context.threads
    for multiple in (2, 3, 4):
        mu = bernoulli_measure(multiple * r)
        witness = trace_at_scale_witness(mu, a, r, n, context.rng.child(6).child(multiple), threads)
        gap = entropy_between_scales(
            mu, a, r, 2 * r, n, context.rng.child(7).child(multiple), threads
        )
        if gap.value > context.sigmas * gap.std_error:
            checks.append(
                _result(
                    suite,
                    f"witness trace positive at d/r={multiple}",
                    witness.t - context.sigmas * witness.std_error,
                )
            )
            ratios.append(witness.t * a**2 / gap.value)
    if ratios:
        checks.append(
            _result(suite, "t a^2 / gap bounded below", min(ratios), f"fitted {min(ratios)!r}")
        )

    return checks


def _product_decay_checks(context: SuiteContext) -> list[CheckResult]:
    suite = "conditioning"
    model = LieGroupModel.create(ModelName.sl2r)
    directions = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.6, -0.8, 0.0]])
    reports = []

    for epsilon in (0.02, 0.01):
        atoms = [exp(algebra_vector(model, epsilon * direction)) for direction in directions]
        mu_a = FinSuppMeasure.uniform(atoms)
        kernel = SmoothingKernel(model=model, a=2.0, r=epsilon / 2)
        reports.append(
            trace_product_check(
                mu_a,
                kernel,
                context.n_samples,
                context.rng.child(8),
                context.threads,
                bound_constant=context.config.constants.product_bound,
            )
        )

    checks = [
        _result(
            suite,
            f"trace product residual O(eps^3) at eps={report.epsilon!r}",
            report.bound_constant - report.constant,
            f"K = {report.constant!r}",
        )
        for report in reports
    ]
    coarse, fine = reports
    ratio = abs(coarse.residual) / abs(fine.residual) if fine.residual else 4.0
    checks.append(_result(suite, "trace product residual decays 4x when eps halves", ratio - 4))
    return checks


def _conditional_convolution_check() -> CheckResult:
    sanov = sanov_measure()
    g1, g2 = sanov.elements
    e = identity(sanov.model)
    laws_g = {
        0: [(g1, Fraction(1, 3)), (g2, Fraction(2, 3))],
        1: [(e, Fraction(1, 2)), (g2, Fraction(1, 2))],
    }
    laws_h = {0: [(g2, Fraction(1, 4)), (e, Fraction(3, 4))], 1: [(g1, Fraction(1))]}
    label_weights = {0: Fraction(2, 5), 1: Fraction(3, 5)}

    joint = [
        (label, multiply(g, h), label_weights[label] * wg * wh)
        for label in label_weights
        for (g, wg), (h, wh) in itertools.product(laws_g[label], laws_h[label])
    ]
    conditional = discrete_conditional_laws(joint)

    mismatches = 0
    for label in label_weights:
        expected = convolve(
            FinSuppMeasure.from_pairs(sanov.model, laws_g[label]),
            FinSuppMeasure.from_pairs(sanov.model, laws_h[label]),
        )
        if [(a.element, a.weight) for a in conditional[label].atoms] != [
            (a.element, a.weight) for a in expected.atoms
        ]:
            mismatches += 1

    return _result("conditioning", "law of gh given the label is a convolution", -mismatches)


def _synthetic_profiles(A: float) -> dict[str, TraceProfile]:
    grid = np.geomspace(1.0, A**4, 33)
    spike = np.zeros_like(grid)
    spike[13] = 2.0
    bumps = np.exp(-((np.log(grid) - math.log(A)) ** 2) * 8) + 0.5 * np.exp(
        -((np.log(grid) - 3 * math.log(A)) ** 2) * 8
    )
    return {
        "constant": TraceProfile.synthetic(grid, np.full_like(grid, 0.7)),
        "spike": TraceProfile.synthetic(grid, spike),
        "two-bump": TraceProfile.synthetic(grid, bumps),
        "zero": TraceProfile.synthetic(grid, np.zeros_like(grid)),
    }


def scale_pipeline_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "scale_pipeline"
    checks = []

    for A in (1.5, 2.0, 4.0, context.config.scales.A):
        for name, profile in _synthetic_profiles(A).items():
            selection = select_scales(profile, A)
            spacing = min(
                (larger - A * smaller for smaller, larger in itertools.pairwise(selection.scales)),
                default=0.0,
            )
            guarantee = selection.trace_sum - log_integral(profile) / (4 * math.log(A))
            checks.append(
                _result(
                    suite,
                    f"{name} profile A={A}",
                    min(spacing, guarantee + EXACT_TOL * max(1.0, selection.trace_sum)),
                    f"{len(selection.scales)} scales, trace sum {selection.trace_sum!r}",
                )
            )

    return checks


def walks_suite(context: SuiteContext) -> list[CheckResult]:
    suite = "walks"
    config = context.config
    checks = []
    sanov = sanov_measure()

    deterministic = stopped_law(sanov, StoppingTimeSpec.deterministic([3]), 1)
    power = convolution_power(sanov, 3)
    same = [(a.element, a.weight) for a in deterministic.law.atoms] == [
        (a.element, a.weight) for a in power.atoms
    ]
    checks.append(_result(suite, "deterministic stopping reproduces mu^*3", 0.0 if same else -1.0))

    unit_costs = StoppingTimeSpec.renewal({0: Fraction(1), 1: Fraction(1)}, [Fraction(3)])
    unit = stopped_law(sanov, unit_costs, 1)
    same = [(a.element, a.weight) for a in unit.law.atoms] == [
        (a.element, a.weight) for a in power.atoms
    ]
    checks.append(_result(suite, "unit-cost renewal equals deterministic", 0.0 if same else -1.0))

    renewal = StoppingTimeSpec.renewal(
        {0: Fraction(1), 1: Fraction(2)}, [Fraction(t) for t in range(8, 33, 4)]
    )
    law = stopped_law(sanov, renewal, 1)
    mass = sum(law.law.weights, Fraction(0))
    checks.append(_result(suite, "stopped law mass is exactly 1", 0.0 if mass == 1 else -1.0))

    report = ldp_check(sanov, renewal, 0.2, renewal.grid, context.n_samples, context.rng.child(0))
    checks.append(
        _result(
            suite,
            "renewal {1, 2} stopping times satisfy the LDP",
            (report.delta_hat or 0.0) if report.passed else -1.0,
            f"delta_hat = {report.delta_hat!r}",
        )
    )

    step = build_generators(config)
    spec = build_stopping(config, step)
    S = build_walk_exponent(config, step)
    harness = theorem_harness(
        step,
        spec,
        config.walk.a,
        S,
        config.walk.n_grid or spec.grid,
        context.n_samples,
        context.rng.child(1),
        context.threads,
        config.walk.epsilon,
        config.constants.c_G,
        config.walk.r_floor,
        config.constants.chart_bias,
        config.separation.support_cap,
        build_entropy_horizon(config),
    )
    for row in harness.rows:
        tolerance = context.sigmas * row.std_error + row.bias_budget
        checks.append(
            _result(
                suite,
                f"harness deficit n={row.n}",
                row.deficit + tolerance,
                f"L_n = {row.L_n!r}, r_n = {row.r_n!r}",
            )
        )

    return checks


SUITES: dict[str, Callable[[SuiteContext], list[CheckResult]]] = {
    "lie_core": lie_core_suite,
    "discrete_measure": discrete_measure_suite,
    "smoothing": smoothing_suite,
    "entropy_mc": entropy_suite,
    "conditioning": conditioning_suite,
    "scale_pipeline": scale_pipeline_suite,
    "walks": walks_suite,
}


def run_suites(
    config: ExperimentConfig,
    rng: RngStream,
    threads: int = 1,
    names: list[str] | None = None,
) -> VerificationReport:
    checks = []
    for index, (name, suite) in enumerate(SUITES.items()):
        if names is not None and name not in names:
            continue
        logger.info(f"Running suite {name!r}")
        results = suite(SuiteContext(config=config, rng=rng.child(index), threads=threads))
        for check in results:
            if not check.passed:
                logger.warning(f"Check {check.name!r} failed with margin {check.margin!r}")
        checks.extend(results)

    return VerificationReport(config_hash=config.config_hash, seed=rng.seed, checks=checks)
