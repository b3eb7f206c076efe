"""
Random walks q_k = g_1 ... g_k stopped at a random time eta_n.

Two classes of stopping times are supported: deterministic times eta_n = L_n and renewal
times, the first k at which the accumulated step costs reach a threshold. Both have
exponentially concentrated eta_n.
"""

import math
from collections import defaultdict
from enum import Enum
from fractions import Fraction

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.stats import linregress

from lie_entropy_lab.config import SUPPORT_CAP
from lie_entropy_lab.entropy import entropy_at_scale
from lie_entropy_lab.errors import CapExceeded, SupportOverflow
from lie_entropy_lab.groups import GroupElement, identity, multiply
from lie_entropy_lab.kernels import SmoothingKernel
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import (
    FinSuppMeasure,
    Weight,
    add_weights,
    multiply_weights,
    rw_entropy_estimate,
    separation_profile,
    separation_rate,
)
from lie_entropy_lab.montecarlo import RngStream, run_chunked

Cost = Fraction | float

LDP_SLOPE_SIGMAS = 2.0
RADIUS_SHARE = 0.99
R_FLOOR = 1e-6
ENTROPY_HORIZON = 6
HARNESS_COLUMNS = ("n", "L_n", "r_n", "M_bound", "H_est", "std_error", "h_mu_Ln", "deficit")


class StoppingKind(str, Enum):
    deterministic = "deterministic"
    renewal = "renewal"


class StoppingTimeSpec(BaseModel):
    """
    Deterministic: eta_n = schedule[n-1].
    Renewal: eta_n = first k with sum of cost(g_i), i <= k, >= schedule[n-1].

    Costs here are keyed by atom index of the step measure, which is in canonical order.
    Configs key costs by generator index; `experiment.build_stopping` translates them.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    kind: StoppingKind
    schedule: list[Cost]
    costs: dict[int, Cost] | None = None
    cap: int = Field(default=64, gt=0)

    @model_validator(mode="after")
    def validate_kind(self):
        if not self.schedule or any(value <= 0 for value in self.schedule):
            raise ValueError("Stopping schedules need positive entries.")

        if self.kind is StoppingKind.deterministic:
            if any(Fraction(value).denominator != 1 for value in self.schedule):
                raise ValueError("Deterministic stopping times are integers.")
            if self.costs is not None:
                raise ValueError("Deterministic stopping times take no costs.")
        elif not self.costs or any(cost <= 0 for cost in self.costs.values()):
            raise ValueError("Renewal costs must be positive, with c_min > 0.")
        return self

    @classmethod
    def deterministic(cls, lengths: list[int], cap: int = 64) -> "StoppingTimeSpec":
        return cls(
            kind=StoppingKind.deterministic,
            schedule=[Fraction(length) for length in lengths],
            cap=cap,
        )

    @classmethod
    def renewal(
        cls, costs: dict[int, Cost], thresholds: list[Cost], cap: int = 64
    ) -> "StoppingTimeSpec":
        return cls(kind=StoppingKind.renewal, schedule=thresholds, costs=costs, cap=cap)

    @property
    def grid(self) -> list[int]:
        return list(range(1, len(self.schedule) + 1))

    def target(self, n: int) -> Cost:
        if not 1 <= n <= len(self.schedule):
            raise ValueError(f"n={n} is outside the stopping schedule.")
        return self.schedule[n - 1]

    def step_costs(self, size: int) -> list[Cost]:
        if self.kind is StoppingKind.deterministic:
            return [Fraction(1)] * size
        missing = set(range(size)) - set(self.costs)
        if missing:
            raise ValueError(f"No renewal cost for atoms {sorted(missing)}.")
        return [self.costs[index] for index in range(size)]


class StoppedWalkLaw(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    law: FinSuppMeasure
    n_paths: int
    time_distribution: dict[int, Weight]

    @property
    def expected_time(self) -> Weight:
        total: Weight = Fraction(0)
        for time, weight in self.time_distribution.items():
            total = add_weights(total, multiply_weights(Fraction(time), weight))
        return total


class LdpRow(BaseModel):
    n: int
    L_n: float
    tail: float
    exact: bool


class LdpReport(BaseModel):
    epsilon: float
    rows: list[LdpRow]
    delta_hat: float | None
    slope_std_error: float | None
    degenerate: bool
    passed: bool


class HarnessRow(BaseModel):
    n: int
    L_n: float
    r_n: float
    M_bound: float
    M_at_least: bool
    r_theorem: float
    H_est: float
    std_error: float
    bias_budget: float
    h_mu_Ln: float
    deficit: float
    clamped: bool

    def to_record(self) -> dict:
        return self.model_dump(include=set(HARNESS_COLUMNS))


class HarnessReport(BaseModel):
    S: float
    S_max: float
    S_warning: bool
    h_mu: float
    entropy_horizon: int
    rows: list[HarnessRow]


def _reached(total: Cost, threshold: Cost) -> bool:
    return total >= threshold


def stopped_law(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    n: int,
    support_cap: int = SUPPORT_CAP,
) -> StoppedWalkLaw:
    """
    Exact law of q_{eta_n}, expanding the walk one step at a time. Live paths that agree in
    their product and accumulated cost are merged.
    """
    threshold = spec.target(n)
    costs = spec.step_costs(mu.support_size)
    model = mu.model

    # (element key, cost) -> (element, weight, path count)
    live: dict[tuple, tuple[GroupElement, Weight, int]] = {
        (identity(model).sort_key, Fraction(0)): (identity(model), Fraction(1), 1)
    }
    stopped: list[tuple[GroupElement, Weight]] = []
    times: dict[int, Weight] = defaultdict(lambda: Fraction(0))
    n_paths = 0

    for step in range(1, spec.cap + 1):
        following: dict[tuple, tuple[GroupElement, Weight, int]] = {}

        for (_, cost), (element, weight, count) in live.items():
            for atom, step_cost in zip(mu.atoms, costs, strict=True):
                product = multiply(element, atom.element)
                total = cost + step_cost
                joint = multiply_weights(weight, atom.weight)

                if _reached(total, threshold):
                    stopped.append((product, joint))
                    times[step] = add_weights(times[step], joint)
                    n_paths += count
                    continue

                key = (product.sort_key, total)
                if key in following:
                    kept, kept_weight, kept_count = following[key]
                    following[key] = (kept, add_weights(kept_weight, joint), kept_count + count)
                else:
                    following[key] = (product, joint, count)

        if len(following) > support_cap:
            logger.error(f"{len(following)} live walk states at step {step}")
            raise SupportOverflow(f"{len(following)} live states > cap {support_cap}")

        live = following
        if not live:
            break
    else:
        logger.error(f"Walk not stopped after {spec.cap} steps for n={n}")
        raise CapExceeded(f"threshold {threshold} not reached within {spec.cap} steps")

    law = FinSuppMeasure.from_pairs(model, stopped)
    if law.support_size > support_cap:
        raise SupportOverflow(f"{law.support_size} atoms > cap {support_cap}")

    logger.info(f"Stopped law n={n}: {law.support_size} atoms from {n_paths} paths")
    return StoppedWalkLaw(law=law, n_paths=n_paths, time_distribution=dict(sorted(times.items())))


def stopping_time_distribution(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    n: int,
    support_cap: int = SUPPORT_CAP,
) -> dict[int, Weight]:
    """Law of eta_n alone, tracking accumulated costs instead of products."""
    threshold = spec.target(n)
    cost_weights: dict[Cost, Weight] = defaultdict(lambda: Fraction(0))
    for atom, cost in zip(mu.atoms, spec.step_costs(mu.support_size), strict=True):
        cost_weights[cost] = add_weights(cost_weights[cost], atom.weight)

    live: dict[Cost, Weight] = {Fraction(0): Fraction(1)}
    times: dict[int, Weight] = {}

    for step in range(1, spec.cap + 1):
        following: dict[Cost, Weight] = defaultdict(lambda: Fraction(0))
        stopping: Weight = Fraction(0)

        for total, weight in live.items():
            for cost, step_weight in cost_weights.items():
                joint = multiply_weights(weight, step_weight)
                if _reached(total + cost, threshold):
                    stopping = add_weights(stopping, joint)
                else:
                    following[total + cost] = add_weights(following[total + cost], joint)

        if stopping:
            times[step] = stopping
        if len(following) > support_cap:
            raise SupportOverflow(f"{len(following)} cost states > cap {support_cap}")

        live = following
        if not live:
            return times

    logger.error(f"Stopping time exceeds the cap of {spec.cap} steps for n={n}")
    raise CapExceeded(f"threshold {threshold} not reached within {spec.cap} steps")


def _sampled_times(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    n: int,
    n_samples: int,
    rng: RngStream,
) -> np.ndarray:
    threshold = float(spec.target(n))
    costs = np.array([float(cost) for cost in spec.step_costs(mu.support_size)])
    cumulative = np.cumsum(mu.weight_array)

    def sampler(generator: np.random.Generator, size: int) -> np.ndarray:
        totals = np.zeros(size)
        times = np.zeros(size)
        for step in range(1, spec.cap + 1):
            running = totals < threshold
            if not np.any(running):
                return times
            picks = np.searchsorted(cumulative, generator.random(size) * cumulative[-1], "right")
            picks = np.minimum(picks, mu.support_size - 1)
            totals = np.where(running, totals + costs[picks], totals)
            times = np.where(running & (totals >= threshold), step, times)
        if np.any(totals < threshold):
            raise CapExceeded(f"sampled walk not stopped within {spec.cap} steps")
        return times

    return run_chunked(sampler, n_samples, rng)


def _tail_row(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    n: int,
    epsilon: float,
    n_samples: int,
    rng: RngStream,
    support_cap: int,
) -> LdpRow:
    try:
        times = stopping_time_distribution(mu, spec, n, support_cap)
    except SupportOverflow:
        logger.warning(f"Cost states overflow at n={n}; sampling the stopping time instead")
        sampled = _sampled_times(mu, spec, n, n_samples, rng)
        mean = float(np.mean(sampled))
        tail = float(np.mean(np.abs(sampled - mean) >= epsilon * mean))
        return LdpRow(n=n, L_n=mean, tail=tail, exact=False)

    mean = math.fsum(float(time * weight) for time, weight in times.items())
    tail = math.fsum(
        float(weight) for time, weight in times.items() if abs(time - mean) >= epsilon * mean
    )
    return LdpRow(n=n, L_n=mean, tail=tail, exact=True)


def ldp_check(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    epsilon: float,
    n_grid: list[int],
    n_samples: int,
    rng: RngStream,
    support_cap: int = SUPPORT_CAP,
) -> LdpReport:
    """Fit P[|eta_n - L_n| >= eps L_n] ~ exp(-delta L_n) over the grid."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive.")

    rows = [
        _tail_row(mu, spec, n, epsilon, n_samples, rng.child(n), support_cap) for n in n_grid
    ]
    positive = [row for row in rows if row.tail > 0]

    if not positive:
        logger.info("All stopping-time tails vanish: degenerate LDP")
        return LdpReport(
            epsilon=epsilon,
            rows=rows,
            delta_hat=None,
            slope_std_error=None,
            degenerate=True,
            passed=True,
        )

    if len(positive) == 1:
        row = positive[0]
        delta_hat = -math.log(row.tail) / row.L_n
        return LdpReport(
            epsilon=epsilon,
            rows=rows,
            delta_hat=delta_hat,
            slope_std_error=None,
            degenerate=False,
            passed=delta_hat > 0,
        )

    fit = linregress([row.L_n for row in positive], [math.log(row.tail) for row in positive])
    slope_error = float(fit.stderr) if np.isfinite(fit.stderr) else 0.0
    passed = fit.slope < 0 and fit.slope + LDP_SLOPE_SIGMAS * slope_error < 0
    logger.info(f"LDP fit: delta_hat={-fit.slope!r} +- {slope_error!r}")
    return LdpReport(
        epsilon=epsilon,
        rows=rows,
        delta_hat=float(-fit.slope),
        slope_std_error=slope_error,
        degenerate=False,
        passed=bool(passed),
    )


def theorem_harness(
    mu: FinSuppMeasure,
    spec: StoppingTimeSpec,
    a: float,
    S: float,
    n_grid: list[int],
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    epsilon: float = 0.1,
    c_G: float = 1.0,
    r_floor: float = R_FLOOR,
    chart_bias_constant: float = 1.0,
    support_cap: int = SUPPORT_CAP,
    entropy_horizon: int = ENTROPY_HORIZON,
) -> HarnessReport:
    """
    For each n: L_n = E[eta_n], r_n = exp(-S L_n), the separation bound M at
    ceil((1 + eps) L_n) steps, and the deficit of H_a(q_{eta_n}; r_n) against h_mu L_n.
    h_mu is estimated from mu^{*1..*entropy_horizon}.
    """
    model = mu.model
    laws = {n: stopped_law(mu, spec, n, support_cap) for n in n_grid}
    lengths = {n: float(law.expected_time) for n, law in laws.items()}
    horizons = {n: math.ceil((1 + epsilon) * lengths[n]) for n in n_grid}

    profile = separation_profile(mu, max(horizons.values()), support_cap)
    S_max = profile.S_mu_estimate
    if S <= S_max:
        logger.warning(f"S={S!r} does not exceed the largest computed S_k={S_max!r}")

    h_mu = rw_entropy_estimate(mu, entropy_horizon, support_cap)
    separations = {report.n: report for report in profile.reports}
    r_max = RADIUS_SHARE * model.chart_radius / a

    rows = []
    for index, n in enumerate(n_grid):
        length = lengths[n]
        r_n = math.exp(-S * length)
        clamped = not r_floor <= r_n <= r_max
        if clamped:
            logger.warning(f"r_n={r_n!r} clamped to [{r_floor!r}, {r_max!r}] at n={n}")
            r_n = min(max(r_n, r_floor), r_max)

        separation = separations.get(horizons[n])
        if separation is None:
            separation = separation_rate(mu, horizons[n], support_cap)
        estimate = entropy_at_scale(
            laws[n].law,
            SmoothingKernel(model=model, a=a, r=r_n),
            n_samples,
            rng.child(index),
            threads,
            chart_bias_constant,
        )
        rows.append(
            HarnessRow(
                n=n,
                L_n=length,
                r_n=r_n,
                M_bound=separation.M_n.value,
                M_at_least=separation.M_n.at_least,
                r_theorem=c_G * separation.M_n.value / a,
                H_est=estimate.value,
                std_error=estimate.std_error,
                bias_budget=estimate.bias_budget,
                h_mu_Ln=h_mu * length,
                deficit=estimate.value - h_mu * length,
                clamped=clamped,
            )
        )

    return HarnessReport(
        S=S,
        S_max=S_max,
        S_warning=S <= S_max,
        h_mu=h_mu,
        entropy_horizon=entropy_horizon,
        rows=rows,
    )
