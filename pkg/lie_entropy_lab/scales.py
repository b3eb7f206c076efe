"""
From entropy gaps to traces at well separated scales.

A trace profile samples the witness lower bound for tr(g; u) on a geometric grid of u. Its
integral against du/u is split over alternating geometric intervals, and the better half
yields scales s_1 < ... < s_m with s_{i+1} >= A s_i whose traces add up to a fixed share of the
integral.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import trapezoid

from lie_entropy_lab.conditioning import trace_at_scale_witness
from lie_entropy_lab.entropy import entropy_between_scales
from lie_entropy_lab.errors import HypothesisFailed, RangeTooNarrow
from lie_entropy_lab.logger import logger
from lie_entropy_lab.measures import FinSuppMeasure
from lie_entropy_lab.montecarlo import EntropyEstimate, RngStream

MIN_GRID_SIZE = 8
PROBES_PER_INTERVAL = 4
# absorbs rounding in ratios of logarithms that are integers in exact arithmetic
LOG_SLACK = 1e-12


class Branch(str, Enum):
    U = "U"
    V = "V"

    @property
    def first_interval(self) -> int:
        match = {
            self.U: 0,
            self.V: 1,
        }
        return match[self]


class TraceProfile(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    grid: np.ndarray
    values: np.ndarray
    std_errors: np.ndarray
    kernel_scales: np.ndarray | None = None
    a: float
    source: str

    @model_validator(mode="after")
    def validate_grid(self):
        if self.grid.ndim != 1 or self.grid.shape[0] < 2:
            raise ValueError("A profile needs at least two grid points.")
        if self.values.shape != self.grid.shape or self.std_errors.shape != self.grid.shape:
            raise ValueError("Profile values and errors must match the grid.")
        if np.any(self.grid <= 0) or np.any(np.diff(self.grid) <= 0):
            raise ValueError("Profile grid must be positive and strictly increasing.")
        if np.any(self.values < 0):
            raise ValueError("Trace values are nonnegative.")
        return self

    @classmethod
    def synthetic(cls, grid, values, source: str = "synthetic") -> "TraceProfile":
        grid = np.asarray(grid, dtype=float)
        return cls(
            grid=grid,
            values=np.asarray(values, dtype=float),
            std_errors=np.zeros_like(grid),
            a=1.0,
            source=source,
        )

    def to_rows(self) -> list[dict]:
        return [
            {"u": u, "value": value, "std_error": error}
            for u, value, error in zip(
                self.grid.tolist(), self.values.tolist(), self.std_errors.tolist(), strict=True
            )
        ]


class ScaleSelection(BaseModel):
    scales: list[float]
    values: list[float]
    A: float = Field(gt=1)
    m: int = Field(gt=0)
    trace_sum: float = Field(ge=0)
    branch: Branch
    log_integral: float
    guaranteed: float
    slack: float = Field(ge=0)

    @model_validator(mode="after")
    def validate_spacing(self):
        for smaller, larger in zip(self.scales, self.scales[1:], strict=False):
            if larger < self.A * smaller:
                raise ValueError(f"Scales {smaller!r} and {larger!r} violate s' >= A*s.")
        return self


class GapProbe(BaseModel):
    r1: float
    r2: float
    gap: EntropyEstimate


class DyadicShiftRow(BaseModel):
    u: float
    level: int
    gap: EntropyEstimate


class GapReport(BaseModel):
    probes: list[GapProbe]
    profile: TraceProfile
    C: float
    N: int
    selection: ScaleSelection
    predicted_bound: float
    guaranteed: float
    dyadic_shifts: list[DyadicShiftRow] | None = None


def trace_profile(
    mu: FinSuppMeasure,
    a: float,
    r_lo: float,
    r_hi: float,
    grid_size: int,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
) -> TraceProfile:
    """
    Witness traces for kernel scales r on a geometric grid over [r_lo, r_hi]. Each witness
    certifies tr(g; u) at u = 2ar, so the profile grid is u.
    """
    if grid_size < MIN_GRID_SIZE:
        raise ValueError(f"grid_size must be at least {MIN_GRID_SIZE}.")
    if not 0 < r_lo < r_hi:
        raise ValueError("Profiles need 0 < r_lo < r_hi.")
    if 2 * a * r_hi >= mu.model.chart_radius:
        raise ValueError(
            f"constraint 2*a*r_hi < chart_radius violated: {2 * a * r_hi!r} >= "
            f"{mu.model.chart_radius!r}"
        )

    scales = np.geomspace(r_lo, r_hi, grid_size)

    def evaluate(index: int):
        return trace_at_scale_witness(mu, a, float(scales[index]), n_samples, rng.child(index))

    logger.info(f"Trace profile over {grid_size} scales in [{r_lo!r}, {r_hi!r}], a={a!r}")
    if threads <= 1:
        witnesses = [evaluate(index) for index in range(grid_size)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            witnesses = list(executor.map(evaluate, range(grid_size)))

    return TraceProfile(
        grid=np.array([witness.radius for witness in witnesses]),
        values=np.array([witness.t for witness in witnesses]),
        std_errors=np.array([witness.std_error for witness in witnesses]),
        kernel_scales=scales,
        a=a,
        source=f"{mu.model.display_name} measure with {mu.support_size} atoms",
    )


def _log_weights(grid: np.ndarray) -> np.ndarray:
    # trapezoid weights in log u, so that sum(weights * values) == log_integral
    steps = np.diff(np.log(grid))
    weights = np.zeros_like(grid)
    weights[:-1] += steps / 2
    weights[1:] += steps / 2
    return weights


def log_integral(profile: TraceProfile) -> float:
    """Trapezoid value of int tr(g; u) du/u over the profile grid."""
    return float(trapezoid(profile.values, np.log(profile.grid)))


def _interval_edges(r_lo: float, A: float, count: int) -> np.ndarray:
    # a_{i+1} = a_i * A in floating point keeps s' >= A*s exact across a skipped interval
    edges = [r_lo]
    for _ in range(count):
        edges.append(edges[-1] * A)
    return np.array(edges)


def select_scales(profile: TraceProfile, A: float) -> ScaleSelection:
    if not A > 1:
        raise ValueError("A must exceed 1.")

    grid, values = profile.grid, profile.values
    r_lo, r_hi = float(grid[0]), float(grid[-1])
    if r_hi <= A**2 * r_lo:
        logger.error(f"Scale range [{r_lo!r}, {r_hi!r}] is too narrow for A={A!r}")
        raise RangeTooNarrow(f"r_hi={r_hi!r} <= A^2 * r_lo={A**2 * r_lo!r}")

    m = math.ceil(math.log(r_hi / r_lo) / (2 * math.log(A)) - LOG_SLACK)
    edges = _interval_edges(r_lo, A, 2 * m)
    interval = np.minimum(np.searchsorted(edges, grid, side="right") - 1, 2 * m - 1)

    contributions = _log_weights(grid) * values
    totals = {
        branch: float(np.sum(contributions[interval % 2 == branch.first_interval]))
        for branch in Branch
    }
    branch = Branch.U if totals[Branch.U] >= totals[Branch.V] else Branch.V

    scales, picked = [], []
    for index in range(branch.first_interval, 2 * m, 2):
        members = np.flatnonzero(interval == index)
        if members.shape[0] == 0:
            continue
        best = members[np.argmax(values[members])]
        scales.append(float(grid[best]))
        picked.append(float(values[best]))

    integral = log_integral(profile)
    trace_sum = math.fsum(picked)
    guaranteed = integral / (4 * math.log(A))
    logger.info(f"Selected {len(scales)} scales on branch {branch.value}, trace sum {trace_sum!r}")
    return ScaleSelection(
        scales=scales,
        values=picked,
        A=A,
        m=m,
        trace_sum=trace_sum,
        branch=branch,
        log_integral=integral,
        guaranteed=guaranteed,
        slack=max(0.0, guaranteed - trace_sum),
    )


def probe_scales(r1: float, r2: float) -> list[tuple[float, float]]:
    """Interior points of [r1, 2 r1] x [r2/2, 2 r2], evenly spaced in log scale."""
    offsets = [(k + 0.5) / PROBES_PER_INTERVAL for k in range(PROBES_PER_INTERVAL)]
    firsts = [r1 * 2**offset for offset in offsets]
    seconds = [r2 / 2 * 4**offset for offset in offsets]
    return [(first, second) for first in firsts for second in seconds]


def dyadic_shift_profile(
    mu: FinSuppMeasure,
    a: float,
    r1: float,
    shifts: list[float],
    levels: int,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    chart_bias_constant: float = 1.0,
) -> list[DyadicShiftRow]:
    """k_i(u) = H_a(g; 2^(i-1) u r1 | 2^i u r1) for u in [1, 2) and i = 1..levels."""
    rows = []
    for shift_index, u in enumerate(shifts):
        if not 1 <= u < 2:
            raise ValueError("Dyadic shifts lie in [1, 2).")
        for level in range(1, levels + 1):
            gap = entropy_between_scales(
                mu,
                a,
                2 ** (level - 1) * u * r1,
                2**level * u * r1,
                n_samples,
                rng.child(shift_index).child(level),
                threads,
                chart_bias_constant,
            )
            rows.append(DyadicShiftRow(u=u, level=level, gap=gap))
    return rows


def entropy_gap_to_trace_sum(
    mu: FinSuppMeasure,
    a: float,
    r1: float,
    r2: float,
    A: float,
    n_samples: int,
    rng: RngStream,
    threads: int = 1,
    grid_size: int = 32,
    required_gap: float = 0.0,
    sigmas: float = 4.0,
    c_err: float = 1.0,
    chart_bias_constant: float = 1.0,
    shifts: list[float] | None = None,
) -> GapReport:
    """
    Probe the entropy-gap hypothesis H_a(g; r1'|r2') >= C, then select scales in (a r1, 4 a r2)
    from the witness trace profile.
    """
    if not 0 < r1 < r2:
        raise ValueError("Gap pipeline needs 0 < r1 < r2.")
    if 4 * a * r2 >= mu.model.chart_radius:
        raise ValueError(
            f"constraint 4*a*r2 < chart_radius violated: {4 * a * r2!r} >= "
            f"{mu.model.chart_radius!r}"
        )

    probes = []
    for index, (first, second) in enumerate(probe_scales(r1, r2)):
        gap = entropy_between_scales(
            mu, a, first, second, n_samples, rng.child(0).child(index), threads, chart_bias_constant
        )
        probes.append(GapProbe(r1=first, r2=second, gap=gap))
        if gap.value < -gap.tolerance(sigmas):
            logger.error(f"Entropy gap at ({first!r}, {second!r}) is negative: {gap.value!r}")
            raise HypothesisFailed(f"gap {gap.value!r} at r1'={first!r}, r2'={second!r}")

    lowest = min(probes, key=lambda probe: probe.gap.value)
    C = lowest.gap.value
    if required_gap > 0 and C + lowest.gap.tolerance(sigmas) < required_gap:
        logger.error(f"Smallest probed gap {C!r} is below the required {required_gap!r}")
        raise HypothesisFailed(f"min gap {C!r} < required {required_gap!r}")

    N = math.ceil(math.log2(r2 / r1) - LOG_SLACK) - 1
    profile = trace_profile(mu, a, r1 / 2, 2 * r2, grid_size, n_samples, rng.child(1), threads)
    selection = select_scales(profile, A)

    error_terms = N * c_err * (math.exp(-(a**2) / 4) + a**3 * r2)
    dyadic = None
    if shifts:
        dyadic = dyadic_shift_profile(
            mu, a, r1, shifts, max(N, 1), n_samples, rng.child(2), threads, chart_bias_constant
        )

    return GapReport(
        probes=probes,
        profile=profile,
        C=C,
        N=N,
        selection=selection,
        predicted_bound=(C - error_terms) / (a**2 * math.log(A)),
        guaranteed=selection.guaranteed,
        dyadic_shifts=dyadic,
    )
