"""Closed-form amplification model for threshold-marked quality spaces.

Everything here follows from one formula: after r full rotations applied to
a uniform superposition in which a fraction rho of solutions is marked, the
probability of measuring a marked solution is

    P(r, rho) = sin((2r + 1) * arcsin(sqrt(rho)))^2.

The model never simulates the underlying state vector; the closed form is
exact for the idealised process, so measurement is a biased coin (marked
with probability P) followed by a uniform draw from the chosen side of the
threshold. Each simulated measurement costs 2r + 1 oracle calls, charged to
a caller-owned effort ledger.

Three qualitative regimes of the threshold response are distinguished by how
r compares to the complete-convergence count r_c(rho), the real-valued
rotation count that would rotate the state exactly onto the marked subspace:
far below r_c the response is the quadratic low-convergence law
rho * (2r+1)^2, around r_c single peaks dominate, and beyond 2 r_c the
response oscillates rapidly (chaotic regime).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .dist_core import (
    FiniteDistribution,
    MarkingSpec,
    NormalDistribution,
    QualityDistribution,
    ValidationError,
    marked_ratio,
    normal_pdf,
)

LOW_CONVERGENCE_CEILING = 1.0 / 40.0


class RegimeLabel(str, Enum):
    LOW_CONVERGENCE = "low_convergence"
    HIGH_CONVERGENCE = "high_convergence"
    CHAOTIC = "chaotic"


def _check_args(r: int, rho: float) -> None:
    if r < 0 or int(r) != r:
        raise ValidationError("rotation count must be a nonnegative integer")
    if not 0.0 <= rho <= 1.0 or math.isnan(rho):
        raise ValidationError("marked ratio must lie in [0, 1]")


def grover_probability(r: int, rho: float) -> float:
    """Marked-measurement probability after r full rotations."""
    _check_args(r, rho)
    return math.sin((2 * r + 1) * math.asin(math.sqrt(rho))) ** 2


def low_convergence_probability(r: int, rho: float) -> float:
    """Small-angle limit rho * (2r+1)^2.

    Within 1% of the exact probability whenever that probability is below
    1/40, which is the regime the sampling algorithms are engineered to
    stay in.
    """
    _check_args(r, rho)
    return rho * (2 * r + 1) ** 2


class RotationEstimate(NamedTuple):
    value: float
    nearest: int


def complete_convergence_rotations(rho: float) -> RotationEstimate:
    """r_c = pi / (4 arcsin(sqrt(rho))) - 1/2, plus its nearest integer."""
    if not 0.0 < rho <= 1.0 or math.isnan(rho):
        raise ValidationError("marked ratio must lie in (0, 1]")
    value = math.pi / (4.0 * math.asin(math.sqrt(rho))) - 0.5
    return RotationEstimate(value, round(value))


def classify_regime(r: int, rho: float) -> RegimeLabel:
    """Assign (r, rho) to one of the three response regimes.

    Precedence low -> high -> chaotic with half-open boundaries: a point
    sitting exactly on a boundary belongs to the higher-index regime, e.g.
    r == 2 r_c is already chaotic. A zero marked ratio is low-convergence
    for every r (the response is identically zero).
    """
    _check_args(r, rho)
    if rho == 0.0:
        return RegimeLabel.LOW_CONVERGENCE
    r_c = complete_convergence_rotations(rho).value
    if grover_probability(r, rho) < LOW_CONVERGENCE_CEILING and r < 0.1 * r_c:
        return RegimeLabel.LOW_CONVERGENCE
    if r < 2.0 * r_c:
        return RegimeLabel.HIGH_CONVERGENCE
    return RegimeLabel.CHAOTIC


# =============================================================================
# Simulated measurement
# =============================================================================


@dataclass(frozen=True)
class AmplifiedStateModel:
    """Threshold-marked quality space prepared with r amplification rotations.

    ``rho`` and ``probability`` are fixed at construction; re-thresholding
    means building a new model, which keeps a sampling loop honest about
    when the state was (conceptually) re-prepared.
    """

    dist: QualityDistribution
    r: int
    mark: MarkingSpec
    rho: float = field(init=False)
    probability: float = field(init=False)

    def __post_init__(self) -> None:
        if self.r < 0 or int(self.r) != self.r:
            raise ValidationError("rotation count must be a nonnegative integer")
        rho = marked_ratio(self.dist, self.mark)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "probability", grover_probability(self.r, rho))

    @property
    def effort_per_measurement(self) -> int:
        return 2 * self.r + 1

    def regime(self) -> RegimeLabel:
        return classify_regime(self.r, self.rho)


def _finite_side_bounds(
    dist: FiniteDistribution, mark: MarkingSpec, marked: bool
) -> Tuple[int, int]:
    """Rank interval [start, stop) of the requested side of the threshold."""
    if mark.sense == "min":
        m = dist.count_below(mark.threshold)
        return (0, m) if marked else (m, dist.n_total)
    u = dist.count_at_or_below(mark.threshold)
    return (u, dist.n_total) if marked else (0, u)


def measure(state: AmplifiedStateModel, rng, ledger) -> Tuple[float, Optional[int], bool]:
    """One simulated measurement of the amplified state.

    Returns (quality, solution_id, marked). With probability P(r, rho) the
    draw is uniform over the marked side of the threshold, otherwise uniform
    over the unmarked side; 2r + 1 effort units are charged to ``ledger``.
    For finite spaces the solution id is the ascending-quality rank; the
    analytic normal has no ids and reports None, with quality drawn from the
    matching truncated normal by inverse cdf.
    """
    if ledger is None:
        raise ValidationError("measurement requires an effort ledger")
    ledger.charge(state.effort_per_measurement)
    marked = rng.random() < state.probability
    dist = state.dist
    if isinstance(dist, NormalDistribution):
        want_below = (state.mark.sense == "min") == marked
        if want_below:
            quality, _ = dist.draw_below(rng, state.mark.threshold)
        else:
            quality, _ = dist.draw_not_below(rng, state.mark.threshold)
        return quality, None, marked
    start, stop = _finite_side_bounds(dist, state.mark, marked)
    if stop <= start:
        # P(r, 0) = 0 and P on a fully marked space is only reachable with
        # rho = 1, so an empty side is never actually selected.
        raise ValidationError("selected side of the threshold is empty")
    rank = start + rng.randrange(stop - start)
    return dist.quality_of_rank(rank), rank, marked


# =============================================================================
# Threshold response curves
# =============================================================================


def threshold_response_curve(
    dist: QualityDistribution, r: int, t_grid: Sequence[float]
) -> List[Tuple[float, float]]:
    """P(r, rho(T)) sampled along a threshold grid (minimise sense)."""
    grid = np.asarray(t_grid, dtype=np.float64)
    if grid.size == 0:
        raise ValidationError("threshold grid is empty")
    out = []
    for t in grid:
        rho = dist.ratio_below(float(t))
        out.append((float(t), grover_probability(r, rho)))
    return out


def threshold_grid(r: int, lo: float = -8.0, hi: float = 0.0) -> np.ndarray:
    """Grid fine enough to resolve every response extremum of a standard normal.

    Adjacent extrema are closest where the density is largest; for T <= 0
    that is the upper end of the grid. The spacing there is
    pi / (2 (2r+1)) / pdf(max(lo, hi)) and the grid samples it eight times.
    """
    if hi <= lo:
        raise ValidationError("grid bounds must satisfy lo < hi")
    dense_at = 0.0 if lo <= 0.0 <= hi else min(abs(lo), abs(hi))
    tightest = math.pi / (2.0 * (2 * r + 1)) / normal_pdf(dense_at)
    step = tightest / 8.0
    n = int(math.ceil((hi - lo) / step)) + 1
    return np.linspace(lo, hi, n)


def count_extrema(values: Sequence[float]) -> Tuple[int, int]:
    """(maxima, minima) interior to the series by strict sign changes."""
    v = np.asarray(values, dtype=np.float64)
    d = np.diff(v)
    d = d[d != 0.0]
    if d.size < 2:
        return 0, 0
    flips = np.diff(np.signbit(d).astype(np.int8))
    return int(np.count_nonzero(flips == 1)), int(np.count_nonzero(flips == -1))


def expectation_response(
    dist: QualityDistribution, r: int, threshold: float
) -> Tuple[float, float]:
    """Expected measured quality at a threshold, exact and envelope variants.

    The exact value mixes the conditional means of the two sides with the
    oscillatory P(r, rho(T)); the envelope variant pins the probability to
    its rotation-capped maximum min(1, sin^2(min((2r+1) arcsin sqrt(rho),
    pi/2))), tracing the lower envelope that a tuned rotation count could
    achieve at every threshold.
    """
    rho = dist.ratio_below(threshold)
    below, above = dist.conditional_means(threshold)
    p_exact = grover_probability(r, rho)
    angle = (2 * r + 1) * math.asin(math.sqrt(rho))
    p_env = min(1.0, math.sin(min(angle, math.pi / 2.0)) ** 2)

    def mix(p: float) -> float:
        if below is None:
            return above  # type: ignore[return-value]
        if above is None:
            return below
        return p * below + (1.0 - p) * above

    return mix(p_exact), mix(p_env)


def export_response_csv(
    dist: QualityDistribution, r: int, t_grid: Sequence[float], fh: IO[str]
) -> None:
    """Write rows (T, rho, P, regime) with 17 significant digits."""
    fh.write("threshold,rho,probability,regime\n")
    for t, p in threshold_response_curve(dist, r, t_grid):
        rho = dist.ratio_below(t)
        label = classify_regime(r, rho).value
        fh.write(f"{t:.17g},{rho:.17g},{p:.17g},{label}\n")
