"""Seeded Monte Carlo runner for success-probability-vs-effort curves.

A run is one independent execution of an algorithm against a quality
distribution with a designated target set; its outcome is the effort at
which a target solution was first measured (or nothing, if the effort cap
hit first). A curve is the empirical CDF of those first-hit efforts over a
logarithmic grid, with Wilson 95% intervals per point.

Per-run seeds come from a 64-bit splittable mix of (master seed, run index),
so results are independent of scheduling: any worker count produces the
same curve, byte for byte.

Two simulation routes exist for the memoryless algorithms. The loop route
actually executes the sampling loop; the geometric route draws the first-hit
count directly from the geometric distribution with the exact per-draw hit
probability, which is the same distribution by construction (uniform draws
with replacement are memoryless, and the amplified sampling phase holds
(r, T) fixed). The geometric route makes nanoscale target ratios tractable;
the equivalence of the two routes is itself under test.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from multiprocessing import get_context
from typing import Callable, IO, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from .algorithms import (
    DEFAULT_EFFORT_CAP,
    BudgetExhausted,
    EffortLedger,
    GasConfig,
    MaoaConfig,
    TargetReached,
    classical_run,
    gas_run,
    maoa_run,
    maoa_sample_phase,
)
from .dist_core import (
    FiniteDistribution,
    NormalDistribution,
    QualityDistribution,
    ValidationError,
)
from .grover_model import grover_probability

import random as _random

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

ALGORITHMS = ("classical", "maoa", "maoa-sampling", "gas", "rgas")


def derive_seed(master_seed: int, index: int) -> int:
    """Splittable per-run seed: 64-bit mix of the master seed and run index."""
    z = (master_seed + index * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


# =============================================================================
# Experiment description
# =============================================================================


@dataclass(frozen=True)
class TargetSpec:
    """Exactly one of: best-fraction ratio, quality cutoff, explicit ids."""

    ratio: Optional[float] = None
    cutoff: Optional[float] = None
    solution_ids: Optional[frozenset] = None

    def __post_init__(self) -> None:
        given = sum(x is not None for x in (self.ratio, self.cutoff, self.solution_ids))
        if given != 1:
            raise ValidationError("target needs exactly one of ratio / cutoff / ids")
        if self.ratio is not None and not 0.0 < self.ratio < 1.0:
            raise ValidationError("target ratio must lie in (0, 1)")
        if self.solution_ids is not None and not self.solution_ids:
            raise ValidationError("explicit target id set is empty")


@dataclass(frozen=True)
class ExperimentSpec:
    dist: QualityDistribution
    algorithm: str
    target: TargetSpec
    run_count: int = 10_000
    master_seed: int = 0
    workers: int = 1
    effort_cap: int = DEFAULT_EFFORT_CAP
    effort_grid: Optional[Sequence[int]] = None
    config: Optional[Union[MaoaConfig, GasConfig]] = None
    threshold: Optional[float] = None  # maoa-sampling: fixed sampling threshold
    simulate: str = "auto"  # auto | loop | geometric

    def __post_init__(self) -> None:
        if self.algorithm not in ALGORITHMS:
            raise ValidationError(f"unknown algorithm {self.algorithm!r}")
        if self.run_count < 1:
            raise ValidationError("run count must be at least 1")
        if self.workers < 1:
            raise ValidationError("worker count must be at least 1")
        if self.effort_cap < 1:
            raise ValidationError("effort cap must be at least 1")
        if self.simulate not in ("auto", "loop", "geometric"):
            raise ValidationError("simulate must be auto, loop or geometric")
        if self.algorithm in ("gas", "rgas") and not isinstance(self.config, GasConfig):
            raise ValidationError(f"{self.algorithm} needs a GasConfig")
        if self.algorithm == "maoa" and not isinstance(self.config, MaoaConfig):
            raise ValidationError("maoa needs a MaoaConfig")
        if self.algorithm == "maoa-sampling":
            if not isinstance(self.config, MaoaConfig):
                raise ValidationError("maoa-sampling needs a MaoaConfig")
            if self.threshold is None and self.target.ratio is None and self.target.cutoff is None:
                raise ValidationError("maoa-sampling needs a threshold or a ratio/cutoff target")


# --- target resolution -------------------------------------------------------


def _target_rank_cap(dist: FiniteDistribution, target: TargetSpec) -> Optional[int]:
    """Number of leading quality ranks that are targets, None for id sets."""
    if target.ratio is not None:
        return int(math.floor(target.ratio * dist.n_total + 0.5))
    if target.cutoff is not None:
        return dist.count_below(target.cutoff)
    return None


def target_probability(dist: QualityDistribution, target: TargetSpec) -> float:
    """Exact probability that one uniform sample is a target solution."""
    if isinstance(dist, NormalDistribution):
        if target.solution_ids is not None:
            raise ValidationError("the analytic normal has no solution ids")
        if target.ratio is not None:
            return target.ratio
        return dist.ratio_below(target.cutoff)
    if target.solution_ids is not None:
        return len(target.solution_ids) / dist.n_total
    return _target_rank_cap(dist, target) / dist.n_total


def _stop_rule(dist: QualityDistribution, target: TargetSpec) -> Callable:
    if isinstance(dist, NormalDistribution):
        cutoff = target.cutoff if target.cutoff is not None else dist.quantile(target.ratio)
        return lambda q, sid: q < cutoff
    if target.solution_ids is not None:
        ids = target.solution_ids
        return lambda q, sid: sid in ids
    cap = _target_rank_cap(dist, target)
    return lambda q, sid: sid is not None and sid < cap


def _sampling_threshold(spec: ExperimentSpec) -> float:
    if spec.threshold is not None:
        return spec.threshold
    dist, target = spec.dist, spec.target
    if target.cutoff is not None:
        return target.cutoff
    return dist.quantile(target.ratio)


# =============================================================================
# Single-run simulation
# =============================================================================


def _geometric_draw(rng, p: float) -> int:
    """First-success trial count, exact inverse-cdf geometric."""
    if p <= 0.0:
        raise ValidationError("geometric draw needs a positive probability")
    if p >= 1.0:
        return 1
    u = rng.random()
    while u <= 0.0:
        u = rng.random()
    return int(math.log(u) / math.log1p(-p)) + 1


def _sampling_hit_probability(spec: ExperimentSpec) -> Tuple[float, int]:
    """Per-measurement target probability and per-measurement effort for the
    fixed-threshold amplified sampling phase."""
    dist = spec.dist
    r = spec.config.r_f
    t = _sampling_threshold(spec)
    mu = target_probability(dist, spec.target)
    rho = dist.ratio_below(t)
    p_amp = grover_probability(r, rho)
    if rho <= 0.0:
        q_hit = mu if rho == 0.0 else 0.0
    else:
        inside = min(mu, rho) / rho
        outside = max(0.0, mu - rho) / (1.0 - rho) if rho < 1.0 else 0.0
        q_hit = p_amp * inside + (1.0 - p_amp) * outside
    return q_hit, 2 * r + 1


def _use_geometric(spec: ExperimentSpec) -> bool:
    if spec.simulate == "loop":
        return False
    if spec.algorithm == "classical":
        return True
    if spec.algorithm == "maoa-sampling" and spec.target.solution_ids is None:
        return True
    if spec.simulate == "geometric":
        raise ValidationError(f"no geometric route for {spec.algorithm}")
    return False


def simulate_run(spec: ExperimentSpec, index: int) -> Optional[int]:
    """First-hit effort of one seeded run, or None if the cap hit first."""
    rng = _random.Random(derive_seed(spec.master_seed, index))
    dist = spec.dist

    if _use_geometric(spec):
        if spec.algorithm == "classical":
            p, per = target_probability(dist, spec.target), 1
        else:
            p, per = _sampling_hit_probability(spec)
        if p <= 0.0:
            return None
        effort = _geometric_draw(rng, p) * per
        return effort if effort <= spec.effort_cap else None

    stop = _stop_rule(dist, spec.target)
    ledger = EffortLedger(cap=spec.effort_cap)
    if spec.algorithm == "classical":
        result = classical_run(dist, rng, ledger, stop)
    elif spec.algorithm in ("gas", "rgas"):
        result = gas_run(dist, spec.config, rng, ledger, stop)
    elif spec.algorithm == "maoa":
        result = maoa_run(dist, spec.config, rng, ledger, stop)
    else:  # maoa-sampling, loop route
        t = _sampling_threshold(spec)
        ledger.stop_rule = stop
        try:
            for _ in maoa_sample_phase(dist, spec.config.r_f, t, rng, ledger):
                pass
            raise AssertionError("unreachable: sampling phase only ends by signal")
        except TargetReached:
            return ledger.calls
        except BudgetExhausted:
            return None
    return result.total_effort if result.finished else None


# =============================================================================
# Curves
# =============================================================================

_WILSON_Z = 1.959963984540054  # two-sided 95%


def wilson_interval(successes: int, n: int) -> Tuple[float, float]:
    if n < 1:
        raise ValidationError("interval needs at least one trial")
    z2 = _WILSON_Z**2
    phat = successes / n
    denom = 1.0 + z2 / n
    centre = (phat + z2 / (2 * n)) / denom
    half = _WILSON_Z * math.sqrt(phat * (1 - phat) / n + z2 / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == n else min(1.0, centre + half)
    return lo, hi


def log_effort_grid(hi: int, lo: int = 1, points_per_decade: int = 64) -> np.ndarray:
    """Integer efforts, roughly evenly spaced in log10, deduplicated."""
    if hi < lo or lo < 1:
        raise ValidationError("grid bounds must satisfy 1 <= lo <= hi")
    n_steps = int(math.ceil(math.log10(hi / lo) * points_per_decade)) + 1
    exponents = np.log10(lo) + np.arange(n_steps + 1) / points_per_decade
    grid = np.unique(np.rint(10.0**exponents).astype(np.int64))
    grid = grid[(grid >= lo) & (grid <= hi)]
    if len(grid) == 0 or grid[-1] < hi:
        grid = np.append(grid, np.int64(hi))
    return grid


@dataclass
class SuccessCurve:
    efforts: np.ndarray
    fraction: np.ndarray
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    n_runs: int
    n_unfinished: int
    unreachable: bool
    success_efforts: np.ndarray  # sorted first-hit efforts of finished runs

    def probability_at(self, effort: float) -> float:
        i = int(np.searchsorted(self.efforts, effort, side="right")) - 1
        return float(self.fraction[i]) if i >= 0 else 0.0

    def effort_at(self, probability: float, bound: str = "point") -> float:
        """Smallest grid effort reaching the given success probability.

        Log-linear interpolation between the bracketing grid points;
        ``bound`` selects the curve ("point") or a Wilson edge ("lo"/"hi").
        """
        series = {"point": self.fraction, "lo": self.wilson_lo, "hi": self.wilson_hi}[bound]
        idx = int(np.searchsorted(series, probability, side="left"))
        if idx >= len(series):
            raise ValidationError("curve never reaches the requested probability")
        if idx == 0 or series[idx] == series[idx - 1]:
            return float(self.efforts[idx])
        f0, f1 = series[idx - 1], series[idx]
        e0, e1 = math.log(self.efforts[idx - 1]), math.log(self.efforts[idx])
        w = (probability - f0) / (f1 - f0)
        value = math.exp(e0 + w * (e1 - e0))
        return min(max(value, float(self.efforts[idx - 1])), float(self.efforts[idx]))


def build_curve(
    success_efforts: Sequence[Optional[int]],
    grid: np.ndarray,
    unreachable: bool = False,
) -> SuccessCurve:
    outcomes = list(success_efforts)
    n = len(outcomes)
    finished = np.sort(np.array([e for e in outcomes if e is not None], dtype=np.int64))
    hits = np.searchsorted(finished, grid, side="right")
    lo = np.empty(len(grid))
    hi = np.empty(len(grid))
    for i, k in enumerate(hits):
        lo[i], hi[i] = wilson_interval(int(k), n)
    return SuccessCurve(
        efforts=np.asarray(grid, dtype=np.int64),
        fraction=hits / n,
        wilson_lo=lo,
        wilson_hi=hi,
        n_runs=n,
        n_unfinished=n - len(finished),
        unreachable=unreachable,
        success_efforts=finished,
    )


# --- parallel execution -------------------------------------------------------

_WORKER_SPEC: Optional[ExperimentSpec] = None


def _init_worker(spec: ExperimentSpec) -> None:
    global _WORKER_SPEC
    _WORKER_SPEC = spec


def _run_chunk(bounds: Tuple[int, int]) -> List[Optional[int]]:
    lo, hi = bounds
    return [simulate_run(_WORKER_SPEC, i) for i in range(lo, hi)]


def run_experiment(spec: ExperimentSpec) -> SuccessCurve:
    """Execute all runs and build the success curve.

    Outcomes are keyed by run index, so the curve does not depend on the
    worker count or scheduling. An unreachable target (zero probability)
    short-circuits to an all-zero flagged curve.
    """
    if target_probability(spec.dist, spec.target) <= 0.0:
        grid = np.asarray(spec.effort_grid if spec.effort_grid is not None else log_effort_grid(spec.effort_cap), dtype=np.int64)
        return build_curve([None] * spec.run_count, grid, unreachable=True)

    if spec.workers == 1:
        outcomes = [simulate_run(spec, i) for i in range(spec.run_count)]
    else:
        chunk = max(1, math.ceil(spec.run_count / (spec.workers * 8)))
        bounds = [
            (lo, min(lo + chunk, spec.run_count)) for lo in range(0, spec.run_count, chunk)
        ]
        ctx = get_context("fork")
        with ctx.Pool(spec.workers, initializer=_init_worker, initargs=(spec,)) as pool:
            outcomes = [e for part in pool.map(_run_chunk, bounds) for e in part]

    if spec.effort_grid is not None:
        grid = np.asarray(spec.effort_grid, dtype=np.int64)
    else:
        finite = [e for e in outcomes if e is not None]
        hi = max(finite) if finite else spec.effort_cap
        grid = log_effort_grid(hi)
    return build_curve(outcomes, grid)


# =============================================================================
# Analytic overlays
# =============================================================================


def analytic_classical(effort: float, mu: float) -> float:
    """Success probability of uniform sampling: 1 - (1 - mu)^e."""
    if not 0.0 <= mu <= 1.0:
        raise ValidationError("target ratio must lie in [0, 1]")
    if effort <= 0.0 or mu == 0.0:
        return 0.0
    if mu == 1.0:
        return 1.0
    return -math.expm1(effort * math.log1p(-mu))


def analytic_maoa(effort: float, mu: float, r: int) -> float:
    """Low-convergence sampling-phase law: 1 - (1 - mu (2r+1)^2)^(e/(2r+1)).

    Valid for small target ratios; an amplified ratio above 1 is clamped to
    1 with a warning, as the law has left its validity window there.
    """
    if not 0.0 <= mu <= 1.0:
        raise ValidationError("target ratio must lie in [0, 1]")
    if r < 0 or int(r) != r:
        raise ValidationError("rotation count must be a nonnegative integer")
    amplified = mu * (2 * r + 1) ** 2
    if amplified > 1.0:
        warnings.warn(
            "amplified target ratio exceeds 1; clamped (outside low-convergence validity)",
            RuntimeWarning,
        )
        amplified = 1.0
    if effort <= 0.0 or amplified == 0.0:
        return 0.0
    if amplified == 1.0:
        return 1.0
    return -math.expm1(effort / (2 * r + 1) * math.log1p(-amplified))


class SpeedupEstimate(NamedTuple):
    value: float
    low: float
    high: float
    probability: float


def speedup_estimate(
    classical: SuccessCurve, candidate: SuccessCurve, probability: float = 0.5
) -> SpeedupEstimate:
    """Classical-to-candidate effort ratio at matched success probability.

    The band pairs the optimistic edge of one curve with the pessimistic
    edge of the other (Wilson 95% per curve), so it is conservative.
    """
    if not 0.0 < probability < 1.0:
        raise ValidationError("matched probability must lie in (0, 1)")
    e_classical = classical.effort_at(probability)
    e_candidate = candidate.effort_at(probability)
    lo = classical.effort_at(probability, "hi") / candidate.effort_at(probability, "lo")
    hi = classical.effort_at(probability, "lo") / candidate.effort_at(probability, "hi")
    return SpeedupEstimate(e_classical / e_candidate, min(lo, hi), max(lo, hi), probability)


# =============================================================================
# Output
# =============================================================================


def write_curve_csv(
    curve: SuccessCurve,
    fh: IO[str],
    analytic: Optional[Callable[[float], float]] = None,
) -> None:
    """Rows (effort, empirical_p, wilson_lo, wilson_hi, analytic_p)."""
    fh.write("effort,empirical_p,wilson_lo,wilson_hi,analytic_p\n")
    for i, e in enumerate(curve.efforts):
        a = analytic(float(e)) if analytic is not None else math.nan
        fh.write(
            f"{int(e)},{curve.fraction[i]:.17g},{curve.wilson_lo[i]:.17g},"
            f"{curve.wilson_hi[i]:.17g},{a:.17g}\n"
        )


def write_spec_text(spec: ExperimentSpec, fh: IO[str]) -> None:
    """Record an experiment description as sorted key=value lines."""
    pairs = {
        "algorithm": spec.algorithm,
        "run_count": spec.run_count,
        "master_seed": spec.master_seed,
        "effort_cap": spec.effort_cap,
        "workers": spec.workers,
        "simulate": spec.simulate,
    }
    if spec.target.ratio is not None:
        pairs["target.ratio"] = f"{spec.target.ratio:.17g}"
    if spec.target.cutoff is not None:
        pairs["target.cutoff"] = f"{spec.target.cutoff:.17g}"
    if spec.target.solution_ids is not None:
        pairs["target.solution_ids"] = ",".join(str(i) for i in sorted(spec.target.solution_ids))
    if spec.threshold is not None:
        pairs["threshold"] = f"{spec.threshold:.17g}"
    if spec.config is not None:
        for name in spec.config.__dataclass_fields__:
            pairs[f"config.{name}"] = getattr(spec.config, name)
    if spec.effort_grid is not None:
        pairs["effort_grid"] = ",".join(str(int(e)) for e in spec.effort_grid)
    for key in sorted(pairs):
        fh.write(f"{key}={pairs[key]}\n")
