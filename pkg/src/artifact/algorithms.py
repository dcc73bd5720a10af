"""The three optimisation strategies with exact effort accounting.

* The amplified threshold navigator (two-phase): a threshold-finding phase
  that walks the rotation schedule 1, 2, 4, ..., r_f while tracking the
  response peak, then settles just below the target success rate with an
  adaptive descent; and a sampling phase that repeatedly measures the
  maximally amplified state at the final threshold.
* Adaptive amplified search with randomised rotation counts (optionally
  rotation-restricted): keep the best quality seen, mark everything better,
  grow the rotation range geometrically on failure, reset on improvement.
* Classical uniform sampling with replacement as the baseline.

Every quality-function call is charged to an EffortLedger: 2r + 1 per
amplified measurement, 1 per classical sample. The ledger also carries the
(effort, best quality) event log and the run's stopping machinery; budget
exhaustion is an exception that run wrappers convert into a truncated-run
marker rather than a failure.

The threshold-phase internals (find_peak, threshold_for_as, adaptive_search)
follow their published pseudocode line by line, including the quirks: the
streak early-return skips the weighted average, ties at the threshold never
count as hits, and the descent loop exits only when an improving hit has
just taken at least 40 measurements to find (empirical success rate at or
below 1/40).
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field
from typing import Callable, IO, Iterator, List, NamedTuple, Optional, Tuple

from .dist_core import (
    MarkingSpec,
    QualityDistribution,
    ValidationError,
    sample_uniform,
)
from .grover_model import AmplifiedStateModel, measure

DEFAULT_EFFORT_CAP = 10**8

# Stop rules see (quality, solution_id) for every charged draw.
StopRule = Callable[[float, Optional[int]], bool]


class BudgetExhausted(RuntimeError):
    """Raised by the ledger when the hard effort cap is crossed."""

    def __init__(self, calls: int, cap: int):
        super().__init__(f"effort cap {cap} exhausted after {calls} calls")
        self.calls = calls
        self.cap = cap


class TargetReached(Exception):
    """Control-flow signal: the attached stop rule accepted a measured solution."""

    def __init__(self, quality: float, solution_id: Optional[int], effort: int):
        super().__init__(f"target reached at effort {effort}")
        self.quality = quality
        self.solution_id = solution_id
        self.effort = effort


class EffortEvent(NamedTuple):
    effort: int
    best_quality: float
    r_used: int
    marked: bool


class EffortLedger:
    """Monotone effort counter plus best-quality event log.

    The ledger is the one object threaded through every phase of a run, so
    it is also where the stop rule lives: ``observe`` sees every measured
    solution regardless of which subroutine produced it and raises
    TargetReached the moment the rule accepts one. ``charge`` raises
    BudgetExhausted when the cap is crossed; the overrunning charge stays
    counted.
    """

    __slots__ = ("calls", "cap", "events", "stop_rule")

    def __init__(self, cap: Optional[int] = DEFAULT_EFFORT_CAP, stop_rule: Optional[StopRule] = None):
        if cap is not None and cap <= 0:
            raise ValidationError("effort cap must be positive or None")
        self.calls = 0
        self.cap = cap
        self.events: List[EffortEvent] = []
        self.stop_rule = stop_rule

    def charge(self, amount: int) -> None:
        if amount <= 0:
            raise ValidationError("effort charges must be positive")
        self.calls += int(amount)
        if self.cap is not None and self.calls > self.cap:
            raise BudgetExhausted(self.calls, self.cap)

    def observe(
        self,
        quality: float,
        solution_id: Optional[int] = None,
        r_used: int = 0,
        marked: bool = False,
    ) -> None:
        if not self.events or quality < self.events[-1].best_quality:
            self.events.append(EffortEvent(self.calls, quality, r_used, marked))
        if self.stop_rule is not None and self.stop_rule(quality, solution_id):
            raise TargetReached(quality, solution_id, self.calls)

    @property
    def best_quality(self) -> float:
        return self.events[-1].best_quality if self.events else math.nan


def export_event_log(events: List[EffortEvent], fh: IO[str]) -> None:
    fh.write("effort,best_quality,r_used,marked\n")
    for e in events:
        fh.write(f"{e.effort},{e.best_quality:.17g},{e.r_used},{int(e.marked)}\n")


# =============================================================================
# Configuration
# =============================================================================


@dataclass(frozen=True)
class MaoaConfig:
    r_f: int = 64
    initial_sample: int = 200
    streak_target: int = 20
    steps_per_peak_scan: int = 20
    stepsize_divisor: int = 10
    as_success_cap: int = 40
    weight_power: int = 4

    def __post_init__(self) -> None:
        # 0 means sampling without amplification; the doubling schedule itself
        # needs a power of two
        if self.r_f < 0 or self.r_f & (self.r_f - 1):
            raise ValidationError("final rotation count must be 0 or a power of two")
        for name in (
            "initial_sample",
            "streak_target",
            "steps_per_peak_scan",
            "stepsize_divisor",
            "as_success_cap",
            "weight_power",
        ):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be positive")


@dataclass(frozen=True)
class GasConfig:
    r_max: int
    growth: float = 1.34

    def __post_init__(self) -> None:
        if self.growth <= 1.0:
            raise ValidationError("rotation growth factor must exceed 1")
        if self.r_max < 1:
            raise ValidationError("rotation cap must be at least 1")


def gas_rotation_cap(n_total: int) -> int:
    """Unrestricted-search cap: rotations that fully converge on a single
    solution out of n_total, nearest integer."""
    from .grover_model import complete_convergence_rotations

    if n_total < 2:
        raise ValidationError("need at least two solutions")
    return max(1, complete_convergence_rotations(1.0 / n_total).nearest)


# =============================================================================
# Threshold-phase subroutines (traced from the published pseudocode)
# =============================================================================

StateFactory = Callable[[int, float], AmplifiedStateModel]


def _factory_for(dist: QualityDistribution) -> StateFactory:
    return lambda r, threshold: AmplifiedStateModel(dist, r, MarkingSpec(threshold))


class PeakEstimate(NamedTuple):
    threshold: float
    warned: bool


def find_peak(
    r: int,
    t_start: float,
    stepsize: float,
    cfg: MaoaConfig,
    factory: StateFactory,
    rng,
    ledger: EffortLedger,
) -> PeakEstimate:
    """Scan decreasing thresholds for the response peak at rotation count r.

    Each scanned threshold is measured until the first miss; a full streak
    of 20 hits returns that threshold immediately (even on the last scan
    step, skipping the average). Otherwise the scanned thresholds are
    combined by a count^4-weighted mean, which concentrates the estimate on
    the thresholds with the highest observed success rate. If no scanned
    threshold produced a single hit, the final (lowest) threshold is
    returned with the warning flag set.
    """
    total = 0.0
    weights = 0.0
    t = t_start
    for _ in range(cfg.steps_per_peak_scan):
        t -= stepsize
        state = factory(r, t)
        count = 0
        while count < cfg.streak_target:
            quality, sid, marked = measure(state, rng, ledger)
            ledger.observe(quality, sid, r, marked)
            if quality < t:
                count += 1
            else:
                total += t * count**cfg.weight_power
                weights += count**cfg.weight_power
                break
        if count == cfg.streak_target:
            return PeakEstimate(t, False)
    if weights == 0.0:
        return PeakEstimate(t, True)
    return PeakEstimate(total / weights, False)


def threshold_for_as(
    r: int,
    t_start: float,
    stepsize: float,
    cfg: MaoaConfig,
    factory: StateFactory,
    rng,
    ledger: EffortLedger,
) -> float:
    """One measurement per step below the peak; best quality seen wins."""
    best = t_start
    t = t_start
    for _ in range(cfg.steps_per_peak_scan):
        t -= stepsize
        quality, sid, marked = measure(factory(r, t), rng, ledger)
        ledger.observe(quality, sid, r, marked)
        if quality < best:
            best = quality
    return best


def adaptive_search(
    r: int,
    threshold: float,
    cfg: MaoaConfig,
    factory: StateFactory,
    rng,
    ledger: EffortLedger,
) -> float:
    """Descend through measured qualities until hits get rare.

    Every outer pass measures until one hit below the current threshold and
    moves the threshold onto it; the loop ends when that hit has just taken
    at least 40 measurements, i.e. the empirical success rate has dropped
    to roughly 1/40 or below. The returned threshold is the quality of that
    final, hard-won hit.
    """
    count = 0
    while count < cfg.as_success_cap:
        count = 0
        state = factory(r, threshold)
        hit = False
        while not hit:
            quality, sid, marked = measure(state, rng, ledger)
            ledger.observe(quality, sid, r, marked)
            count += 1
            if quality < threshold:
                hit = True
                threshold = quality
    return threshold


class ThresholdResult(NamedTuple):
    threshold: float
    warnings: int


def maoa_final_threshold(
    dist: QualityDistribution,
    r_f: Optional[int] = None,
    cfg: Optional[MaoaConfig] = None,
    rng=None,
    ledger: Optional[EffortLedger] = None,
) -> ThresholdResult:
    """Find the threshold whose marked set is maximally amplified at r_f.

    Schedule: 200 classical samples fix the starting threshold (median) and
    step size ((median - Q1)/10); the response peak is then chased at
    r = 1, 2, 4, ..., r_f/2, each scan starting from the previous peak with
    a step one tenth of the last two peaks' gap; a 20-step single-measurement
    descent seeds the adaptive search, which runs at r_f itself.

    The two smallest schedules shrink rather than change shape: r_f = 1 runs
    one peak scan and goes straight to the adaptive search; r_f = 2 seeds
    the descent from the r = 1 peak with the initial step size.
    """
    if cfg is None:
        cfg = MaoaConfig(r_f=r_f if r_f is not None else 64)
    if r_f is None:
        r_f = cfg.r_f
    if r_f != cfg.r_f:
        raise ValidationError("explicit final rotation count conflicts with config")
    if r_f < 1:
        raise ValidationError("the threshold schedule needs at least one rotation")
    if rng is None or ledger is None:
        raise ValidationError("rng and ledger are required")

    factory = _factory_for(dist)
    qualities = []
    for _ in range(cfg.initial_sample):
        ledger.charge(1)
        quality, sid = sample_uniform(dist, rng)
        ledger.observe(quality, sid)
        qualities.append(quality)
    median = statistics.median(qualities)
    quartile = statistics.quantiles(qualities, n=4)[0]
    stepsize = (median - quartile) / cfg.stepsize_divisor

    warnings = 0
    peak, warned = find_peak(1, median, stepsize, cfg, factory, rng, ledger)
    warnings += warned
    if r_f == 1:
        return ThresholdResult(adaptive_search(1, peak, cfg, factory, rng, ledger), warnings)
    if r_f == 2:
        seed = threshold_for_as(2, peak, stepsize, cfg, factory, rng, ledger)
        return ThresholdResult(adaptive_search(2, seed, cfg, factory, rng, ledger), warnings)

    t_prev = peak
    t_cur, warned = find_peak(2, peak, stepsize, cfg, factory, rng, ledger)
    warnings += warned
    r = 4
    while r < r_f:
        stepsize = (t_prev - t_cur) / cfg.stepsize_divisor
        t_prev, t_cur = t_cur, None
        t_cur, warned = find_peak(r, t_prev, stepsize, cfg, factory, rng, ledger)
        warnings += warned
        r *= 2
    stepsize = (t_prev - t_cur) / cfg.stepsize_divisor
    seed = threshold_for_as(r_f, t_cur, stepsize, cfg, factory, rng, ledger)
    return ThresholdResult(adaptive_search(r_f, seed, cfg, factory, rng, ledger), warnings)


def maoa_sample_phase(
    dist: QualityDistribution,
    r_f: int,
    threshold: float,
    rng,
    ledger: EffortLedger,
    stop_rule: Optional[StopRule] = None,
) -> Iterator[Tuple[float, Optional[int], bool]]:
    """Stream measurements of the maximally amplified state at fixed (r_f, T)."""
    state = AmplifiedStateModel(dist, r_f, MarkingSpec(threshold))
    while True:
        quality, sid, marked = measure(state, rng, ledger)
        ledger.observe(quality, sid, r_f, marked)
        yield quality, sid, marked
        if stop_rule is not None and stop_rule(quality, sid):
            return


# =============================================================================
# Run wrappers: full algorithms returning replayable results
# =============================================================================


@dataclass
class RunResult:
    events: List[EffortEvent]
    total_effort: int
    finished: bool
    truncated: bool
    best_quality: float
    measurements: Optional[int]  # charged draws where the loop is flat; None otherwise
    max_rotation: int
    threshold: Optional[float] = None
    warnings: int = 0


def _result(ledger: EffortLedger, finished: bool, truncated: bool, measurements: Optional[int],
            max_rotation: int, threshold: Optional[float] = None, warnings: int = 0) -> RunResult:
    return RunResult(
        events=list(ledger.events),
        total_effort=ledger.calls,
        finished=finished,
        truncated=truncated,
        best_quality=ledger.best_quality,
        measurements=measurements,
        max_rotation=max_rotation,
        threshold=threshold,
        warnings=warnings,
    )


def maoa_run(
    dist: QualityDistribution,
    cfg: MaoaConfig,
    rng,
    ledger: EffortLedger,
    stop_rule: Optional[StopRule] = None,
) -> RunResult:
    """Both phases end to end; the stop rule sees every measured solution.

    Without a stop rule only the threshold phase runs (sampling forever has
    no observable outcome); with one, the sampling phase continues until the
    rule fires or the budget runs out.
    """
    ledger.stop_rule = stop_rule
    finished = truncated = False
    threshold: Optional[float] = None
    warnings = 0
    try:
        threshold, warnings = maoa_final_threshold(dist, cfg.r_f, cfg, rng, ledger)
        if stop_rule is not None:
            for _ in maoa_sample_phase(dist, cfg.r_f, threshold, rng, ledger):
                pass
    except TargetReached:
        finished = True
    except BudgetExhausted:
        truncated = True
    return _result(ledger, finished, truncated, None, cfg.r_f, threshold, warnings)


def gas_run(
    dist: QualityDistribution,
    cfg: GasConfig,
    rng,
    ledger: EffortLedger,
    stop_rule: Optional[StopRule] = None,
) -> RunResult:
    """Adaptive amplified search with randomised rotation counts.

    One classical sample initialises the best quality b; then each round
    draws r uniformly from [0, ceil(m) - 1], measures the state marked by
    {q < b}, and either resets m to 1 on improvement or grows it by the
    configured factor, capped at r_max. Runs until the stop rule or the
    budget fires.
    """
    ledger.stop_rule = stop_rule
    finished = truncated = False
    measurements = 0
    max_rotation = 0
    try:
        ledger.charge(1)
        best, sid = sample_uniform(dist, rng)
        ledger.observe(best, sid)
        m = 1.0
        while True:
            r = rng.randrange(math.ceil(m))
            state = AmplifiedStateModel(dist, r, MarkingSpec(best))
            quality, qid, marked = measure(state, rng, ledger)
            measurements += 1
            max_rotation = max(max_rotation, r)
            ledger.observe(quality, qid, r, marked)
            if quality < best:
                best = quality
                m = 1.0
            else:
                m = min(cfg.growth * m, float(cfg.r_max))
    except TargetReached:
        finished = True
    except BudgetExhausted:
        truncated = True
    return _result(ledger, finished, truncated, measurements, max_rotation)


def rgas_run(
    dist: QualityDistribution,
    cfg: GasConfig,
    rng,
    ledger: EffortLedger,
    stop_rule: Optional[StopRule] = None,
) -> RunResult:
    """Rotation-restricted variant: identical procedure, user-chosen cap."""
    return gas_run(dist, cfg, rng, ledger, stop_rule)


def classical_run(
    dist: QualityDistribution,
    rng,
    ledger: EffortLedger,
    stop_rule: Optional[StopRule] = None,
) -> RunResult:
    """Uniform sampling with replacement, one call of effort per sample."""
    ledger.stop_rule = stop_rule
    finished = truncated = False
    samples = 0
    try:
        while True:
            ledger.charge(1)
            quality, sid = sample_uniform(dist, rng)
            samples += 1
            ledger.observe(quality, sid)
    except TargetReached:
        finished = True
    except BudgetExhausted:
        truncated = True
    return _result(ledger, finished, truncated, samples, 0)
