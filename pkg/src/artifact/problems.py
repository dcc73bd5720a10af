"""Concrete optimisation problem instances and exhaustive quality enumeration.

Two problem families feed the simulation suite:

* Capacitated vehicle routing (CVRP): ``l`` locations plus a depot, integer
  demands and symmetric integer travel costs. A solution is an unordered set
  of ordered routes covering every location exactly once. Demands may exceed
  the remaining (or even the full) vehicle capacity; the cost model sends the
  vehicle back to the depot to reload before any location it cannot serve,
  which keeps every route feasible without penalty terms and preserves the
  roughly bell-shaped cost distribution that integer data produces.

* Portfolio selection: positions z_i in {-1, 0, +1} per asset under a fixed
  net position sum(z) = I. Each solution carries two qualities, risk
  z' sigma z and return R . z; minimisation runs on the negated return
  restricted to the lowest-risk fraction of the space (the conditional
  distribution), while the two-threshold marking on the full table is exposed
  for ratio queries.

Exhaustive enumeration is the point here: the solution spaces are small
enough to precompute exactly, which is what gives the simulated measurement
model its ground truth. Enumeration counts are checked against the closed
forms ``cvrp_cardinality`` / ``portfolio_cardinality``.

Solution identity: CVRP solutions are generated in a canonical deterministic
order (set partitions with blocks ordered by least element, permutations in
lexicographic order), so the enumeration index is a stable solution id. The
distributions consumed by the samplers index solutions by ascending-quality
rank instead, which is the identity every downstream module uses.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
import random
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from .dist_core import FiniteDistribution, MarkingSpec, ValidationError

# =============================================================================
# CVRP
# =============================================================================


@dataclass(frozen=True)
class CvrpInstance:
    """Depot-plus-``l``-location routing instance with integer data.

    ``cost`` is an (l+1) x (l+1) symmetric nonnegative matrix with zero
    diagonal; index 0 is the depot. ``demands[i]`` belongs to location i+1.
    """

    demands: Tuple[int, ...]
    cost: Tuple[Tuple[int, ...], ...]
    capacity: int

    def __post_init__(self) -> None:
        l = len(self.demands)
        if l < 1:
            raise ValidationError("need at least one location")
        if self.capacity <= 0:
            raise ValidationError("capacity must be positive")
        if len(self.cost) != l + 1 or any(len(row) != l + 1 for row in self.cost):
            raise ValidationError("cost matrix must be (l+1) x (l+1)")
        for i in range(l + 1):
            if self.cost[i][i] != 0:
                raise ValidationError("cost diagonal must be zero")
            for j in range(l + 1):
                if self.cost[i][j] < 0:
                    raise ValidationError("costs must be nonnegative")
                if self.cost[i][j] != self.cost[j][i]:
                    raise ValidationError("cost matrix must be symmetric")

    @property
    def l(self) -> int:
        return len(self.demands)


def generate_cvrp(l: int, seed: int, capacity: int = 20) -> CvrpInstance:
    """Random instance: demands in [5, 30], depot legs in [10, 20], inter-location
    legs in [1, 15], all integers (integer costs give the degeneracy the
    distributions rely on)."""
    if l < 1:
        raise ValidationError("need at least one location")
    rng = random.Random(seed)
    demands = tuple(rng.randint(5, 30) for _ in range(l))
    cost = [[0] * (l + 1) for _ in range(l + 1)]
    for i in range(l + 1):
        for j in range(i + 1, l + 1):
            c = rng.randint(10, 20) if i == 0 else rng.randint(1, 15)
            cost[i][j] = c
            cost[j][i] = c
    return CvrpInstance(demands, tuple(tuple(row) for row in cost), capacity)


def route_cost(inst: CvrpInstance, route: Sequence[int]) -> int:
    """Cost of one ordered route (locations are 1-based; depot is 0).

    Before serving a location whose demand exceeds the remaining load, the
    vehicle returns to the depot and reloads to full. A demand above the full
    capacity is served immediately after one reload (remaining load clamps to
    zero); reloading is never stacked.
    """
    cost = inst.cost
    demands = inst.demands
    cap = inst.capacity
    left = cap
    cur = 0
    total = 0
    for loc in route:
        d = demands[loc - 1]
        if d > left:
            total += cost[cur][0]
            cur = 0
            left = cap
        total += cost[cur][loc]
        cur = loc
        left = max(0, left - d)
    total += cost[cur][0]
    return total


def solution_cost(inst: CvrpInstance, routes: Iterable[Sequence[int]]) -> int:
    """Total cost of a set of routes; route order within the set is irrelevant."""
    return sum(route_cost(inst, r) for r in routes)


def cvrp_cardinality(l: int) -> int:
    """Number of ways to split l locations into unordered, ordered routes."""
    if l < 1:
        raise ValidationError("l must be at least 1")
    total = 0
    for k in range(1, l + 1):
        total += math.comb(l - 1, k - 1) * math.factorial(l) // math.factorial(k)
    return total


def _route_histograms(inst: CvrpInstance) -> Dict[int, Counter]:
    """Cost histogram over all orderings of every nonempty location subset.

    Keyed by bitmask (bit i-1 for location i).
    """
    l = inst.l
    hists: Dict[int, Counter] = {}
    locs = list(range(1, l + 1))
    for mask in range(1, 1 << l):
        members = [locs[i] for i in range(l) if mask >> i & 1]
        h: Counter = Counter()
        for perm in itertools.permutations(members):
            h[route_cost(inst, perm)] += 1
        hists[mask] = h
    return hists


def _convolve_hist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.convolve(a, b)


def cvrp_enumerate(inst: CvrpInstance) -> FiniteDistribution:
    """Exact cost distribution over every solution, as (cost, multiplicity) runs.

    Canonical generation (each solution once): set partitions of the
    locations with blocks anchored on their least member, times all
    orderings of each block. Costs are summed under the reload rule. The
    total count always equals ``cvrp_cardinality(l)``.

    Small instances walk solutions directly; larger ones aggregate per-subset
    route histograms with integer-cost convolutions, which is equivalent and
    keeps the ten-location space (about 5.9e7 solutions) tractable.
    """
    if inst.capacity <= 0:
        raise ValidationError("capacity must be positive")
    if inst.l <= 8:
        counter = _cvrp_enumerate_direct(inst)
        dist = FiniteDistribution.from_counter(counter)
    else:
        dist = _cvrp_enumerate_convolved(inst)
    assert dist.n_total == cvrp_cardinality(inst.l)
    return dist


def _cvrp_enumerate_direct(inst: CvrpInstance) -> Counter:
    l = inst.l
    route_hist: Dict[Tuple[int, ...], List[int]] = {}

    def block_costs(block: Tuple[int, ...]) -> List[int]:
        got = route_hist.get(block)
        if got is None:
            got = [route_cost(inst, p) for p in itertools.permutations(block)]
            route_hist[block] = got
        return got

    out: Counter = Counter()

    def recurse(remaining: Tuple[int, ...], acc_cost: int, acc_ways: int) -> None:
        if not remaining:
            out[acc_cost] += acc_ways
            return
        head, rest = remaining[0], remaining[1:]
        for size in range(len(rest) + 1):
            for extra in itertools.combinations(rest, size):
                block = (head,) + extra
                left = tuple(x for x in rest if x not in extra)
                for c in block_costs(block):
                    recurse(left, acc_cost + c, acc_ways)

    recurse(tuple(range(1, l + 1)), 0, 1)
    return out


def _cvrp_enumerate_convolved(inst: CvrpInstance) -> FiniteDistribution:
    l = inst.l
    hists = _route_histograms(inst)
    max_route = max(max(h) for h in hists.values())
    width = max_route * l + 1  # safe upper bound on any total cost

    dense: Dict[int, np.ndarray] = {}
    for mask, h in hists.items():
        arr = np.zeros(max(h) + 1, dtype=np.int64)
        for c, n in h.items():
            arr[c] = n
        dense[mask] = arr

    memo: Dict[int, np.ndarray] = {0: np.ones(1, dtype=np.int64)}

    def dist_of(mask: int) -> np.ndarray:
        got = memo.get(mask)
        if got is not None:
            return got
        low = mask & -mask
        rest = mask ^ low
        total = np.zeros(1, dtype=np.int64)
        sub = rest
        while True:
            block = low | sub
            part = _convolve_hist(dense[block], dist_of(rest ^ sub))
            if len(part) > len(total):
                part[: len(total)] += total
                total = part
            else:
                total[: len(part)] += part
            if sub == 0:
                break
            sub = (sub - 1) & rest
        memo[mask] = total
        return total

    full = dist_of((1 << l) - 1)
    assert len(full) <= width
    values = np.nonzero(full)[0]
    return FiniteDistribution(values.tolist(), full[values].tolist())


def iter_cvrp_solutions(inst: CvrpInstance) -> Iterator[Tuple[Tuple[int, ...], ...]]:
    """Canonical-order generator of full solutions (tuples of ordered routes).

    Intended for tests and small-instance inspection; the enumeration index
    is the stable id referred to in the docs.
    """

    def recurse(remaining: Tuple[int, ...]) -> Iterator[Tuple[Tuple[int, ...], ...]]:
        if not remaining:
            yield ()
            return
        head, rest = remaining[0], remaining[1:]
        for size in range(len(rest) + 1):
            for extra in itertools.combinations(rest, size):
                block = (head,) + extra
                left = tuple(x for x in rest if x not in extra)
                for perm in itertools.permutations(block):
                    for tail in recurse(left):
                        yield (perm,) + tail

    return recurse(tuple(range(1, inst.l + 1)))


# =============================================================================
# Portfolio
# =============================================================================


@dataclass(frozen=True)
class PortfolioInstance:
    """Mean-variance portfolio data with a fixed integer net position.

    ``returns[i]`` is the expected daily percentage return of asset i;
    ``covariance`` is the (already downscaled) symmetric risk matrix.
    """

    returns: Tuple[float, ...]
    covariance: Tuple[Tuple[float, ...], ...]
    net_position: int

    def __post_init__(self) -> None:
        n = len(self.returns)
        if n < 1:
            raise ValidationError("need at least one asset")
        if len(self.covariance) != n or any(len(r) != n for r in self.covariance):
            raise ValidationError("covariance must be n x n")
        for i in range(n):
            for j in range(n):
                if not math.isclose(
                    self.covariance[i][j], self.covariance[j][i], rel_tol=1e-12, abs_tol=1e-12
                ):
                    raise ValidationError("covariance must be symmetric")
        if abs(self.net_position) > n:
            raise ValidationError("|net position| cannot exceed asset count")

    @property
    def n(self) -> int:
        return len(self.returns)


def portfolio_cardinality(n: int, net_position: int) -> int:
    """Count of z in {-1,0,1}^n with sum(z) = net_position (0 <= I <= n)."""
    if net_position < 0 or net_position > n:
        raise ValidationError("net position outside [0, n]")
    total = 0
    for s in range((n - net_position) // 2 + 1):
        total += math.comb(n, net_position + s) * math.comb(n - net_position - s, s)
    return total


class QualityTable:
    """Per-solution (risk, return) pairs for an enumerated portfolio space."""

    __slots__ = ("risks", "returns", "n_total")

    def __init__(self, risks: np.ndarray, returns: np.ndarray):
        if risks.shape != returns.shape or risks.ndim != 1 or risks.size == 0:
            raise ValidationError("risks/returns must be equal-length 1-D arrays")
        self.risks = risks
        self.returns = returns
        self.n_total = int(risks.size)

    def risk_cutoff(self, fraction: float = 0.10) -> Tuple[float, np.ndarray]:
        """Value and index set of the lowest-risk ``fraction`` of solutions.

        Exactly ``round(fraction * n)`` solutions are selected, ties resolved
        by stable sort order, and the cutoff reported is the largest selected
        risk.
        """
        k = int(math.floor(fraction * self.n_total + 0.5))
        if k < 1:
            raise ValidationError("fraction selects no solutions")
        order = np.argsort(self.risks, kind="stable")
        sel = order[:k]
        return float(self.risks[sel[-1]]), sel

    def conditional_distribution(self, fraction: float = 0.10) -> FiniteDistribution:
        """Negated-return distribution over the lowest-risk fraction.

        This is the one-dimensional minimisation problem the samplers run on:
        best solution = highest return among the low-risk subset.
        """
        _, sel = self.risk_cutoff(fraction)
        return FiniteDistribution.from_values((-self.returns[sel]).tolist())

    def marked_ratio(self, mark: MarkingSpec) -> float:
        """Two-threshold conjunction ratio on the full table.

        Primary quality is the negated return (minimise sense: marked when
        -return < threshold); ``mark.second_threshold`` is the fixed risk
        ceiling (risk strictly below it).
        """
        if mark.second_threshold is None:
            raise ValidationError("table marking needs the fixed risk threshold")
        if mark.sense != "min":
            raise ValidationError("table marking is minimise-sense only")
        hit = (-self.returns < mark.threshold) & (self.risks < mark.second_threshold)
        return float(np.count_nonzero(hit)) / self.n_total


def _position_vectors(n: int, net_position: int, dense_limit: int = 14) -> np.ndarray:
    if n <= dense_limit:
        grid = np.array(list(itertools.product((-1, 0, 1), repeat=n)), dtype=np.int8)
        return grid[grid.sum(axis=1) == net_position]
    # Larger spaces: walk (plus-count, minus-count) support patterns without
    # materialising 3^n candidates.
    rows: List[np.ndarray] = []
    for plus in range(max(net_position, 0), n + 1):
        minus = plus - net_position
        if plus + minus > n:
            break
        for pos_plus in itertools.combinations(range(n), plus):
            free = [i for i in range(n) if i not in pos_plus]
            base = np.zeros(n, dtype=np.int8)
            base[list(pos_plus)] = 1
            for pos_minus in itertools.combinations(free, minus):
                z = base.copy()
                z[list(pos_minus)] = -1
                rows.append(z)
    return np.array(rows, dtype=np.int8)


def portfolio_enumerate(inst: PortfolioInstance) -> QualityTable:
    """Evaluate risk and return for every admissible position vector."""
    z = _position_vectors(inst.n, inst.net_position).astype(np.float64)
    if z.size == 0:
        raise ValidationError("empty solution space")
    r = np.asarray(inst.returns, dtype=np.float64)
    sigma = np.asarray(inst.covariance, dtype=np.float64)
    returns = z @ r
    risks = np.einsum("ij,jk,ik->i", z, sigma, z)
    table = QualityTable(risks, returns)
    assert table.n_total == portfolio_cardinality(inst.n, abs(inst.net_position))
    return table


# =============================================================================
# Price ingestion and synthesis
# =============================================================================


def ingest_prices(csv_source: Union[str, io.TextIOBase], net_position: int = 0) -> PortfolioInstance:
    """Build a portfolio instance from a daily adjusted-close price CSV.

    The CSV has an asset-name header and one strictly positive price row per
    trading day. Expected returns are means of daily percentage returns; the
    covariance of those percentage returns is downscaled by 100 so risk and
    return live on comparable axes. A single return sample yields a zero
    covariance.
    """
    if isinstance(csv_source, str) and "\n" not in csv_source and "," not in csv_source:
        with open(csv_source, "r", encoding="utf-8") as fh:
            text = fh.read()
    elif isinstance(csv_source, str):
        text = csv_source
    else:
        text = csv_source.read()

    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if len(rows) < 3:
        raise ValidationError("need a header row plus at least two price rows")
    header, price_rows = rows[0], rows[1:]
    n = len(header)
    prices = np.empty((len(price_rows), n), dtype=np.float64)
    for t, row in enumerate(price_rows):
        if len(row) != n:
            raise ValidationError(f"row {t + 2} has {len(row)} cells, expected {n}")
        for i, cell in enumerate(row):
            try:
                prices[t, i] = float(cell)
            except ValueError as exc:
                raise ValidationError(f"non-numeric cell at row {t + 2}: {cell!r}") from exc
    if np.any(prices <= 0.0):
        raise ValidationError("prices must be strictly positive")

    pct = 100.0 * (prices[1:] - prices[:-1]) / prices[:-1]
    means = pct.mean(axis=0)
    if pct.shape[0] < 2:
        cov = np.zeros((n, n))
    else:
        cov = np.cov(pct, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
    cov = cov / 100.0
    return PortfolioInstance(
        tuple(float(m) for m in means),
        tuple(tuple(float(c) for c in row) for row in cov),
        net_position,
    )


def generate_prices_csv(n: int, days: int, seed: int) -> str:
    """Synthetic correlated geometric-random-walk price history as CSV text."""
    if n < 1 or days < 2:
        raise ValidationError("need at least one asset and two days")
    rng = np.random.default_rng(seed)
    drift = rng.uniform(-0.05, 0.15, size=n)  # percent per day
    vol = rng.uniform(0.5, 2.5, size=n)  # percent per day
    w = rng.normal(size=(n, n))
    corr = w @ w.T
    d = np.sqrt(np.diag(corr))
    corr = corr / np.outer(d, d)
    chol = np.linalg.cholesky(corr + 1e-9 * np.eye(n))
    start = rng.uniform(20.0, 200.0, size=n)
    prices = np.empty((days, n))
    prices[0] = start
    for t in range(1, days):
        shock = chol @ rng.standard_normal(n)
        step = (drift + vol * shock) / 100.0
        prices[t] = prices[t - 1] * np.maximum(1.0 + step, 0.05)
    header = ",".join(f"A{i:02d}" for i in range(n))
    lines = [header]
    for t in range(days):
        lines.append(",".join(f"{p:.6f}" for p in prices[t]))
    return "\n".join(lines) + "\n"


def generate_portfolio(n: int, net_position: int, seed: int, days: int = 500) -> PortfolioInstance:
    """Synthetic instance via the same ingestion path as real price data."""
    return ingest_prices(generate_prices_csv(n, days, seed), net_position)


# =============================================================================
# Instance files (key-value text)
# =============================================================================


def save_cvrp(inst: CvrpInstance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"l = {inst.l}\n")
        fh.write(f"capacity = {inst.capacity}\n")
        fh.write(f"demands = {' '.join(map(str, inst.demands))}\n")
        for i, row in enumerate(inst.cost):
            fh.write(f"cost{i} = {' '.join(map(str, row))}\n")


def load_cvrp(path: str) -> CvrpInstance:
    fields: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        l = int(fields["l"])
        capacity = int(fields["capacity"])
        demands = tuple(int(x) for x in fields["demands"].split())
        cost = tuple(
            tuple(int(x) for x in fields[f"cost{i}"].split()) for i in range(l + 1)
        )
    except KeyError as exc:
        raise ValidationError(f"missing instance field: {exc}") from exc
    return CvrpInstance(demands, cost, capacity)
