"""Statevector experiments on 24-vertex circulant graphs.

The lab studies how two structural knobs, average degree D and spectral
count E (distinct adjacency eigenvalues), interact with quality degeneracy
to set the amplification of a single optimal vertex. Circulant adjacency
matrices are diagonal in the Fourier basis, so walk steps are two FFTs and
a phase multiply regardless of the connection set.

Walk phases use the graph Laplacian generator, as in the reduced-graph
module: circulants are regular, so the two generators differ by a global
phase and a reflection of the walk time, and every amplification maximum
sits at the same parameters. A walk time that is a multiple of 2 pi / N on
the complete graph is then literally the identity.

Labels follow the DxEy convention: D23E2 is the complete graph K24, the
only circulant with just two distinct eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations
from multiprocessing import get_context
from typing import Dict, IO, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import optimize

from .dist_core import ValidationError
from .reduced_graph import QwoaParams

MAX_VERTICES = 4096
EIGENVALUE_TOLERANCE = 1e-9  # absolute grouping tolerance for the E count


# =============================================================================
# Circulant graphs
# =============================================================================


@dataclass(frozen=True)
class CirculantGraph:
    """Connected circulant graph given by its symmetric connection set.

    ``connections`` is a subset of {1..n//2}; step s links every vertex i to
    i +- s (mod n). The half step n/2, when present, contributes a single
    neighbour, which is what makes odd average degrees possible.
    """

    n: int = 24
    connections: frozenset = frozenset(range(1, 13))

    def __post_init__(self) -> None:
        if self.n < 2 or self.n > MAX_VERTICES:
            raise ValidationError(f"vertex count must lie in [2, {MAX_VERTICES}]")
        steps = frozenset(int(s) for s in self.connections)
        if not steps:
            raise ValidationError("connection set is empty")
        if any(s < 1 or s > self.n // 2 for s in steps):
            raise ValidationError("connection steps must lie in 1..n//2")
        if math.gcd(self.n, *steps) != 1:
            raise ValidationError("graph is disconnected for this connection set")
        object.__setattr__(self, "connections", steps)

    @property
    def average_degree(self) -> int:
        half = 1 if (self.n % 2 == 0 and self.n // 2 in self.connections) else 0
        return 2 * (len(self.connections) - half) + half

    def eigenvalues(self) -> np.ndarray:
        """Adjacency spectrum in Fourier order: one eigenvalue per frequency j."""
        j = np.arange(self.n)
        total = np.zeros(self.n)
        for s in sorted(self.connections):
            if 2 * s == self.n:
                total += np.cos(math.pi * j)
            else:
                total += 2.0 * np.cos(2.0 * math.pi * j * s / self.n)
        return total

    @property
    def spectral_count(self) -> int:
        distinct = np.sort(self.eigenvalues())
        return int(1 + np.count_nonzero(np.diff(distinct) > EIGENVALUE_TOLERANCE))

    @property
    def label(self) -> str:
        return f"D{self.average_degree}E{self.spectral_count}"

    def adjacency(self) -> np.ndarray:
        first_column = np.zeros(self.n)
        for s in self.connections:
            first_column[s] = 1.0
            first_column[self.n - s] = 1.0
        out = np.empty((self.n, self.n))
        for i in range(self.n):
            out[i] = np.roll(first_column, i)
        return out


def complete_graph(n: int = 24) -> CirculantGraph:
    return CirculantGraph(n, frozenset(range(1, n // 2 + 1)))


def enumerate_circulants(
    n: int = 24, average_degree: Optional[int] = None, spectral_count: Optional[int] = None
) -> List[CirculantGraph]:
    """All connected circulants on n vertices matching the requested label.

    Deterministic order (sorted connection sets). Raises when the class is
    empty, which is how impossible labels like D23E3 surface.
    """
    half = n // 2
    has_half_step = None
    full_steps = None
    if average_degree is not None:
        if n % 2 == 0:
            has_half_step = average_degree % 2 == 1
            full_steps = (average_degree - (1 if has_half_step else 0)) // 2
        else:
            if average_degree % 2 == 1:
                raise ValidationError("odd vertex counts only admit even degrees")
            has_half_step = False
            full_steps = average_degree // 2

    out: List[CirculantGraph] = []
    pool = range(1, half + (0 if n % 2 == 0 else 1))  # steps strictly below n/2
    sizes = range(0, len(pool) + 1) if full_steps is None else [full_steps]
    for size in sizes:
        for combo in combinations(pool, size):
            for with_half in ((False, True) if (n % 2 == 0 and has_half_step is None) else [bool(has_half_step and n % 2 == 0)]):
                steps = frozenset(combo) | (frozenset([half]) if with_half else frozenset())
                if not steps:
                    continue
                if math.gcd(n, *steps) != 1:
                    continue
                graph = CirculantGraph(n, steps)
                if spectral_count is not None and graph.spectral_count != spectral_count:
                    continue
                out.append(graph)
    if not out:
        raise ValidationError(
            f"no connected circulant on {n} vertices has that degree/spectral count"
        )
    return sorted(out, key=lambda g: tuple(sorted(g.connections)))


# =============================================================================
# Quality assignments
# =============================================================================


@dataclass(frozen=True)
class QualityAssignment:
    """Merit values on vertices; the optimal vertex holds the strict maximum."""

    qualities: Tuple[float, ...]
    optimal_index: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "qualities", tuple(float(q) for q in self.qualities))
        n = len(self.qualities)
        if n < 2:
            raise ValidationError("need at least two vertices")
        if not 0 <= self.optimal_index < n:
            raise ValidationError("optimal index out of range")
        best = self.qualities[self.optimal_index]
        if any(q >= best for i, q in enumerate(self.qualities) if i != self.optimal_index):
            raise ValidationError("the optimal vertex must hold the unique maximum")

    @property
    def n(self) -> int:
        return len(self.qualities)

    @property
    def degeneracy_level(self) -> int:
        """Count of distinct non-optimal values; 1 is maximal degeneracy."""
        return len({q for i, q in enumerate(self.qualities) if i != self.optimal_index})


def binary_assignment(n: int = 24, optimal_index: int = 0) -> QualityAssignment:
    qualities = [0.0] * n
    qualities[optimal_index] = 1.0
    return QualityAssignment(tuple(qualities), optimal_index)


def degenerate_assignment(n: int, distinct_count: int, rng) -> QualityAssignment:
    """Non-optimal qualities repeat values from a smaller random pool.

    The pool holds ``distinct_count`` draws from [0, 1); the optimal vertex
    gets quality 1 and a random position. ``distinct_count`` = n - 1 is the
    no-degeneracy case (every non-optimal value distinct).
    """
    if not 1 <= distinct_count <= n - 1:
        raise ValidationError("distinct non-optimal count must lie in 1..n-1")
    pool = [float(v) for v in rng.random(distinct_count)]
    values = [pool[i % distinct_count] for i in range(n - 1)] + [1.0]
    order = rng.permutation(n)
    qualities = [values[order[i]] for i in range(n)]
    return QualityAssignment(tuple(qualities), qualities.index(1.0))


def uniform_assignment(n: int, rng) -> QualityAssignment:
    """No degeneracy: one uniform draw per non-optimal vertex."""
    return degenerate_assignment(n, n - 1, rng)


# =============================================================================
# Evolution
# =============================================================================


def _walk_eigenvalues(graph: CirculantGraph) -> np.ndarray:
    return graph.average_degree - graph.eigenvalues()


def evolve_circulant(
    graph: CirculantGraph,
    qualities: Union[QualityAssignment, Sequence[float]],
    params: QwoaParams,
) -> np.ndarray:
    """Alternating phase and walk steps; the walk is diagonal after an FFT."""
    values = qualities.qualities if isinstance(qualities, QualityAssignment) else qualities
    values = np.asarray(values, dtype=float)
    if len(values) != graph.n:
        raise ValidationError("need one quality per vertex")
    walk = _walk_eigenvalues(graph)
    state = np.full(graph.n, 1.0 / math.sqrt(graph.n), dtype=complex)
    for gamma, t in params.pairs:
        state = state * np.exp(-1j * gamma * values)
        state = np.fft.ifft(np.exp(-1j * t * walk) * np.fft.fft(state))
    return state


def optimal_vertex_probability(
    graph: CirculantGraph, assignment: QualityAssignment, params: QwoaParams
) -> float:
    state = evolve_circulant(graph, assignment, params)
    return float(np.abs(state[assignment.optimal_index]) ** 2)


# =============================================================================
# Optimisation protocols
# =============================================================================


@dataclass(frozen=True)
class OptimisationProtocol:
    """How to search the parameter landscape.

    ``free`` mode optimises 2r independent parameters; ``repeated`` mode
    optimises one (phase, time) pair applied r times. ``refine_top`` of the
    random starts continue into Nelder-Mead; None refines every start,
    which is the landscape-study protocol (mean and deviation over all
    local optima found).
    """

    mode: str = "free"
    starts: int = 1000
    refine_top: Optional[int] = 10
    seed: int = 0
    max_evaluations: int = 10_000
    spread_tolerance: float = 1e-10

    def __post_init__(self) -> None:
        if self.mode not in ("free", "repeated"):
            raise ValidationError("mode must be free or repeated")
        if self.starts < 1:
            raise ValidationError("need at least one start")
        if self.refine_top is not None and self.refine_top < 1:
            raise ValidationError("refine_top must be positive or None")


@dataclass(frozen=True)
class OptimisationOutcome:
    best: float
    mean: float
    deviation: float
    refined: Tuple[float, ...]
    evaluations: int
    budget_exhausted: bool


def _params_from_scaled(u: np.ndarray, r: int, mode: str, t_scale: float) -> QwoaParams:
    if mode == "repeated":
        return QwoaParams.repeated(2.0 * math.pi * u[0], t_scale * u[1], r)
    return QwoaParams(tuple(zip(2.0 * math.pi * u[:r], t_scale * u[r:])))


def optimise_amplification(
    graph: CirculantGraph,
    assignment: QualityAssignment,
    r: int,
    protocol: OptimisationProtocol = OptimisationProtocol(),
) -> OptimisationOutcome:
    """Multi-start Nelder-Mead over the scaled parameter cube.

    Random starts draw phase strengths from [0, 2 pi) and walk times from
    one period of the spectral radius. Nelder-Mead runs with the standard
    simplex coefficients and stops on a value spread below the protocol
    tolerance or on its evaluation budget.
    """
    if r < 0:
        raise ValidationError("iteration count must be nonnegative")
    if r == 0:
        p = 1.0 / graph.n
        return OptimisationOutcome(p, p, 0.0, (), 0, False)
    radius = float(np.max(np.abs(graph.eigenvalues())))
    t_scale = 2.0 * math.pi / radius
    dims = 2 if protocol.mode == "repeated" else 2 * r

    def objective(u: np.ndarray) -> float:
        return -optimal_vertex_probability(
            graph, assignment, _params_from_scaled(u, r, protocol.mode, t_scale)
        )

    rng = np.random.default_rng(protocol.seed)
    starts = rng.random((protocol.starts, dims))
    initial = np.array([objective(u) for u in starts])
    if protocol.refine_top is None:
        chosen = np.arange(protocol.starts)
    else:
        chosen = np.argsort(initial, kind="stable")[: protocol.refine_top]
    refined: List[float] = []
    evaluations = protocol.starts
    exhausted = False
    for idx in chosen:
        result = optimize.minimize(
            objective,
            starts[idx],
            method="Nelder-Mead",
            options={
                "maxfev": protocol.max_evaluations,
                "xatol": math.inf,
                "fatol": protocol.spread_tolerance,
            },
        )
        refined.append(min(max(-float(result.fun), 0.0), 1.0))
        evaluations += int(result.nfev)
        exhausted = exhausted or not result.success
    values = np.array(refined)
    return OptimisationOutcome(
        best=float(values.max()),
        mean=float(values.mean()),
        deviation=float(values.std()),
        refined=tuple(refined),
        evaluations=evaluations,
        budget_exhausted=exhausted,
    )


# =============================================================================
# Appendix suite
# =============================================================================


class SuiteRow(NamedTuple):
    cell: str
    label: str
    degeneracy: int  # distinct non-optimal values; 0 marks the binary 0/1 case
    r: int
    mode: str
    best: float
    mean: float
    deviation: float
    budget_exhausted: bool


@dataclass(frozen=True)
class LandscapeGrid:
    name: str
    gammas: np.ndarray
    times: np.ndarray
    values: np.ndarray  # shape (len(gammas), len(times))


@dataclass
class SuiteResult:
    rows: List[SuiteRow]
    grids: Dict[str, LandscapeGrid]


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 0
    r: int = 3
    full_budget: bool = False
    distributions_per_graph: Optional[int] = None  # default 6, 48 under full budget
    starts: Optional[int] = None  # default 1000, 10000 under full budget
    refine_top: int = 10  # starts continued into Nelder-Mead per optimisation
    landscape_restarts: Optional[int] = None  # default 24, 240 under full budget
    degeneracy_levels: Tuple[int, ...] = (1, 3, 6, 12, 23)
    cells: Optional[Tuple[str, ...]] = None  # None runs every cell
    grid_points: int = 65
    workers: int = 1

    def resolved(self) -> "SuiteConfig":
        scale = 10 if self.full_budget else 1
        return replace(
            self,
            distributions_per_graph=self.distributions_per_graph
            or (48 if self.full_budget else 6),
            starts=self.starts or 1000 * scale,
            landscape_restarts=self.landscape_restarts or 24 * scale,
        )


SUITE_CELLS = ("consistency", "degree", "spectral", "degeneracy", "landscape",
               "repeated_pair", "grid")

_CELL_INDEX = {name: i for i, name in enumerate(SUITE_CELLS)}


def _cell_rng(seed: int, cell: str, *indices: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence(entropy=(seed, _CELL_INDEX[cell], *indices))
    )


def _sample_graphs(
    pool: List[CirculantGraph], count: int, rng: np.random.Generator
) -> List[CirculantGraph]:
    if count >= len(pool):
        return list(pool)
    picks = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(int(i) for i in picks)]


def _assignment_for_level(n: int, level: int, rng) -> QualityAssignment:
    # level 1 is the binary extreme of the degeneracy ladder: a single
    # non-optimal value, pinned at 0 as in the marking-function studies
    if level == 1:
        return binary_assignment(n, int(rng.integers(n)))
    return degenerate_assignment(n, level, rng)


def _study_cell(
    cell: str,
    graph: CirculantGraph,
    level: int,
    cfg: SuiteConfig,
    graph_index: int,
) -> SuiteRow:
    """Appendix-A style cell: best-of-refined per distribution, averaged."""
    bests = []
    exhausted = False
    for d in range(cfg.distributions_per_graph):
        rng = _cell_rng(cfg.seed, cell, graph_index, level, d)
        assignment = _assignment_for_level(graph.n, level, rng)
        protocol = OptimisationProtocol(
            mode="free", starts=cfg.starts, refine_top=cfg.refine_top,
            seed=int(rng.integers(2**63)),
        )
        outcome = optimise_amplification(graph, assignment, cfg.r, protocol)
        bests.append(outcome.best)
        exhausted = exhausted or outcome.budget_exhausted
    values = np.array(bests)
    return SuiteRow(
        cell, graph.label, 0 if level == 1 else level, cfg.r, "free",
        float(values.max()), float(values.mean()), float(values.std()), exhausted,
    )


def _landscape_cell(
    graph: CirculantGraph,
    level: int,
    cfg: SuiteConfig,
    graph_index: int,
    shared_values: Optional[Sequence[float]],
) -> SuiteRow:
    """Appendix-B style cell: every restart refined, spread reported."""
    rng = _cell_rng(cfg.seed, "landscape", graph_index, level)
    if shared_values is None:
        assignment = _assignment_for_level(graph.n, level, rng)
    else:
        order = rng.permutation(graph.n)
        arranged = [shared_values[order[i]] for i in range(graph.n)]
        assignment = QualityAssignment(tuple(arranged), arranged.index(1.0))
    protocol = OptimisationProtocol(
        mode="free", starts=cfg.landscape_restarts, refine_top=None,
        seed=int(rng.integers(2**63)),
    )
    outcome = optimise_amplification(graph, assignment, cfg.r, protocol)
    return SuiteRow(
        "landscape", graph.label, 0 if level == 1 else level, cfg.r, "free",
        outcome.best, outcome.mean, outcome.deviation, outcome.budget_exhausted,
    )


def _repeated_pair_cell(
    graph: CirculantGraph, level: int, cfg: SuiteConfig, graph_index: int
) -> SuiteRow:
    # binary assignments on a circulant are all equivalent, one draw suffices;
    # random qualities spread the optimum widely, so average over assignments
    draws = 1 if level == 1 else cfg.distributions_per_graph
    bests = []
    exhausted = False
    for d in range(draws):
        rng = _cell_rng(cfg.seed, "repeated_pair", graph_index, level, d)
        assignment = _assignment_for_level(graph.n, level, rng)
        protocol = OptimisationProtocol(
            mode="repeated", starts=cfg.starts, refine_top=cfg.refine_top,
            seed=int(rng.integers(2**63)),
        )
        outcome = optimise_amplification(graph, assignment, cfg.r, protocol)
        bests.append(outcome.best)
        exhausted = exhausted or outcome.budget_exhausted
    values = np.array(bests)
    return SuiteRow(
        "repeated_pair", graph.label, 0 if level == 1 else level, cfg.r, "repeated",
        float(values.max()), float(values.mean()), float(values.std()), exhausted,
    )


def _spectral_graph_list(seed: int) -> List[CirculantGraph]:
    graphs: List[CirculantGraph] = []
    for i, e in enumerate(range(3, 14)):
        pool = enumerate_circulants(24, 12, e)
        graphs.append(_sample_graphs(pool, 1, _cell_rng(seed, "spectral", i))[0])
    graphs.append(complete_graph(24))
    return graphs


def _landscape_grid(
    graph: CirculantGraph, assignment: QualityAssignment, r: int, points: int
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    radius = float(np.max(np.abs(graph.eigenvalues())))
    gammas = np.linspace(0.0, 2.0 * math.pi, points)
    times = np.linspace(0.0, 2.0 * math.pi / radius, points)
    values = np.empty((points, points))
    for i, g in enumerate(gammas):
        for j, t in enumerate(times):
            values[i, j] = optimal_vertex_probability(
                graph, assignment, QwoaParams.repeated(g, t, r)
            )
    return gammas, times, values


def _run_cell(args) -> Tuple[List[SuiteRow], Dict[str, LandscapeGrid]]:
    cell, cfg = args
    rows: List[SuiteRow] = []
    grids: Dict[str, LandscapeGrid] = {}
    no_degeneracy = 24 - 1  # every non-optimal vertex distinct

    if cell == "consistency":
        pool = enumerate_circulants(24, 12, 12)
        graphs = _sample_graphs(pool, 9, _cell_rng(cfg.seed, "consistency", 0))
        for gi, graph in enumerate(graphs):
            rows.append(_study_cell("consistency", graph, no_degeneracy, cfg, gi))
    elif cell == "degree":
        for di, degree in enumerate(range(2, 22)):
            try:
                pool = enumerate_circulants(24, degree, 13)
            except ValidationError:
                continue  # no connected circulant carries this label
            graph = _sample_graphs(pool, 1, _cell_rng(cfg.seed, "degree", di))[0]
            rows.append(_study_cell("degree", graph, no_degeneracy, cfg, di))
    elif cell == "spectral":
        for gi, graph in enumerate(_spectral_graph_list(cfg.seed)):
            rows.append(_study_cell("spectral", graph, no_degeneracy, cfg, gi))
    elif cell == "degeneracy":
        graphs = _spectral_graph_list(cfg.seed)
        for gi, graph in enumerate(graphs):
            for level in cfg.degeneracy_levels:
                rows.append(_study_cell("degeneracy", graph, level, cfg, gi))
    elif cell == "landscape":
        graphs = _spectral_graph_list(cfg.seed)
        for level in cfg.degeneracy_levels:
            shared: Optional[List[float]] = None
            if level != 1:
                rng = _cell_rng(cfg.seed, "landscape", 10_000, level)
                pool = [float(v) for v in rng.random(level)]
                shared = [pool[i % level] for i in range(24 - 1)] + [1.0]
            for gi, graph in enumerate(graphs):
                rows.append(_landscape_cell(graph, level, cfg, gi, shared))
    elif cell == "repeated_pair":
        graphs = _spectral_graph_list(cfg.seed)
        for gi, graph in enumerate(graphs):
            for level in (1, no_degeneracy):
                rows.append(_repeated_pair_cell(graph, level, cfg, gi))
    elif cell == "grid":
        k24 = complete_graph(24)
        rng = _cell_rng(cfg.seed, "grid", 0)
        for name, assignment in (
            ("binary", binary_assignment(24)),
            ("uniform", uniform_assignment(24, rng)),
        ):
            gammas, times, values = _landscape_grid(k24, assignment, cfg.r, cfg.grid_points)
            grids[f"{k24.label}-{name}"] = LandscapeGrid(
                f"{k24.label}-{name}", gammas, times, values
            )
    else:
        raise ValidationError(f"unknown suite cell {cell!r}")
    return rows, grids


def run_appendix_suite(config: SuiteConfig = SuiteConfig()) -> SuiteResult:
    """Run the structure/degeneracy/landscape studies at the configured budget.

    Cells are independent and parallelise; per-cell seeds are fixed by the
    master seed, so the result does not depend on the worker count.
    """
    cfg = config.resolved()
    cells = cfg.cells if cfg.cells is not None else SUITE_CELLS
    unknown = [c for c in cells if c not in SUITE_CELLS]
    if unknown:
        raise ValidationError(f"unknown suite cells: {unknown}")
    jobs = [(cell, cfg) for cell in cells]
    if cfg.workers == 1 or len(jobs) == 1:
        outputs = [_run_cell(job) for job in jobs]
    else:
        ctx = get_context("fork")
        with ctx.Pool(min(cfg.workers, len(jobs))) as pool:
            outputs = pool.map(_run_cell, jobs)
    rows: List[SuiteRow] = []
    grids: Dict[str, LandscapeGrid] = {}
    for cell_rows, cell_grids in outputs:
        rows.extend(cell_rows)
        grids.update(cell_grids)
    return SuiteResult(rows, grids)


# =============================================================================
# Output
# =============================================================================


def export_suite_csv(result: SuiteResult, fh: IO[str]) -> None:
    fh.write("cell,label,degeneracy,r,mode,best,mean,deviation,budget_exhausted\n")
    for row in result.rows:
        fh.write(
            f"{row.cell},{row.label},{row.degeneracy},{row.r},{row.mode},"
            f"{row.best:.17g},{row.mean:.17g},{row.deviation:.17g},"
            f"{int(row.budget_exhausted)}\n"
        )


def export_landscape_csv(grid: LandscapeGrid, fh: IO[str]) -> None:
    """Matrix layout: first row walk times, first column phase strengths."""
    fh.write("gamma_by_t," + ",".join(f"{t:.17g}" for t in grid.times) + "\n")
    for i, g in enumerate(grid.gammas):
        fh.write(f"{g:.17g}," + ",".join(f"{v:.17g}" for v in grid.values[i]) + "\n")
