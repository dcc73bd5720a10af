"""Contracted complete graph dynamics.

The load-bearing checks are dual-route: the reduced k-dimensional evolution
against a literal N-dimensional evolution of the uncontracted graph, and the
closed-form single-iteration law against the evolved marked probability in
the small-ratio limit. The truncated-rotation probability law from the
amplification model acts as a third independent oracle at the derived
parameters.
"""

import io
import math

import numpy as np
import pytest
from scipy import optimize

from artifact.dist_core import ValidationError
from artifact.grover_model import grover_probability
from artifact.reduced_graph import (
    PartitionPoint,
    QwoaParams,
    ReducedGraph,
    binary_reduced_graph,
    evolve,
    export_partition_csv,
    full_complete_graph_group_probabilities,
    group_probabilities,
    marked_probability,
    partition_experiment,
    partition_graph,
    reduce_from_vertex_qualities,
    repeated_parameter_probability,
    single_iteration_amplification,
)


# =============================================================================
# Construction
# =============================================================================


def test_three_partition_matrices_match_displayed_form():
    a, b, c = 2, 3, 4
    graph = ReducedGraph((a, b, c), (0.9, 0.5, 0.1))
    expected = np.array(
        [
            [a - 1, math.sqrt(a * b), math.sqrt(a * c)],
            [math.sqrt(a * b), b - 1, math.sqrt(b * c)],
            [math.sqrt(a * c), math.sqrt(b * c), c - 1],
        ]
    )
    assert np.allclose(graph.adjacency(), expected, atol=0)
    assert np.array_equal(graph.adjacency(), graph.adjacency().T)
    assert np.allclose(graph.initial_state(), np.sqrt(np.array([a, b, c]) / 9))
    assert graph.initial_state() @ graph.initial_state() == pytest.approx(1.0, abs=1e-15)
    assert np.allclose(graph.quality_vector(), [0.9, 0.5, 0.1])


def test_binary_partition_matrices_match_displayed_form():
    m, n = 3, 10
    graph = binary_reduced_graph(n, m)
    expected = np.array(
        [[m - 1, math.sqrt(m * (n - m))], [math.sqrt(m * (n - m)), n - m - 1]]
    )
    assert np.allclose(graph.adjacency(), expected, atol=0)
    assert graph.qualities == (1.0, 0.0)
    assert np.allclose(graph.initial_state(), [math.sqrt(0.3), math.sqrt(0.7)])


def test_construction_validation():
    with pytest.raises(ValidationError):
        ReducedGraph((2, 3), (1.0,))
    with pytest.raises(ValidationError):
        ReducedGraph((), ())
    with pytest.raises(ValidationError):
        ReducedGraph((0, 3), (1.0, 0.0))
    with pytest.raises(ValidationError):
        binary_reduced_graph(10, 0)
    with pytest.raises(ValidationError):
        binary_reduced_graph(10, 10)


def test_params_validation_and_flat_layout():
    with pytest.raises(ValidationError):
        QwoaParams(())
    with pytest.raises(ValidationError):
        QwoaParams.repeated(1.0, 1.0, 0)
    with pytest.raises(ValidationError):
        QwoaParams.from_flat([1.0, 2.0, 3.0])
    params = QwoaParams.from_flat([0.1, 0.2, 10.0, 20.0])
    assert params.pairs == ((0.1, 10.0), (0.2, 20.0))
    assert params.r == 2
    assert QwoaParams.repeated(1.5, 0.5, 3).pairs == ((1.5, 0.5),) * 3


# =============================================================================
# Evolution basics
# =============================================================================


def test_evolution_preserves_norm():
    rng = np.random.default_rng(11)
    for _ in range(20):
        k = int(rng.integers(1, 7))
        counts = tuple(int(c) for c in rng.integers(1, 50, size=k))
        qualities = tuple(float(q) for q in rng.random(k))
        graph = ReducedGraph(counts, qualities)
        pairs = tuple(
            (float(g), float(t))
            for g, t in zip(rng.uniform(0, 2 * math.pi, 3), rng.uniform(0, 1.0, 3))
        )
        state = evolve(graph, QwoaParams(pairs))
        assert abs(np.vdot(state, state).real - 1.0) < 1e-12


def test_zero_phase_strength_leaves_uniform_state_unchanged():
    graph = ReducedGraph((2, 3, 4), (0.9, 0.5, 0.1))
    params = QwoaParams(((0.0, 0.33), (0.0, 1.7), (0.0, 0.02)))
    state = evolve(graph, params)
    assert np.max(np.abs(state - graph.initial_state())) < 1e-12
    probabilities = group_probabilities(graph, params)
    assert np.allclose(probabilities, np.array([2, 3, 4]) / 9, atol=1e-12)


def test_dimension_cap_and_partition_index():
    graph = ReducedGraph((1,) * 65, tuple(float(i) for i in range(65)))
    with pytest.raises(ValidationError):
        evolve(graph, QwoaParams(((1.0, 1.0),)))
    small = binary_reduced_graph(10, 1)
    with pytest.raises(ValidationError):
        marked_probability(small, QwoaParams(((1.0, 1.0),)), partition=2)


def test_non_symmetric_adjacency_is_rejected():
    class Broken(ReducedGraph):
        def adjacency(self):
            return np.array([[0.0, 1.0], [2.0, 0.0]])

    with pytest.raises(ValidationError):
        evolve(Broken((1, 1), (1.0, 0.0)), QwoaParams(((1.0, 1.0),)))


# =============================================================================
# Derived parameters and the rotation-law oracle
# =============================================================================


def test_single_iteration_marked_probability_near_nine_over_n():
    n = 10**6
    graph = binary_reduced_graph(n, 1)
    p = marked_probability(graph, QwoaParams.repeated(math.pi, math.pi / n, 1))
    assert p == pytest.approx(9.0 / n, rel=0.01)


def test_repeated_derived_parameters_match_rotation_law():
    n, m = 58_941_091, 7
    graph = binary_reduced_graph(n, m)
    for r in range(1, 201):
        got = repeated_parameter_probability(graph, math.pi, math.pi / n, r)
        assert abs(got - grover_probability(r, m / n)) < 1e-9


def test_rotation_law_agreement_with_larger_ratio():
    n, m = 4096, 16
    graph = binary_reduced_graph(n, m)
    for r in (1, 2, 5, 11):
        got = repeated_parameter_probability(graph, math.pi, math.pi / n, r)
        assert abs(got - grover_probability(r, m / n)) < 1e-9


# =============================================================================
# Single-iteration amplification law
# =============================================================================


def test_amplification_law_fixed_points():
    n = 10**8
    assert single_iteration_amplification(math.pi, math.pi / n, n) == pytest.approx(9.0, abs=1e-12)
    for t in (0.0, 0.3 / n, 5.0 / n):
        assert single_iteration_amplification(0.0, t, n) == pytest.approx(1.0, abs=1e-12)


def test_amplification_law_grid_maximum_is_nine():
    n = 10**8
    grid = np.linspace(0.0, 2 * math.pi, 101)
    best, best_at = -np.inf, None
    for g in grid:
        for nt in grid:
            v = single_iteration_amplification(g, nt / n, n)
            if v > best:
                best, best_at = v, (g, nt)
    result = optimize.minimize(
        lambda x: -single_iteration_amplification(x[0], x[1] / n, n),
        best_at,
        method="Nelder-Mead",
        options={"xatol": 1e-10, "fatol": 1e-14},
    )
    assert -result.fun == pytest.approx(9.0, abs=1e-9)
    assert result.x[0] == pytest.approx(math.pi, abs=1e-4)
    assert result.x[1] == pytest.approx(math.pi, abs=1e-4)


def test_amplification_law_matches_evolution_in_small_ratio_limit():
    n = 10**8
    graph = binary_reduced_graph(n, 10)  # rho = 1e-7
    for gamma in (0.3, 1.0, math.pi / 2, math.pi, 4.0, 5.9):
        for nt in (0.2, 1.0, math.pi / 2, math.pi, 4.5, 6.0):
            ratio = marked_probability(graph, QwoaParams(((gamma, nt / n),))) * n / 10
            law = single_iteration_amplification(gamma, nt / n, n)
            assert abs(ratio - law) <= 0.01 * max(law, 0.05)


def test_amplification_law_within_one_percent_at_ratio_1e4():
    n = 10**8
    graph = binary_reduced_graph(n, 10**4)  # rho = 1e-4, spec's stated edge
    for gamma, nt in ((math.pi, math.pi), (1.0, 2.0), (2.5, 0.7)):
        ratio = marked_probability(graph, QwoaParams(((gamma, nt / n),))) * n / 10**4
        law = single_iteration_amplification(gamma, nt / n, n)
        assert abs(ratio - law) <= 0.01 * max(law, 0.05)


# =============================================================================
# Contraction soundness
# =============================================================================


def test_contraction_matches_full_graph_evolution():
    rng = np.random.default_rng(7)
    pool = [0.1, 0.25, 0.5, 0.75, 0.9]
    for case in range(25):
        n = int(rng.integers(2, 13))
        vertex_qualities = [float(q) for q in rng.choice(pool, size=n)]
        r = int(rng.integers(1, 5))
        pairs = tuple(
            (float(g), float(t))
            for g, t in zip(rng.uniform(0, 2 * math.pi, r), rng.uniform(0, 2.0, r))
        )
        params = QwoaParams(pairs)
        full = full_complete_graph_group_probabilities(vertex_qualities, params)
        reduced = reduce_from_vertex_qualities(vertex_qualities)
        probabilities = group_probabilities(reduced, params)
        assert sum(full.values()) == pytest.approx(1.0, abs=1e-12)
        for i, q in enumerate(reduced.qualities):
            assert abs(full[q] - probabilities[i]) < 1e-10


def test_contraction_degenerate_extremes():
    params = QwoaParams(((2.0, 0.8), (0.5, 1.2)))
    # every vertex distinct: reduction is the identity regrouping
    distinct = [0.1, 0.4, 0.7, 0.9]
    full = full_complete_graph_group_probabilities(distinct, params)
    reduced = reduce_from_vertex_qualities(distinct)
    assert reduced.counts == (1, 1, 1, 1)
    for i, q in enumerate(reduced.qualities):
        assert abs(full[q] - group_probabilities(reduced, params)[i]) < 1e-10
    # every vertex equal: a single partition holding all probability
    same = [0.5] * 6
    reduced = reduce_from_vertex_qualities(same)
    assert reduced.counts == (6,)
    assert group_probabilities(reduced, params)[0] == pytest.approx(1.0, abs=1e-12)


def test_reduce_orders_partitions_by_descending_quality():
    reduced = reduce_from_vertex_qualities([0.2, 0.9, 0.2, 0.5, 0.9, 0.9])
    assert reduced.qualities == (0.9, 0.5, 0.2)
    assert reduced.counts == (3, 1, 2)


def test_full_route_guards():
    params = QwoaParams(((1.0, 1.0),))
    with pytest.raises(ValidationError):
        full_complete_graph_group_probabilities([0.5], params)


# =============================================================================
# Partition experiment
# =============================================================================


def test_partition_graph_layout():
    g = partition_graph(3)
    assert g.counts == (10, 49_999_995, 49_999_995)
    assert g.qualities == (1.0, 0.75, 0.25)
    g = partition_graph(5)
    assert g.counts == (10, 24_999_998, 24_999_998, 24_999_997, 24_999_997)
    assert g.qualities == (1.0, 0.875, 0.625, 0.375, 0.125)
    assert g.n_total == 10**8
    g = partition_graph(10)
    assert g.counts[1:] == (11_111_110,) * 9
    assert g.qualities[1:] == tuple((i + 0.5) / 9 for i in reversed(range(9)))
    with pytest.raises(ValidationError):
        partition_graph(1)


def test_partition_experiment_zero_iterations():
    for p in (2, 5):
        (point,) = partition_experiment(p, r_values=[0], seed=3)
        assert point == PartitionPoint(p, 0, 1e-7, 1.0, 1.0)


def test_partition_experiment_binary_reaches_low_convergence_bound():
    points = partition_experiment(2, r_values=[1, 2], seed=1)
    for point in points:
        assert point.low_convergence_bound == (2 * point.r + 1) ** 2
        assert point.amplification == pytest.approx(point.low_convergence_bound, rel=1e-3)


def test_partition_experiment_ordering_binary_vs_ten_part():
    small = dict(r_values=[2], seed=5, starts=200, repeats=2)
    binary = partition_experiment(2, **small)[0]
    ten = partition_experiment(10, **small)[0]
    assert binary.amplification > ten.amplification


def test_partition_experiment_deterministic_and_worker_independent():
    kwargs = dict(r_values=[2], seed=9, starts=60, repeats=2)
    a = partition_experiment(3, **kwargs, workers=1)
    b = partition_experiment(3, **kwargs, workers=1)
    c = partition_experiment(3, **kwargs, workers=2)
    assert a == b == c


def test_partition_experiment_validation():
    with pytest.raises(ValidationError):
        partition_experiment(2, r_values=[-1], starts=5, repeats=1)
    with pytest.raises(ValidationError):
        partition_experiment(2, starts=0)


def test_partition_csv_layout():
    points = [PartitionPoint(2, 1, 9e-7, 9.0, 9.0), PartitionPoint(2, 0, 1e-7, 1.0, 1.0)]
    out = io.StringIO()
    export_partition_csv(points, out)
    lines = out.getvalue().splitlines()
    assert lines[0] == "p,r,optimised_probability,amplification,low_convergence_bound"
    assert lines[1].split(",")[:2] == ["2", "1"]
    assert float(lines[1].split(",")[3]) == 9.0
    assert len(lines) == 3


def test_derived_parameters_track_bound_across_r():
    # the derived-parameter route alone: (2r+1)^2 while amplified ratio stays low
    n = 10**8
    graph = binary_reduced_graph(n, 10)
    for r in (1, 4, 10, 15):
        amplification = repeated_parameter_probability(graph, math.pi, math.pi / n, r) * n / 10
        assert amplification == pytest.approx((2 * r + 1) ** 2, rel=1e-4)
