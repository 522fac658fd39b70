"""Structural properties on randomly generated networks."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eikonet.critical_aubry import aubry_set, critical_value
from eikonet.hamiltonian import validate_field
from eikonet.hopflax import (
    HopfLaxSolver,
    Trace,
    aubry_points,
    check_solution_fixed_point,
    check_subsolution,
    comparison_harness,
    random_restriction,
    solve,
)
from eikonet.instance import MAX_ARCS, random_instance
from eikonet.network import Interior, Vertex
from eikonet.semidistance import build_level_graph, differential_oracle, lipschitz_bound

SEEDS = st.integers(0, 2**32 - 1)


def vertex_points(network):
    return [Vertex(vertex=v) for v in network.vertices]


def check_instance(seed: int) -> None:
    instance = random_instance(np.random.default_rng(seed))
    network, field = instance.network, instance.field
    assert 1 <= network.arc_count <= MAX_ARCS
    assert validate_field(network, field).passed

    critical = critical_value(network, field)
    assert critical.c >= critical.a0
    assert aubry_set(network, field, critical).classes

    graph = build_level_graph(network, field, critical.c)
    assert not graph.negative_cycle().found
    points = vertex_points(network)
    reach = {p: graph.distances_from({p: 0.0}) for p in points}
    slack = 2 * graph.tolerance
    for x in points:
        for y in points:
            assert reach[x][y].value + reach[y][x].value >= -slack
            for z in points:
                assert reach[x][z].value <= reach[x][y].value + reach[y][z].value + slack

    above = build_level_graph(network, field, critical.c + 0.5)
    bound = lipschitz_bound(network, field, critical.c + 0.5)
    for x in points:
        ahead = above.distances_from({x: 0.0})
        for y in points:
            assert ahead[y].value >= reach[x][y].value - graph.tolerance
            assert ahead[y].value <= 1.01 * bound * network.geodesic_distance(x, y) + 1e-9


@settings(max_examples=10, deadline=None)
@given(SEEDS)
def test_random_instances(seed):
    check_instance(seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(200))
def test_random_instances_exhaustive(seed):
    check_instance(seed)


@settings(max_examples=8, deadline=None)
@given(SEEDS)
def test_semidistance_matches_path_enumeration(seed):
    rng = np.random.default_rng(seed)
    instance = random_instance(rng)
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    nodes = field.numerics.quadrature_grid()[1:-1]
    arc_id = sorted(network.arcs)[int(rng.integers(network.arc_count))]
    points = [*vertex_points(network), Interior(arc=arc_id, s=float(rng.choice(nodes)))]
    for level in (critical.c, critical.c + 1.0):
        report = differential_oracle(network, field, level, points)
        assert report.passed, (level, report.worst)


@settings(max_examples=8, deadline=None)
@given(SEEDS)
def test_solutions_above_the_critical_value_are_subsolutions(seed):
    rng = np.random.default_rng(seed)
    instance = random_instance(rng)
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    level = critical.c + 0.5
    vertex = sorted(network.vertices)[int(rng.integers(len(network.vertices)))]
    u = solve(network, field, critical, Trace(network, {Vertex(vertex=vertex): 1.0}), level=level)
    assert u.value_at(Vertex(vertex=vertex)) == pytest.approx(1.0)
    assert check_subsolution(network, field, u, level, seed=seed).passed


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_comparison_on_random_instances(seed):
    instance = random_instance(np.random.default_rng(seed))
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    aubry = aubry_set(network, field, critical)
    at_c = comparison_harness(network, field, critical, aubry, trials=20, seed=seed, random_vertex=True)
    assert at_c.passed, at_c.worst_point
    above = comparison_harness(network, field, critical, aubry, trials=20, level=critical.c + 0.5, seed=seed, workers=4)
    assert above.passed, above.worst_point


def check_uniqueness(seed: int) -> None:
    rng = np.random.default_rng(seed)
    instance = random_instance(rng)
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    aubry = aubry_set(network, field, critical)
    solver = HopfLaxSolver(network, field, critical.c)
    points = aubry_points(network, aubry.classes, {arc_id: field.numerics.sample_grid() for arc_id in network.arcs})
    candidates = list(dict.fromkeys([*points, *vertex_points(network)]))
    u = solver.solve(random_restriction(solver, rng, points, candidates))

    report = check_solution_fixed_point(network, field, u, critical, aubry)
    assert report.passed, report
    for offset in (-0.1, 0.1):
        assert not check_solution_fixed_point(network, field, u, critical, aubry, level=critical.c + offset).passed


@settings(max_examples=5, deadline=None)
@given(SEEDS)
def test_solutions_from_the_aubry_set_are_fixed_points(seed):
    check_uniqueness(seed)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(40))
def test_fixed_points_on_random_instances(seed):
    check_uniqueness(seed)


@settings(max_examples=4, deadline=None)
@given(SEEDS)
def test_comparison_at_the_critical_value_on_random_instances(seed):
    instance = random_instance(np.random.default_rng(seed))
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    aubry = aubry_set(network, field, critical)
    report = comparison_harness(network, field, critical, aubry, trials=3, seed=seed, random_vertex=True)
    assert report.passed, report.worst_point
