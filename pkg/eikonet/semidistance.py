"""Level-a graphs, negative cycles and the semidistance S_a(y, x)."""

from __future__ import annotations

import threading
from dataclasses import dataclass, field as dataclass_field
from itertools import islice
from typing import Iterable, Iterator, Optional

import networkx as nx
import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, computed_field
from scipy.integrate import simpson

from eikonet.errors import (
    ExplosionGuard,
    NegativeCycleDetected,
    NoAdmissiblePath,
    ParameterOutOfRange,
    UndefinedSigma,
)
from eikonet.hamiltonian import HamiltonianField
from eikonet.network import Network, NetworkPoint, Orientation, Vertex

FWD, REV = Orientation.FWD, Orientation.REV
SOURCE = "__source__"


class Leg(BaseModel):
    """Sub-arc traversed in ``dir``; ``s`` is in that orientation's parameter."""

    arc: str
    dir: Orientation
    s: tuple[float, float]
    cost: Optional[float]


class PathCertificate(BaseModel):
    start: NetworkPoint
    end: NetworkPoint
    cost: float
    legs: list[Leg] = Field(default_factory=list)


class CycleReport(BaseModel):
    level: float
    tolerance: float
    found: bool
    cost: Optional[float] = None
    legs: list[Leg] = Field(default_factory=list)
    excluded: list[Leg] = Field(default_factory=list)


def quadrature_nodes(field: HamiltonianField, arc_id: str, a: float, s1: float, s2: float) -> np.ndarray:
    """Simpson panel ends in [s1, s2]: the quadrature grid plus level breakpoints."""
    grid = field.numerics.quadrature_grid()
    kinks = field.breakpoints(arc_id, a)
    inner = np.concatenate([grid[(grid > s1) & (grid < s2)], kinks[(kinks > s1) & (kinks < s2)]])
    return np.unique(np.concatenate([[s1], inner, [s2]]))


def panel_costs(
    field: HamiltonianField, arc_id: str, a: float, nodes: np.ndarray, orientation: Orientation = FWD
) -> np.ma.MaskedArray:
    """Cost of crossing each [nodes[k], nodes[k+1]] (preferred parameter) in ``orientation``.

    A panel is masked when sigma+ is undefined at one of its Simpson nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    x = np.stack([nodes[:-1], (nodes[:-1] + nodes[1:]) / 2, nodes[1:]], axis=-1)
    if orientation is FWD:
        sigma = field.sigma_plus(arc_id, a, x.ravel(), FWD).reshape(x.shape)
    else:
        sigma = field.sigma_plus(arc_id, a, (1.0 - x).ravel(), REV).reshape(x.shape)
    costs = simpson(sigma.filled(0.0), x=x, axis=-1)
    return np.ma.masked_array(costs, mask=np.ma.getmaskarray(sigma).any(axis=-1))


def arc_cost(
    field: HamiltonianField, arc_id: str, orientation: Orientation, a: float, s1: float, s2: float
) -> float | None:
    """Integral of sigma+ over [s1, s2] of the oriented arc, None when undefined."""
    if not 0.0 <= s1 <= s2 <= 1.0:
        raise ParameterOutOfRange(f"need 0 <= s1 <= s2 <= 1, got [{s1}, {s2}]")
    if s1 == s2:
        return 0.0
    t1, t2 = (s1, s2) if orientation is FWD else (1.0 - s2, 1.0 - s1)
    costs = panel_costs(field, arc_id, a, quadrature_nodes(field, arc_id, a, t1, t2), orientation)
    if np.ma.getmaskarray(costs).any():
        return None
    return float(costs.sum())


@dataclass
class Reach:
    """Best value reaching a node from a set of weighted sources."""

    value: float
    source: NetworkPoint
    legs: list[Leg] = dataclass_field(default_factory=list)


class LevelGraph:
    """Directed multigraph of oriented sub-arcs with sigma+ costs at one level.

    Nodes are network points: every vertex plus the interior split points.
    Edge keys are ``(arc, dir, s_lo, s_hi)`` with the interval in the
    orientation's own parameter.
    """

    def __init__(self, network: Network, field: HamiltonianField, level: float, extra_points: Iterable[NetworkPoint] = ()):
        self.network = network
        self.field = field
        self.level = float(level)
        self.numerics = field.numerics
        extra_points = [network.check_point(p) for p in extra_points]
        self.multigraph = nx.MultiDiGraph()
        self.multigraph.add_nodes_from(Vertex(vertex=v) for v in network.vertices)
        self.multigraph.add_nodes_from(extra_points)
        self.undefined: list[Leg] = []
        self.self_loops: list[Leg] = []
        for piece in network.split_pieces(extra_points):
            for orientation in (FWD, REV):
                if orientation is FWD:
                    s, u, v = (piece.s0, piece.s1), piece.start, piece.end
                else:
                    s, u, v = (1.0 - piece.s1, 1.0 - piece.s0), piece.end, piece.start
                cost = arc_cost(field, piece.arc, orientation, self.level, *s)
                leg = Leg(arc=piece.arc, dir=orientation, s=s, cost=cost)
                self.multigraph.add_edge(u, v, key=(piece.arc, orientation.value, *s), weight=cost, leg=leg)
                if cost is None:
                    self.undefined.append(leg)
                elif u == v:
                    self.self_loops.append(leg)
        self._collapsed: dict[float, nx.DiGraph] = {}
        self._unsplit_free: bool | None = None
        self._lock = threading.Lock()
        logger.debug(
            "Level graph at a={:.10g}: {} nodes, {} edges, {} undefined",
            self.level,
            self.node_count,
            self.edge_count,
            len(self.undefined),
        )

    @property
    def node_count(self) -> int:
        return self.multigraph.number_of_nodes()

    @property
    def edge_count(self) -> int:
        return self.multigraph.number_of_edges()

    @property
    def tolerance(self) -> float:
        return self.numerics.cycle_tolerance(self.level, self.network.arc_count)

    def rate(self, tol: float | None = None) -> float:
        """Cycle tolerance per unit of parameter length.

        A simple cycle covers at most max(arc count, 2) units of parameter, so
        the shares of its legs add up to at most ``tol`` wherever the split
        points sit.
        """
        tol = self.tolerance if tol is None else tol
        return tol / max(self.network.arc_count, 2)

    def allowance(self, leg: Leg, tol: float | None = None) -> float:
        return self.rate(tol) * (leg.s[1] - leg.s[0])

    def edge_weight(self, arc_id: str, orientation: Orientation, s1: float, s2: float) -> float | None:
        for _, _, key, data in self.multigraph.edges(keys=True, data=True):
            if key == (arc_id, orientation.value, s1, s2):
                return data["weight"]
        raise KeyError((arc_id, orientation.value, s1, s2))

    def collapsed(self, rate: float = 0.0) -> nx.DiGraph:
        """Cheapest defined edge per ordered node pair, each raised by ``rate`` times its parameter length."""
        with self._lock:
            return self._collapse(rate)

    def _collapse(self, rate: float) -> nx.DiGraph:
        if rate not in self._collapsed:
            digraph = nx.DiGraph()
            digraph.add_nodes_from(self.multigraph.nodes)
            for u, v, data in self.multigraph.edges(data=True):
                if data["weight"] is None or u == v:
                    continue
                leg = data["leg"]
                weight = data["weight"] + rate * (leg.s[1] - leg.s[0])
                current = digraph.get_edge_data(u, v)
                if current is None or (weight, leg.arc) < (current["weight"], current["leg"].arc):
                    digraph.add_edge(u, v, weight=weight, leg=leg)
            self._collapsed[rate] = digraph
        return self._collapsed[rate]

    def negative_cycle(self, tol: float | None = None) -> CycleReport:
        """Look for a cycle costing less than the sum of its legs' allowances (at most tol)."""
        tol = self.tolerance if tol is None else tol
        report = CycleReport(level=self.level, tolerance=tol, found=False, excluded=list(self.undefined))
        if self.self_loops:
            cheapest = min(self.self_loops, key=lambda leg: leg.cost + self.allowance(leg, tol))
            if cheapest.cost < -self.allowance(cheapest, tol):
                report.found, report.cost, report.legs = True, cheapest.cost, [cheapest]
                return report
        digraph = self.collapsed(self.rate(tol)).copy()
        digraph.add_edges_from((SOURCE, node, {"weight": 0.0}) for node in self.multigraph.nodes)
        try:
            cycle = nx.find_negative_cycle(digraph, SOURCE, weight="weight")
        except nx.NetworkXError:
            return report
        legs = [digraph[u][v]["leg"] for u, v in zip(cycle[:-1], cycle[1:])]
        report.found, report.legs = True, legs
        report.cost = float(sum(leg.cost for leg in legs))
        return report

    def unsplit_is_cycle_free(self) -> bool:
        """Whether the graph on the vertices alone has no negative cycle at this level."""
        if self._unsplit_free is None:
            if self.node_count == len(self.network.vertices):
                self._unsplit_free = not self.negative_cycle().found
            else:
                self._unsplit_free = not LevelGraph(self.network, self.field, self.level).negative_cycle().found
        return self._unsplit_free

    def _rates(self) -> Iterator[float]:
        rate = self.rate()
        yield from (r for r in (1e-12 * (1.0 + abs(self.level)), 1e-10 * (1.0 + abs(self.level))) if r < rate)
        yield rate
        # split points move Simpson nodes; a level certified on the vertex graph stays cycle-free
        if self.node_count > len(self.network.vertices) and self.unsplit_is_cycle_free():
            for factor in (4.0, 16.0, 64.0):
                yield factor * rate

    def distances_from(self, sources: dict[NetworkPoint, float]) -> dict[NetworkPoint, Reach]:
        """min over sources y of value(y) + S_a(y, node), for every reachable node."""
        sources = {self.network.check_point(p): float(v) for p, v in sources.items()}
        for rate in self._rates():
            digraph = self.collapsed(rate).copy()
            digraph.add_edges_from((SOURCE, node, {"weight": value}) for node, value in sources.items())
            try:
                _, paths = nx.single_source_bellman_ford(digraph, SOURCE, weight="weight")
            except nx.NetworkXUnbounded:
                logger.debug("Negative cycle with rate {:.3g} at a={:.10g}", rate, self.level)
                continue
            self._check_self_loops(paths)
            values: dict[NetworkPoint, float] = {}
            for node in sorted((n for n in paths if n != SOURCE), key=lambda n: len(paths[n])):
                path = paths[node]
                values[node] = sources[node] if len(path) == 2 else values[path[-2]] + digraph[path[-2]][node]["leg"].cost
            return self._certificates(sources, values)
        raise NegativeCycleDetected(
            f"negative cycle reachable at level {self.level}", witness=self.negative_cycle()
        )

    def _certificates(self, sources: dict[NetworkPoint, float], values: dict[NetworkPoint, float]) -> dict[NetworkPoint, Reach]:
        """Optimal paths with the fewest legs, then the smallest first arc id.

        Breadth-first over the edges that are tight for ``values``.
        """
        slack = 1e-12 * (1.0 + abs(self.level) + max(map(abs, values.values()), default=0.0))
        reach = {node: Reach(value, node) for node, value in sources.items() if value <= values[node] + slack}
        frontier = sorted(reach, key=str)
        while frontier:
            offers: dict[NetworkPoint, tuple[tuple[str, str, str], Reach]] = {}
            for u in frontier:
                for _, v, data in self.multigraph.out_edges(u, data=True):
                    leg = data["leg"]
                    if v in reach or u == v or leg.cost is None or values[u] + leg.cost > values[v] + slack:
                        continue
                    rank = (reach[u].legs[0].arc if reach[u].legs else leg.arc, str(u), leg.arc)
                    if v not in offers or rank < offers[v][0]:
                        offers[v] = (rank, Reach(reach[u].value + leg.cost, reach[u].source, [*reach[u].legs, leg]))
            reach.update((v, found) for v, (_, found) in offers.items())
            frontier = sorted(offers, key=str)
        return reach

    def _check_self_loops(self, reached) -> None:
        for leg in self.self_loops:
            vertex = Vertex(vertex=self.network.arcs[leg.arc].tail)
            if leg.cost < -self.allowance(leg) and vertex in reached:
                report = CycleReport(level=self.level, tolerance=self.tolerance, found=True, cost=leg.cost, legs=[leg])
                raise NegativeCycleDetected(f"negative loop {leg.arc!r} at level {self.level}", witness=report)

    def shortest_path(self, y: NetworkPoint, x: NetworkPoint) -> PathCertificate:
        y, x = self.network.check_point(y), self.network.check_point(x)
        if y == x:
            return PathCertificate(start=y, end=x, cost=0.0)
        reach = self.distances_from({y: 0.0})
        if x not in reach:
            raise NoAdmissiblePath(f"no admissible path from {y} to {x} at level {self.level}")
        legs = reach[x].legs
        return PathCertificate(start=y, end=x, cost=float(sum(leg.cost for leg in legs)), legs=legs)


def build_level_graph(
    network: Network, field: HamiltonianField, a: float, extra_points: Iterable[NetworkPoint] = ()
) -> LevelGraph:
    return LevelGraph(network, field, a, extra_points)


def has_negative_cycle(graph: LevelGraph, tol: float | None = None) -> CycleReport:
    return graph.negative_cycle(tol)


def semidistance(
    network: Network, field: HamiltonianField, a: float, y: NetworkPoint, x: NetworkPoint
) -> tuple[float, PathCertificate]:
    """S_a(y, x) with an optimal sub-arc path.

    Raises:
        NegativeCycleDetected: a cycle cheaper than -tol is reachable
        NoAdmissiblePath: every path meets an undefined sub-arc
    """
    certificate = build_level_graph(network, field, a, [y, x]).shortest_path(y, x)
    return certificate.cost, certificate


def _defined_multigraph(graph: LevelGraph) -> nx.MultiDiGraph:
    defined = nx.MultiDiGraph()
    defined.add_nodes_from(graph.multigraph.nodes)
    for u, v, key, data in graph.multigraph.edges(keys=True, data=True):
        if data["weight"] is not None and u != v:
            defined.add_edge(u, v, key=key, weight=data["weight"])
    return defined


def brute_force_semidistance(
    network: Network,
    field: HamiltonianField,
    a: float,
    y: NetworkPoint,
    x: NetworkPoint,
    max_legs: int | None = None,
    path_cap: int = 200_000,
) -> float:
    """Minimum cost over every simple sub-arc path from y to x."""
    y, x = network.check_point(y), network.check_point(x)
    if y == x:
        return 0.0
    defined = _defined_multigraph(build_level_graph(network, field, a, [y, x]))
    best = np.inf
    for count, path in enumerate(nx.all_simple_edge_paths(defined, y, x, cutoff=max_legs), start=1):
        if count > path_cap:
            raise ExplosionGuard(f"more than {path_cap} simple paths from {y} to {x}")
        best = min(best, sum(defined.edges[edge]["weight"] for edge in path))
    if not np.isfinite(best):
        raise NoAdmissiblePath(f"no admissible path from {y} to {x} at level {a}")
    return float(best)


def minimum_cycle_cost(graph: LevelGraph, cycle_cap: int = 200_000) -> tuple[float, list[Leg]]:
    """Cheapest simple cycle by enumeration; +inf when the graph is acyclic."""
    best, witness = np.inf, []
    for leg in graph.self_loops:
        if leg.cost < best:
            best, witness = leg.cost, [leg]
    digraph = graph.collapsed(0.0)
    cycles = nx.simple_cycles(digraph)
    for count, cycle in enumerate(islice(cycles, cycle_cap + 1), start=1):
        if count > cycle_cap:
            raise ExplosionGuard(f"more than {cycle_cap} simple cycles")
        legs = [digraph[u][v]["leg"] for u, v in zip(cycle, [*cycle[1:], cycle[0]])]
        cost = sum(leg.cost for leg in legs)
        if cost < best:
            best, witness = cost, legs
    return float(best), witness


def lipschitz_bound(network: Network, field: HamiltonianField, a: float) -> float:
    """Largest |sigma+-| per unit length over all arcs at level a."""
    grid = field.numerics.sample_grid()
    bound = 0.0
    for arc_id, arc in network.arcs.items():
        plus, minus = field.sigma_plus(arc_id, a, grid), field.sigma_minus(arc_id, a, grid)
        if np.ma.getmaskarray(plus).any() or np.ma.getmaskarray(minus).any():
            raise UndefinedSigma(f"support functions undefined on arc {arc_id!r} at level {a}")
        steepest = np.maximum(np.abs(plus.data), np.abs(minus.data)) / arc.geometry.speed(grid)
        bound = max(bound, float(np.max(steepest)))
    return bound


class OracleMismatch(BaseModel):
    start: NetworkPoint
    end: NetworkPoint
    fast: Optional[float]
    brute: Optional[float]
    error: float


class OracleReport(BaseModel):
    level: float
    tolerance: float
    pairs: int
    max_error: float
    cycle_cost: Optional[float]
    cycle_tolerance: float
    worst: Optional[OracleMismatch] = None

    @computed_field
    @property
    def passed(self) -> bool:
        cycles_ok = self.cycle_cost is None or self.cycle_cost >= -self.cycle_tolerance
        return self.max_error <= self.tolerance and cycles_ok


def differential_oracle(
    network: Network, field: HamiltonianField, a: float, points: Iterable[NetworkPoint], tol: float = 1e-9
) -> OracleReport:
    """Compare semidistance with the path enumerator on every ordered pair of ``points``.

    Interior points on the quadrature grid leave the Simpson panels of both
    computations identical.
    """
    points = list(dict.fromkeys(network.check_point(p) for p in points))
    graph = build_level_graph(network, field, a, points)
    cycle_cost, _ = minimum_cycle_cost(graph)
    worst, max_error, pairs = None, 0.0, 0
    for y in points:
        reach = graph.distances_from({y: 0.0})
        for x in points:
            if x == y:
                continue
            pairs += 1
            fast = reach[x].value if x in reach else None
            try:
                brute = brute_force_semidistance(network, field, a, y, x)
            except NoAdmissiblePath:
                brute = None
            if fast is None or brute is None:
                error = 0.0 if fast is None and brute is None else np.inf
            else:
                error = abs(fast - brute) / (1.0 + abs(brute))
            if error > max_error:
                max_error = error
                worst = OracleMismatch(start=y, end=x, fast=fast, brute=brute, error=error)
    logger.info("Oracle at a = {:.10g}: {} pairs, max relative error {:.3g}", a, pairs, max_error)
    return OracleReport(
        level=a,
        tolerance=tol,
        pairs=pairs,
        max_error=max_error,
        cycle_cost=float(cycle_cost) if np.isfinite(cycle_cost) else None,
        cycle_tolerance=graph.tolerance,
        worst=worst,
    )
