"""Critical value by bisection, Aubry set and static classes."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional, Union

import networkx as nx
import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from eikonet.errors import BracketFailure, EmptyAubry, NegativeCycleDetected
from eikonet.hamiltonian import HamiltonianField
from eikonet.network import Interior, Network, NetworkPoint, Vertex
from eikonet.semidistance import CycleReport, LevelGraph, arc_cost, build_level_graph


class BisectionStep(BaseModel):
    level: float
    negative: bool
    low: float
    high: float


class CriticalData(BaseModel):
    a0: float
    a_gamma: dict[str, float]
    c: float
    tolerance: float
    constant_level: Optional[float] = None
    history: list[BisectionStep] = Field(default_factory=list)
    zero_cycle: Optional[CycleReport] = None
    degenerate_witness: Optional[NetworkPoint] = None


def critical_value(network: Network, field: HamiltonianField) -> CriticalData:
    """Smallest level a >= a_0 without negative cycles.

    Raises:
        BracketFailure: no cycle-free level found within the doubling budget
    """
    numerics = field.numerics
    a_gamma = {arc_id: field.a_gamma(arc_id) for arc_id in network.arcs}
    a0 = max(a_gamma.values())
    constant_level = field.constant_subsolution_level()
    history: list[BisectionStep] = []

    def check_level(level: float, low: float, high: float) -> CycleReport:
        report = build_level_graph(network, field, level).negative_cycle()
        history.append(BisectionStep(level=level, negative=report.found, low=low, high=high))
        logger.debug("a={:.12g} negative cycle: {}", level, report.found)
        return report

    floor = check_level(a0, a0, a0)
    if not floor.found:
        arc_id = max(a_gamma, key=a_gamma.get)
        witness = network.canonical_point(arc_id, field.energy_peak(arc_id)[0])
        logger.info("Critical value c = a0 = {:.10g}, degenerate witness {}", a0, witness)
        return CriticalData(
            a0=a0,
            a_gamma=a_gamma,
            c=a0,
            tolerance=numerics.bisection_tol * (1.0 + abs(a0)),
            constant_level=float(constant_level) if np.isfinite(constant_level) else None,
            history=history,
            degenerate_witness=witness,
        )

    low, last_negative = a0, floor
    step = 1.0
    for _ in range(numerics.max_doublings):
        high = a0 + step
        report = check_level(high, low, high)
        if not report.found:
            break
        low, last_negative = high, report
        step *= 2.0
    else:
        raise BracketFailure(f"negative cycles persist up to a = {a0 + step}")

    while high - low > numerics.bisection_tol * (1.0 + abs(high)):
        middle = (low + high) / 2
        report = check_level(middle, low, high)
        if report.found:
            low, last_negative = middle, report
        else:
            high = middle

    c = high
    legs = [leg.model_copy(update={"cost": arc_cost(field, leg.arc, leg.dir, c, *leg.s)}) for leg in last_negative.legs]
    zero_cycle = CycleReport(
        level=c,
        tolerance=numerics.cycle_tolerance(c, network.arc_count),
        found=True,
        cost=float(sum(leg.cost for leg in legs)),
        legs=legs,
    )
    logger.info("Critical value c = {:.10g} (a0 = {:.10g}) after {} levels", c, a0, len(history))
    return CriticalData(
        a0=a0,
        a_gamma=a_gamma,
        c=c,
        tolerance=numerics.bisection_tol * (1.0 + abs(c)),
        constant_level=float(constant_level) if np.isfinite(constant_level) else None,
        history=history,
        zero_cycle=zero_cycle,
    )


def degenerate_set(field: HamiltonianField, arc_id: str, c: float) -> list[tuple[float, float]]:
    """Maximal closed intervals of the arc where sigma+ = sigma- at level c."""
    return [(start, end) for start, _, end in field.contact_intervals(arc_id, c)]


class AubryVertex(BaseModel):
    vertex: str


class AubryInterval(BaseModel):
    arc: str
    interval: tuple[float, float]


AubryItem = Union[AubryVertex, AubryInterval]


class StaticClass(BaseModel):
    id: int
    items: list[AubryItem]
    origin: Literal["cycle", "degenerate"]
    representative: NetworkPoint


class AubryStructure(BaseModel):
    c: float
    a0: float
    classes: list[StaticClass]

    def items(self) -> list[AubryItem]:
        return [item for cls in self.classes for item in cls.items]

    def contains(self, point: NetworkPoint, slack: float = 0.0) -> bool:
        for item in self.items():
            if isinstance(item, AubryVertex) and isinstance(point, Vertex) and item.vertex == point.vertex:
                return True
            if isinstance(item, AubryInterval) and isinstance(point, Interior) and item.arc == point.arc:
                if item.interval[0] - slack <= point.s <= item.interval[1] + slack:
                    return True
        return False


@dataclass
class _Atom:
    item: AubryItem
    origin: str
    representative: NetworkPoint


def _zero_cycle_arcs(graph: LevelGraph, tol: float) -> list[str]:
    arcs: list[str] = []
    for leg in graph.self_loops:
        if leg.cost <= tol and leg.arc not in arcs:
            arcs.append(leg.arc)
    returns: dict[NetworkPoint, dict] = {}
    for u, v, data in graph.multigraph.edges(data=True):
        leg = data["leg"]
        if data["weight"] is None or u == v or leg.arc in arcs:
            continue
        if v not in returns:
            returns[v] = graph.distances_from({v: 0.0})
        back = returns[v].get(u)
        if back is not None and data["weight"] + back.value <= tol:
            arcs.append(leg.arc)
    return [arc_id for arc_id in graph.network.arcs if arc_id in arcs]


def _atoms(network: Network, field: HamiltonianField, level: float, tol: float) -> list[_Atom]:
    graph = build_level_graph(network, field, level)
    cycle = graph.negative_cycle()
    if cycle.found:
        raise NegativeCycleDetected(f"negative cycle at level {level}: below the critical value", witness=cycle)
    cycle_arcs = set(_zero_cycle_arcs(graph, tol))
    atoms: list[_Atom] = []
    seen_vertices: set[str] = set()

    def add_vertex(vertex: str, origin: str) -> None:
        if vertex not in seen_vertices:
            seen_vertices.add(vertex)
            atoms.append(_Atom(AubryVertex(vertex=vertex), origin, Vertex(vertex=vertex)))

    for arc_id, arc in network.arcs.items():
        pieces = [(0.0, 1.0, "cycle")] if arc_id in cycle_arcs else []
        pieces += [(start, end, "degenerate") for start, _, end in field.contact_intervals(arc_id, level)]
        pieces.sort()
        merged: list[list] = []
        for start, end, origin in pieces:
            if merged and start <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], end)
                if origin == "cycle":
                    merged[-1][2] = "cycle"
            else:
                merged.append([start, end, origin])
        for start, end, origin in merged:
            if start == 0.0:
                add_vertex(arc.tail, origin)
            if end == 1.0:
                add_vertex(arc.head, origin)
            if end == 0.0 or start == 1.0:
                continue
            middle = network.canonical_point(arc_id, (start + end) / 2)
            atoms.append(_Atom(AubryInterval(arc=arc_id, interval=(start, end)), origin, middle))
    return atoms


def _touches(atom: _Atom, vertex: str, network: Network) -> bool:
    if not isinstance(atom.item, AubryInterval):
        return False
    arc = network.arcs[atom.item.arc]
    start, end = atom.item.interval
    return (start == 0.0 and arc.tail == vertex) or (end == 1.0 and arc.head == vertex)


def _classes(network: Network, field: HamiltonianField, level: float, atoms: list[_Atom], tol: float) -> list[StaticClass]:
    links = nx.Graph()
    links.add_nodes_from(range(len(atoms)))
    for i, atom in enumerate(atoms):
        if isinstance(atom.item, AubryVertex):
            links.add_edges_from((i, j) for j, other in enumerate(atoms) if _touches(other, atom.item.vertex, network))

    groups = [sorted(group) for group in nx.connected_components(links)]
    groups.sort(key=lambda group: group[0])
    representatives = []
    for group in groups:
        intervals = [i for i in group if isinstance(atoms[i].item, AubryInterval)]
        representatives.append(atoms[(intervals or group)[0]].representative)

    if len(groups) > 1:
        graph = build_level_graph(network, field, level, representatives)
        reach = [graph.distances_from({rep: 0.0}) for rep in representatives]
        for i, j in ((i, j) for i in range(len(groups)) for j in range(i + 1, len(groups))):
            there, back = reach[i].get(representatives[j]), reach[j].get(representatives[i])
            if there is not None and back is not None and there.value + back.value <= tol:
                links.add_edge(groups[i][0], groups[j][0])

    classes = []
    for group in sorted((sorted(g) for g in nx.connected_components(links)), key=lambda g: g[0]):
        members = [atoms[i] for i in group]
        first_interval = next((m for m in members if isinstance(m.item, AubryInterval)), members[0])
        classes.append(
            StaticClass(
                id=len(classes),
                items=[m.item for m in members],
                origin="cycle" if any(m.origin == "cycle" for m in members) else "degenerate",
                representative=first_interval.representative,
            )
        )
    return classes


def class_tolerance(field: HamiltonianField, level: float) -> float:
    return field.numerics.pair_tol * (1.0 + abs(level))


def uniqueness_set(network: Network, field: HamiltonianField, level: float) -> list[StaticClass]:
    """Zero-cost cycle supports and contact intervals at ``level``, grouped into classes.

    Empty above the critical value. Raises NegativeCycleDetected below it.
    """
    tol = class_tolerance(field, level)
    atoms = _atoms(network, field, level, tol)
    return _classes(network, field, level, atoms, tol) if atoms else []


def aubry_set(network: Network, field: HamiltonianField, critical: CriticalData) -> AubryStructure:
    """Aubry set at the critical level and its partition into static classes.

    Raises:
        EmptyAubry: nothing found at c, which means c is inconsistent
    """
    classes = uniqueness_set(network, field, critical.c)
    if not classes:
        raise EmptyAubry(f"no Aubry points at c = {critical.c}")
    logger.info("Aubry set at c = {:.10g}: {} static classes", critical.c, len(classes))
    return AubryStructure(c=critical.c, a0=critical.a0, classes=classes)


class ConditionDReport(BaseModel):
    holds: bool
    vacuous: bool
    arcs: dict[str, bool]


def condition_D_holds(network: Network, field: HamiltonianField, critical: CriticalData) -> ConditionDReport:
    """Whether min_mu H is constant along every arc with a_gamma = c = a_0."""
    tol = field.numerics.energy_tolerance(critical.c)
    if critical.c > critical.a0 + tol:
        return ConditionDReport(holds=True, vacuous=True, arcs={})
    grid = field.numerics.sample_grid()
    verdicts = {}
    for arc_id in network.arcs:
        if abs(field.a_gamma(arc_id) - critical.c) <= tol:
            _, m = field.min_over_mu(arc_id, grid)
            verdicts[arc_id] = bool(np.max(m) - np.min(m) <= tol)
    return ConditionDReport(holds=all(verdicts.values()), vacuous=not verdicts, arcs=verdicts)
