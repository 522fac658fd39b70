"""Hopf-Lax solutions from admissible traces and the checks built on them."""

from __future__ import annotations

from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Literal, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel, computed_field

from eikonet.critical_aubry import (
    AubryInterval,
    AubryStructure,
    AubryVertex,
    CriticalData,
    StaticClass,
    uniqueness_set,
)
from eikonet.errors import (
    ComparisonViolation,
    EmptyTrace,
    InadmissibleTrace,
    NegativeCycleDetected,
    NetworkDocumentError,
    NoAdmissiblePath,
    TraceConflict,
    UndefinedSigma,
)
from eikonet.hamiltonian import HamiltonianField
from eikonet.network import Interior, Network, NetworkPoint, Orientation, Vertex
from eikonet.schemas import ArcAt, ArcSamplesDoc, FieldDocument, TraceDocument, TracePointDoc, VertexAt
from eikonet.semidistance import LevelGraph, Reach, build_level_graph, panel_costs, quadrature_nodes

FWD, REV = Orientation.FWD, Orientation.REV


def _nearest(nodes: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Index of the node closest to each target (nodes sorted)."""
    right = np.clip(np.searchsorted(nodes, targets), 1, nodes.size - 1)
    left = right - 1
    return np.where(np.abs(nodes[left] - targets) <= np.abs(nodes[right] - targets), left, right)


class FieldOnNetwork:
    """Real function on the network: samples per arc plus vertex values.

    Arc grids start at 0 and end at 1 (preferred parameter); their end
    samples are the vertex values.
    """

    def __init__(self, network: Network, grids: dict[str, np.ndarray], values: dict[str, np.ndarray], vertex_values: dict[str, float]):
        self.network = network
        self.grids = {arc_id: np.asarray(grids[arc_id], dtype=float) for arc_id in network.arcs}
        self.values = {arc_id: np.array(values[arc_id], dtype=float) for arc_id in network.arcs}
        self.vertex_values = {v: float(vertex_values[v]) for v in network.vertices}
        for arc_id, arc in network.arcs.items():
            self.values[arc_id][0] = self.vertex_values[arc.tail]
            self.values[arc_id][-1] = self.vertex_values[arc.head]

    @classmethod
    def from_function(cls, network: Network, fn: Callable[[str, np.ndarray], np.ndarray], grid: np.ndarray) -> "FieldOnNetwork":
        grid = np.asarray(grid, dtype=float)
        values = {arc_id: np.asarray(fn(arc_id, grid), dtype=float) for arc_id in network.arcs}
        vertex_values = {}
        for arc_id, arc in network.arcs.items():
            vertex_values.setdefault(arc.tail, float(values[arc_id][0]))
            vertex_values.setdefault(arc.head, float(values[arc_id][-1]))
        return cls(network, {arc_id: grid for arc_id in network.arcs}, values, vertex_values)

    @classmethod
    def constant(cls, network: Network, value: float, grid: np.ndarray) -> "FieldOnNetwork":
        return cls.from_function(network, lambda _, s: np.full(s.shape, float(value)), grid)

    @classmethod
    def from_document(cls, network: Network, document: FieldDocument) -> "FieldOnNetwork":
        grids, values = {}, {}
        for samples in document.arcs:
            network.arc(samples.arc)
            grid = np.asarray(samples.s_grid, dtype=float)
            if grid.size != len(samples.values) or grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
                raise NetworkDocumentError(f"field samples of arc {samples.arc!r} need an increasing grid from 0 to 1")
            grids[samples.arc], values[samples.arc] = grid, np.asarray(samples.values, dtype=float)
        missing = set(network.arcs) - set(grids)
        if missing or set(network.vertices) - set(document.vertices):
            raise NetworkDocumentError(f"field document misses arcs {sorted(missing)} or vertex values")
        for arc_id, arc in network.arcs.items():
            for end, sample in ((arc.tail, values[arc_id][0]), (arc.head, values[arc_id][-1])):
                expected = document.vertices[end]
                if abs(sample - expected) > 1e-9 * (1.0 + abs(expected)):
                    raise NetworkDocumentError(f"arc {arc_id!r} end sample disagrees with vertex {end!r}")
        return cls(network, grids, values, document.vertices)

    def to_document(self) -> FieldDocument:
        return FieldDocument(
            arcs=[
                ArcSamplesDoc(arc=arc_id, s_grid=self.grids[arc_id].tolist(), values=self.values[arc_id].tolist())
                for arc_id in self.network.arcs
            ],
            vertices=dict(self.vertex_values),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.concat(
            [pd.DataFrame({"arc": arc_id, "s": self.grids[arc_id], "value": self.values[arc_id]}) for arc_id in self.network.arcs],
            ignore_index=True,
        )

    def values_on(self, arc_id: str, s) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.grids[arc_id], self.values[arc_id])

    def value_at(self, point: NetworkPoint) -> float:
        point = self.network.check_point(point)
        if isinstance(point, Vertex):
            return self.vertex_values[point.vertex]
        return float(self.values_on(point.arc, point.s))

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.values.values())

    def nodes(self) -> Iterable[tuple[NetworkPoint, float]]:
        for vertex, value in self.vertex_values.items():
            yield Vertex(vertex=vertex), value
        for arc_id in self.network.arcs:
            for s, value in zip(self.grids[arc_id][1:-1], self.values[arc_id][1:-1]):
                yield Interior(arc=arc_id, s=float(s)), float(value)

    def map(self, fn: Callable[[np.ndarray], np.ndarray]) -> "FieldOnNetwork":
        return FieldOnNetwork(
            self.network,
            self.grids,
            {arc_id: fn(values) for arc_id, values in self.values.items()},
            {v: float(fn(np.array([x]))[0]) for v, x in self.vertex_values.items()},
        )

    def combine(self, other: "FieldOnNetwork", fn: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> "FieldOnNetwork":
        grids, values = {}, {}
        for arc_id in self.network.arcs:
            grid = np.union1d(self.grids[arc_id], other.grids[arc_id])
            grids[arc_id] = grid
            values[arc_id] = fn(self.values_on(arc_id, grid), other.values_on(arc_id, grid))
        vertex_values = {
            v: float(fn(np.array([self.vertex_values[v]]), np.array([other.vertex_values[v]]))[0]) for v in self.vertex_values
        }
        return FieldOnNetwork(self.network, grids, values, vertex_values)

    def shifted(self, amount: float) -> "FieldOnNetwork":
        return self.map(lambda values: values + amount)

    def scaled(self, factor: float) -> "FieldOnNetwork":
        return self.map(lambda values: values * factor)

    def minimum(self, other: "FieldOnNetwork") -> "FieldOnNetwork":
        return self.combine(other, np.minimum)

    def __sub__(self, other: "FieldOnNetwork") -> "FieldOnNetwork":
        return self.combine(other, np.subtract)

    def deviation(self, other: "FieldOnNetwork") -> float:
        """Sup distance measured on this field's samples."""
        worst = max(abs(self.vertex_values[v] - other.vertex_values[v]) for v in self.vertex_values)
        for arc_id in self.network.arcs:
            gap = np.abs(self.values[arc_id] - other.values_on(arc_id, self.grids[arc_id]))
            worst = max(worst, float(np.max(gap)))
        return worst


class Trace:
    """Boundary data g on a finite set of network points."""

    def __init__(self, network: Network, values: dict[NetworkPoint, float] | Iterable[tuple[NetworkPoint, float]]):
        self.network = network
        self.values: dict[NetworkPoint, float] = {}
        pairs = values.items() if isinstance(values, dict) else values
        for point, value in pairs:
            self.add(point, value)

    def add(self, point: NetworkPoint, value: float) -> None:
        point, value = self.network.check_point(point), float(value)
        known = self.values.get(point)
        if known is not None and abs(known - value) > 1e-12 * (1.0 + abs(value)):
            raise TraceConflict(f"point {point} carries values {known} and {value}")
        self.values[point] = value if known is None else min(known, value)

    @classmethod
    def from_document(cls, network: Network, document: TraceDocument, grid: np.ndarray) -> "Trace":
        """Points as given; intervals sampled at the grid nodes inside them and at their ends."""
        trace = cls(network, {})
        for entry in document.points:
            if isinstance(entry.at, VertexAt):
                trace.add(Vertex(vertex=entry.at.vertex), entry.value)
            else:
                trace.add(network.canonical_point(entry.at.arc, entry.at.s), entry.value)
        for interval in document.intervals:
            start, end = interval.s
            if not 0.0 <= start <= end <= 1.0:
                raise NetworkDocumentError(f"trace interval {interval.s} on arc {interval.arc!r} outside [0, 1]")
            s = np.unique(np.concatenate([[start], grid[(grid > start) & (grid < end)], [end]]))
            samples = np.asarray(interval.values, dtype=float)
            knots = np.linspace(start, end, samples.size) if samples.size > 1 else None
            values = np.full(s.shape, samples[0]) if knots is None else np.interp(s, knots, samples)
            for param, value in zip(s, values):
                trace.add(network.canonical_point(interval.arc, float(param)), value)
        return trace

    def to_document(self) -> TraceDocument:
        points = []
        for point, value in self.values.items():
            at = VertexAt(vertex=point.vertex) if isinstance(point, Vertex) else ArcAt(arc=point.arc, s=point.s)
            points.append(TracePointDoc(at=at, value=value))
        return TraceDocument(points=points)

    @property
    def points(self) -> list[NetworkPoint]:
        return list(self.values)

    def sup_norm(self) -> float:
        return max((abs(v) for v in self.values.values()), default=0.0)

    def __len__(self) -> int:
        return len(self.values)


class PairViolation(BaseModel):
    kind: Literal["pair", "slope", "undefined", "negative-cycle"]
    source: Optional[NetworkPoint] = None
    target: Optional[NetworkPoint] = None
    arc: Optional[str] = None
    interval: Optional[tuple[float, float]] = None
    excess: float


class AdmissibilityReport(BaseModel):
    level: float
    tolerance: float
    max_violation: float
    worst: Optional[PairViolation] = None

    @computed_field
    @property
    def admissible(self) -> bool:
        return self.max_violation <= self.tolerance


class HopfLaxSolver:
    """u(x) = min over trace points y of g(y) + S_a(y, x) at one level.

    Level graphs are cached per set of interior trace points, so repeated
    solves on the same constraint set share one graph.
    """

    def __init__(self, network: Network, field: HamiltonianField, level: float):
        self.network = network
        self.field = field
        self.level = float(level)
        self.numerics = field.numerics
        self._graphs: dict[frozenset, LevelGraph] = {}

    def graph_for(self, points: Iterable[NetworkPoint]) -> LevelGraph:
        key = frozenset(p for p in points if isinstance(p, Interior))
        if key not in self._graphs:
            self._graphs[key] = build_level_graph(self.network, self.field, self.level, sorted(key, key=lambda p: (p.arc, p.s)))
        return self._graphs[key]

    def potential(self, trace: Trace, extra_points: Iterable[NetworkPoint] = ()) -> tuple[LevelGraph, dict[NetworkPoint, Reach]]:
        if not len(trace):
            raise EmptyTrace("the constraint set is empty")
        graph = self.graph_for([*trace.points, *extra_points])
        return graph, graph.distances_from(trace.values)

    def admissibility(self, trace: Trace, reach: dict[NetworkPoint, Reach]) -> AdmissibilityReport:
        tol = self.numerics.pair_tol * (1.0 + trace.sup_norm())
        worst, excess = None, 0.0
        for point, value in trace.values.items():
            gap = value - reach[point].value
            if gap > excess:
                excess = gap
                worst = PairViolation(kind="pair", source=reach[point].source, target=point, excess=gap)
        return AdmissibilityReport(level=self.level, tolerance=tol, max_violation=excess, worst=worst)

    def assemble(self, graph: LevelGraph, reach: dict[NetworkPoint, Reach]) -> FieldOnNetwork:
        """Transport node values along every arc in both directions and keep the minimum."""
        vertex_values = {}
        for vertex in self.network.vertices:
            found = reach.get(Vertex(vertex=vertex))
            if found is None:
                raise NoAdmissiblePath(f"vertex {vertex!r} is unreachable at level {self.level}")
            vertex_values[vertex] = found.value
        interior = defaultdict(list)
        for node in graph.multigraph.nodes:
            if isinstance(node, Interior) and node in reach:
                interior[node.arc].append((node.s, reach[node].value))

        sample = self.numerics.sample_grid()
        grids, values = {}, {}
        for arc_id, arc in self.network.arcs.items():
            positions = np.array([s for s, _ in interior[arc_id]], dtype=float)
            known = np.array([v for _, v in interior[arc_id]], dtype=float)
            nodes = np.union1d(quadrature_nodes(self.field, arc_id, self.level, 0.0, 1.0), positions)
            forward = panel_costs(self.field, arc_id, self.level, nodes, FWD)
            backward = panel_costs(self.field, arc_id, self.level, nodes, REV)
            if np.ma.getmaskarray(forward).any() or np.ma.getmaskarray(backward).any():
                raise UndefinedSigma(f"support functions undefined on arc {arc_id!r} at level {self.level}")
            F = np.concatenate([[0.0], np.cumsum(forward.data)])
            B = np.concatenate([[0.0], np.cumsum(backward.data)])
            entry = np.full(nodes.size, np.inf)
            entry[0] = vertex_values[arc.tail]
            entry[-1] = vertex_values[arc.head]
            if positions.size:
                entry[_nearest(nodes, positions)] = known
            along = np.minimum.accumulate(entry - F) + F
            against = np.minimum.accumulate((entry + B)[::-1])[::-1] - B
            u = np.minimum(along, against)
            keep = np.unique(_nearest(nodes, np.unique(np.concatenate([sample, self.field.breakpoints(arc_id, self.level), positions]))))
            grids[arc_id], values[arc_id] = nodes[keep], u[keep]
        return FieldOnNetwork(self.network, grids, values, vertex_values)

    def solve(self, trace: Trace, require_admissible: bool = True) -> FieldOnNetwork:
        graph, reach = self.potential(trace)
        if require_admissible:
            report = self.admissibility(trace, reach)
            if not report.admissible:
                raise InadmissibleTrace(
                    f"trace violates g(x) - g(y) <= S(y, x) by {report.max_violation:.3g}", report=report
                )
        return self.assemble(graph, reach)


def _check_level(field: HamiltonianField, critical: CriticalData, level: float) -> None:
    if level < critical.a0 - field.numerics.energy_tolerance(critical.a0):
        raise UndefinedSigma(f"level {level} is below a0 = {critical.a0}")


def check_admissible(
    network: Network, field: HamiltonianField, trace: Trace, critical: CriticalData, level: float | None = None
) -> AdmissibilityReport:
    """Largest g(x) - g(y) - S(y, x) over trace pairs, at level c unless given."""
    level = critical.c if level is None else level
    _check_level(field, critical, level)
    solver = HopfLaxSolver(network, field, level)
    _, reach = solver.potential(trace)
    return solver.admissibility(trace, reach)


def solve(
    network: Network,
    field: HamiltonianField,
    critical: CriticalData,
    trace: Trace,
    level: float | None = None,
    require_admissible: bool = True,
) -> FieldOnNetwork:
    """Maximal subsolution not exceeding the trace on its points.

    With an admissible trace the result agrees with it.

    Raises:
        EmptyTrace: no constraint points
        InadmissibleTrace: admissibility required and violated
        NegativeCycleDetected: level below the critical value
    """
    level = critical.c if level is None else level
    _check_level(field, critical, level)
    u = HopfLaxSolver(network, field, level).solve(trace, require_admissible)
    logger.info("Solved from {} trace points at a = {:.10g}, sup norm {:.6g}", len(trace), level, u.sup_norm())
    return u


def aubry_points(network: Network, classes: Iterable[StaticClass], grids: dict[str, np.ndarray]) -> list[NetworkPoint]:
    """Vertices and interval sample nodes (plus interval ends) of a uniqueness set."""
    points: dict[NetworkPoint, None] = {}
    for cls in classes:
        for item in cls.items:
            if isinstance(item, AubryVertex):
                points[Vertex(vertex=item.vertex)] = None
                continue
            start, end = item.interval
            grid = grids[item.arc]
            inside = grid[(grid > start) & (grid < end)]
            for s in np.unique(np.concatenate([[start], inside, [end]])):
                points[network.canonical_point(item.arc, float(s))] = None
    return list(points)


def aubry_trace(u: FieldOnNetwork, classes: Iterable[StaticClass]) -> Trace:
    """Restriction of u to the given classes."""
    points = aubry_points(u.network, classes, u.grids)
    return Trace(u.network, {p: u.value_at(p) for p in points})


class RefinementReport(BaseModel):
    """Largest slope excess per unit parameter, on a field's grid and on a finer sampling of it."""

    coarse_grid: int
    fine_grid: int
    coarse: float
    fine: float
    tolerance: float

    @computed_field
    @property
    def converging(self) -> bool:
        return bool(np.isfinite(self.coarse)) and (self.fine <= self.tolerance or self.fine <= self.coarse / 2)


class SubsolutionReport(BaseModel):
    level: float
    tolerance: float
    max_excess: float
    cell_excess: float
    pair_excess: Optional[float] = None
    pairs_checked: int
    worst: Optional[PairViolation] = None
    refinement: Optional[RefinementReport] = None

    @computed_field
    @property
    def passed(self) -> bool:
        pairs_ok = self.pair_excess is None or self.pair_excess <= self.tolerance
        cells_ok = self.cell_excess <= self.tolerance or (self.refinement is not None and self.refinement.converging)
        return pairs_ok and cells_ok


def interval_costs(field: HamiltonianField, arc_id: str, a: float, grid: np.ndarray, orientation: Orientation) -> np.ma.MaskedArray:
    """Cost of crossing each [grid[k], grid[k+1]], on the same panels the solver uses."""
    nodes = np.union1d(quadrature_nodes(field, arc_id, a, 0.0, 1.0), grid)
    costs = panel_costs(field, arc_id, a, nodes, orientation)
    starts = np.searchsorted(nodes, grid)[:-1]
    sums = np.add.reduceat(costs.filled(0.0), starts)
    undefined = np.logical_or.reduceat(np.ma.getmaskarray(costs), starts)
    return np.ma.masked_array(sums, mask=undefined)


def _cell_gaps(network: Network, field: HamiltonianField, w: FieldOnNetwork, a: float, per_unit: bool) -> tuple[float, PairViolation]:
    worst: PairViolation | None = None
    for arc_id in network.arcs:
        grid = w.grids[arc_id]
        rises = np.diff(w.values[arc_id])
        for orientation, climb in ((FWD, rises), (REV, -rises)):
            costs = interval_costs(field, arc_id, a, grid, orientation)
            mask = np.ma.getmaskarray(costs)
            if mask.any():
                k = int(np.argmax(mask))
                return np.inf, PairViolation(kind="undefined", arc=arc_id, interval=(float(grid[k]), float(grid[k + 1])), excess=np.inf)
            gaps = climb - costs.data
            if per_unit:
                gaps = gaps / np.diff(grid)
            k = int(np.argmax(gaps))
            if worst is None or gaps[k] > worst.excess:
                worst = PairViolation(kind="slope", arc=arc_id, interval=(float(grid[k]), float(grid[k + 1])), excess=float(gaps[k]))
    return worst.excess, worst


def slope_excess(network: Network, field: HamiltonianField, w: FieldOnNetwork, a: float) -> tuple[float, PairViolation]:
    """Largest (w(s2) - w(s1) - cost) / (s2 - s1) over the grid cells of w, both orientations."""
    return _cell_gaps(network, field, w, a, per_unit=True)


def check_subsolution(
    network: Network,
    field: HamiltonianField,
    w: FieldOnNetwork,
    a: float,
    pairs: int = 16,
    seed: int = 0,
    refined: FieldOnNetwork | None = None,
) -> SubsolutionReport:
    """Slope test on every grid cell plus random long-range pairs against S_a.

    With ``refined`` (the same field sampled on a finer grid) cell excesses
    above tolerance are accepted when the excess per unit parameter at least
    halves from w to ``refined``: that is quadrature error, not a violation.
    """
    tol = field.numerics.pair_tol * (1.0 + w.sup_norm())
    cell_excess, worst = _cell_gaps(network, field, w, a, per_unit=False)

    pair_excess: float | None = None
    checked = 0
    if pairs and np.isfinite(cell_excess):
        rng = np.random.default_rng(seed)
        nodes = list(w.nodes())
        chosen = [nodes[i] for i in rng.choice(len(nodes), size=min(2 * pairs, len(nodes)), replace=False)]
        graph = build_level_graph(network, field, a, [p for p, _ in chosen])
        for (y, wy), (x, wx) in zip(chosen[::2], chosen[1::2]):
            try:
                reach = graph.distances_from({y: 0.0})
            except NegativeCycleDetected:
                pair_excess = np.inf
                if worst.excess < np.inf:
                    worst = PairViolation(kind="negative-cycle", source=y, excess=np.inf)
                break
            checked += 1
            if x not in reach:
                continue
            gap = wx - wy - reach[x].value
            pair_excess = gap if pair_excess is None else max(pair_excess, gap)
            if gap > worst.excess:
                worst = PairViolation(kind="pair", source=y, target=x, excess=gap)

    refinement = None
    if refined is not None:
        coarse, _ = slope_excess(network, field, w, a)
        fine, _ = slope_excess(network, field, refined, a)
        refinement = RefinementReport(
            coarse_grid=max(g.size for g in w.grids.values()),
            fine_grid=max(g.size for g in refined.grids.values()),
            coarse=coarse,
            fine=fine,
            tolerance=tol,
        )
    return SubsolutionReport(
        level=a,
        tolerance=tol,
        max_excess=float(worst.excess),
        cell_excess=float(cell_excess),
        pair_excess=pair_excess,
        pairs_checked=checked,
        worst=worst,
        refinement=refinement,
    )


class SlopeReport(BaseModel):
    grid: int
    max_deviation: float
    worst: Optional[PairViolation] = None


def check_degenerate_slopes(network: Network, field: HamiltonianField, w: FieldOnNetwork, c: float) -> SlopeReport:
    """Largest |cell slope of w - sigma+(midpoint)| over cells inside the contact intervals at c.

    Subsolutions have sigma+ as slope there, so the deviation shrinks with
    the grid step.
    """
    worst, deviation = None, 0.0
    for arc_id in network.arcs:
        grid = w.grids[arc_id]
        for start, _, end in field.contact_intervals(arc_id, c):
            k = np.flatnonzero((grid[:-1] >= start) & (grid[1:] <= end))
            if not k.size:
                continue
            slopes = (w.values[arc_id][k + 1] - w.values[arc_id][k]) / (grid[k + 1] - grid[k])
            sigma = field.sigma_plus(arc_id, c, (grid[k] + grid[k + 1]) / 2)
            gaps = np.abs(slopes - sigma.filled(np.inf))
            j = int(np.argmax(gaps))
            if gaps[j] > deviation:
                deviation = float(gaps[j])
                worst = PairViolation(kind="slope", arc=arc_id, interval=(float(grid[k[j]]), float(grid[k[j] + 1])), excess=deviation)
    return SlopeReport(grid=max(g.size for g in w.grids.values()), max_deviation=deviation, worst=worst)


class FixedPointReport(BaseModel):
    level: float
    tolerance: float
    max_deviation: Optional[float] = None
    constraint_points: int = 0
    reason: Optional[str] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.reason is None and self.max_deviation is not None and self.max_deviation <= self.tolerance


def check_solution_fixed_point(
    network: Network,
    field: HamiltonianField,
    u: FieldOnNetwork,
    critical: CriticalData,
    aubry: AubryStructure,
    level: float | None = None,
) -> FixedPointReport:
    """Whether u equals the Hopf-Lax solve from its own uniqueness-set values.

    Raises:
        InadmissibleTrace: u restricted to the uniqueness set is not rigid
    """
    level = critical.c if level is None else float(level)
    tol = field.numerics.solution_tol * (1.0 + u.sup_norm())
    report = FixedPointReport(level=level, tolerance=tol)
    if abs(level - critical.c) <= critical.tolerance:
        classes = aubry.classes
    elif level < critical.a0 - field.numerics.energy_tolerance(critical.a0):
        report.reason = "support functions are undefined somewhere at this level"
        return report
    else:
        try:
            classes = uniqueness_set(network, field, level)
        except NegativeCycleDetected:
            report.reason = "negative cycle: no subsolution exists at this level"
            return report
        if not classes:
            report.reason = "empty uniqueness set: no solution exists at this level"
            return report

    trace = aubry_trace(u, classes)
    solver = HopfLaxSolver(network, field, level)
    graph, reach = solver.potential(trace)
    admissibility = solver.admissibility(trace, reach)
    if not admissibility.admissible:
        raise InadmissibleTrace("field is not rigid on the uniqueness set", report=admissibility)
    resolved = solver.assemble(graph, reach)
    report.constraint_points = len(trace)
    report.max_deviation = u.deviation(resolved)
    return report


class RigidityReport(BaseModel):
    tolerance: float
    max_deviation: float
    worst: Optional[PairViolation] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def check_static_class_rigidity(
    network: Network, field: HamiltonianField, w: FieldOnNetwork, aubry: AubryStructure
) -> RigidityReport:
    """|w(x) - w(y) - S_c(y, x)| on each class, y its representative."""
    tol = field.numerics.pair_tol * (1.0 + w.sup_norm())
    worst, deviation = None, 0.0
    for cls in aubry.classes:
        points = aubry_points(network, [cls], w.grids)
        rep = cls.representative
        graph = build_level_graph(network, field, aubry.c, [rep, *points])
        ahead = graph.distances_from({rep: 0.0})
        for x in points:
            if x not in ahead:
                continue
            gap = abs(w.value_at(x) - w.value_at(rep) - ahead[x].value)
            if gap > deviation:
                deviation = gap
                worst = PairViolation(kind="pair", source=rep, target=x, excess=gap)
    return RigidityReport(tolerance=tol, max_deviation=deviation, worst=worst)


def random_restriction(
    solver: HopfLaxSolver, rng: np.random.Generator, points: list[NetworkPoint], candidates: list[NetworkPoint], sources: int = 3, scale: float = 1.0
) -> Trace:
    """Values on ``points`` of min over random y of r(y) + S(y, .), an admissible trace."""
    chosen = rng.choice(len(candidates), size=min(sources, len(candidates)), replace=False)
    seeds = Trace(solver.network, {candidates[i]: rng.uniform(-scale, scale) for i in chosen})
    _, reach = solver.potential(seeds, points)
    return Trace(solver.network, {p: reach[p].value for p in points})


def random_subsolution(
    network: Network, field: HamiltonianField, level: float, rng: np.random.Generator, sources: int = 3, scale: float = 1.0
) -> FieldOnNetwork:
    """A subsolution at ``level``: min over random points y of r(y) + S(y, .)."""
    solver = HopfLaxSolver(network, field, level)
    candidates = [Vertex(vertex=v) for v in network.vertices]
    grid = field.numerics.sample_grid()
    for arc_id in network.arcs:
        candidates += [Interior(arc=arc_id, s=float(s)) for s in rng.choice(grid[1:-1], size=2, replace=False)]
    chosen = rng.choice(len(candidates), size=min(sources, len(candidates)), replace=False)
    seeds = Trace(network, {candidates[i]: rng.uniform(-scale, scale) for i in chosen})
    return solver.solve(seeds, require_admissible=False)


class ComparisonReport(BaseModel):
    level: float
    supercritical: bool
    trials: int
    constraint_points: int
    tolerance: float
    violations: int
    min_gap: float
    worst_point: Optional[NetworkPoint] = None

    @computed_field
    @property
    def passed(self) -> bool:
        return self.violations == 0


def comparison_harness(
    network: Network,
    field: HamiltonianField,
    critical: CriticalData,
    aubry: AubryStructure,
    trials: int,
    level: float | None = None,
    extra_vertices: Iterable[str] = (),
    random_vertex: bool = False,
    seed: int = 0,
    workers: int = 1,
    raise_on_violation: bool = False,
) -> ComparisonReport:
    """Subsolution w and supersolution v with v >= w on the constraint set: v >= w everywhere?

    At the critical level the constraint set holds the Aubry set; above it
    any nonempty set will do.
    """
    level = critical.c if level is None else float(level)
    supercritical = level > critical.c + critical.tolerance
    base: list[NetworkPoint] = [] if supercritical else aubry_points(network, aubry.classes, {a: field.numerics.sample_grid() for a in network.arcs})
    base += [Vertex(vertex=v) for v in extra_vertices]
    vertices = [Vertex(vertex=v) for v in network.vertices]
    solver = HopfLaxSolver(network, field, level)
    solver.graph_for(base)
    tol = field.numerics.solution_tol

    def trial(index: int) -> tuple[float, NetworkPoint | None, int]:
        rng = np.random.default_rng([seed, index])
        constraint = list(dict.fromkeys(base))
        if random_vertex or not constraint:
            extra = vertices[int(rng.integers(len(vertices)))]
            if extra not in constraint:
                constraint.append(extra)
        candidates = list(dict.fromkeys([*constraint, *vertices]))
        w = solver.solve(random_restriction(solver, rng, constraint, candidates))
        v1 = solver.solve(random_restriction(solver, rng, constraint, candidates))
        v2 = solver.solve(random_restriction(solver, rng, constraint, candidates))
        v = v1.minimum(v2)
        lift = max(w.value_at(p) - v.value_at(p) for p in constraint)
        gap_field = v.shifted(lift) - w
        gap, where = np.inf, None
        for point, value in gap_field.nodes():
            if value < gap:
                gap, where = value, point
        return gap, where, len(constraint)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(trial, range(trials)))
    else:
        results = [trial(i) for i in range(trials)]

    threshold = -tol * (1.0 + max(1.0, abs(level)))
    violations = sum(gap < threshold for gap, _, _ in results)
    min_gap, worst_point, size = min(results, key=lambda r: r[0]) if results else (np.inf, None, len(base))
    report = ComparisonReport(
        level=level,
        supercritical=supercritical,
        trials=trials,
        constraint_points=size,
        tolerance=-threshold,
        violations=violations,
        min_gap=float(min_gap),
        worst_point=worst_point,
    )
    logger.info("Comparison at a = {:.10g}: {} trials, {} violations, min gap {:.3g}", level, trials, violations, min_gap)
    if violations and raise_on_violation:
        raise ComparisonViolation(f"v < w by {-min_gap:.3g} at {worst_point}", witness=worst_point)
    return report
