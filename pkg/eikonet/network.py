"""Embedded networks: vertices in R^N joined by regular simple arcs on [0, 1]."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from itertools import combinations
from pathlib import Path
from typing import Iterable, Union

import networkx as nx
import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict

from eikonet.errors import (
    Disconnected,
    EndpointMismatch,
    NetworkDocumentError,
    NonRegularArc,
    OverlapViolation,
    ParameterOutOfRange,
    UnknownArc,
)
from eikonet.schemas import (
    CircularArcGeometryDoc,
    NetworkDocument,
    SamplesGeometryDoc,
    SegmentGeometryDoc,
    parse_document,
    read_document,
)

MIN_SAMPLES = 33
POLYLINE_SAMPLES = 65


class Orientation(str, Enum):
    FWD = "fwd"
    REV = "rev"

    @property
    def flipped(self) -> "Orientation":
        return Orientation.REV if self is Orientation.FWD else Orientation.FWD


class Vertex(BaseModel):
    model_config = ConfigDict(frozen=True)

    vertex: str

    def __str__(self) -> str:
        return f"v:{self.vertex}"


class Interior(BaseModel):
    """Interior point of an arc, always in the arc's preferred orientation."""

    model_config = ConfigDict(frozen=True)

    arc: str
    s: float

    def __str__(self) -> str:
        return f"{self.arc}@{self.s!r}"


NetworkPoint = Union[Vertex, Interior]


class ArcGeometry(ABC):
    """Parametrized curve on [0, 1] with derivative and exact arclength."""

    @abstractmethod
    def position(self, s) -> np.ndarray:
        """Points gamma(s), shape (len(s), N)."""

    @abstractmethod
    def velocity(self, s) -> np.ndarray:
        """Derivatives gamma'(s), shape (len(s), N)."""

    @abstractmethod
    def arclength(self, s) -> np.ndarray:
        """Length of gamma restricted to [0, s]."""

    def speed(self, s) -> np.ndarray:
        return np.linalg.norm(self.velocity(s), axis=-1)

    def polyline(self) -> np.ndarray:
        return self.position(np.linspace(0.0, 1.0, POLYLINE_SAMPLES))

    def regularity_samples(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, POLYLINE_SAMPLES)


class SegmentGeometry(ArcGeometry):
    def __init__(self, start: np.ndarray, end: np.ndarray):
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        self.delta = self.end - self.start
        self.length = float(np.linalg.norm(self.delta))

    def position(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return self.start + s[:, None] * self.delta

    def velocity(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.broadcast_to(self.delta, (s.size, self.delta.size)).copy()

    def arclength(self, s) -> np.ndarray:
        return self.length * np.asarray(s, dtype=float)


class SampledGeometry(ArcGeometry):
    """Linear interpolation of samples placed at uniform parameter values."""

    def __init__(self, points: np.ndarray):
        self.points = np.asarray(points, dtype=float)
        self.knots = np.linspace(0.0, 1.0, len(self.points))
        steps = np.linalg.norm(np.diff(self.points, axis=0), axis=1)
        self.steps = steps
        self.cumulative = np.concatenate([[0.0], np.cumsum(steps)])

    def position(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        return np.column_stack([np.interp(s, self.knots, self.points[:, j]) for j in range(self.points.shape[1])])

    def velocity(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        n = len(self.points) - 1
        k = np.clip(np.floor(s * n).astype(int), 0, n - 1)
        return (self.points[k + 1] - self.points[k]) * n

    def arclength(self, s) -> np.ndarray:
        return np.interp(s, self.knots, self.cumulative)

    def polyline(self) -> np.ndarray:
        return self.points

    def regularity_samples(self) -> np.ndarray:
        return (self.knots[:-1] + self.knots[1:]) / 2


class CircularArcGeometry(ArcGeometry):
    def __init__(self, center, radius: float, start_angle: float, sweep: float, u, v):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.start_angle = float(start_angle)
        self.sweep = float(sweep)
        self.u = np.asarray(u, dtype=float)
        self.v = np.asarray(v, dtype=float)

    def _angle(self, s) -> np.ndarray:
        return self.start_angle + self.sweep * np.atleast_1d(np.asarray(s, dtype=float))

    def position(self, s) -> np.ndarray:
        t = self._angle(s)[:, None]
        return self.center + self.radius * (np.cos(t) * self.u + np.sin(t) * self.v)

    def velocity(self, s) -> np.ndarray:
        t = self._angle(s)[:, None]
        return self.radius * self.sweep * (-np.sin(t) * self.u + np.cos(t) * self.v)

    def arclength(self, s) -> np.ndarray:
        return self.radius * abs(self.sweep) * np.asarray(s, dtype=float)


@dataclass(frozen=True)
class Arc:
    id: str
    tail: str
    head: str
    geometry: ArcGeometry

    @property
    def is_loop(self) -> bool:
        return self.tail == self.head

    @property
    def length(self) -> float:
        return float(self.geometry.arclength(1.0))

    def length_between(self, s1: float, s2: float) -> float:
        return float(self.geometry.arclength(s2) - self.geometry.arclength(s1))


@dataclass(frozen=True)
class Piece:
    """Sub-arc [s0, s1] (preferred parameter) between two split-graph nodes."""

    arc: str
    s0: float
    s1: float
    start: NetworkPoint
    end: NetworkPoint


class Network:
    """Immutable embedded network with incidence tables and canonical points."""

    def __init__(self, vertices: dict[str, np.ndarray], arcs: dict[str, Arc], tolerance: float):
        self.vertices = vertices
        self.arcs = arcs
        self.tolerance = tolerance
        self._incidence: dict[str, list[tuple[str, Orientation]]] = {v: [] for v in vertices}
        for arc in arcs.values():
            self._incidence[arc.head].append((arc.id, Orientation.FWD))
            self._incidence[arc.tail].append((arc.id, Orientation.REV))

    @property
    def dimension(self) -> int:
        return len(next(iter(self.vertices.values())))

    @property
    def arc_count(self) -> int:
        return len(self.arcs)

    def arc(self, arc_id: str) -> Arc:
        try:
            return self.arcs[arc_id]
        except KeyError:
            raise UnknownArc(f"unknown arc {arc_id!r}") from None

    def endpoints(self, arc_id: str, orientation: Orientation = Orientation.FWD) -> tuple[str, str]:
        arc = self.arc(arc_id)
        if orientation is Orientation.FWD:
            return arc.tail, arc.head
        return arc.head, arc.tail

    def incidence(self, vertex: str) -> list[tuple[str, Orientation]]:
        """Oriented arcs ending at ``vertex``."""
        if vertex not in self._incidence:
            raise NetworkDocumentError(f"unknown vertex {vertex!r}")
        return list(self._incidence[vertex])

    def canonical_point(self, arc_id: str, s: float, orientation: Orientation = Orientation.FWD) -> NetworkPoint:
        arc = self.arc(arc_id)
        s = float(s)
        if not 0.0 <= s <= 1.0:
            raise ParameterOutOfRange(f"parameter {s} outside [0, 1] on arc {arc_id!r}")
        if orientation is Orientation.REV:
            s = 1.0 - s
        if s == 0.0:
            return Vertex(vertex=arc.tail)
        if s == 1.0:
            return Vertex(vertex=arc.head)
        return Interior(arc=arc_id, s=s)

    def check_point(self, point: NetworkPoint) -> NetworkPoint:
        if isinstance(point, Vertex):
            if point.vertex not in self.vertices:
                raise NetworkDocumentError(f"unknown vertex {point.vertex!r}")
            return point
        return self.canonical_point(point.arc, point.s)

    def parse_point(self, text: str) -> NetworkPoint:
        """Read ``v:ID``, ``ARC@s`` or ``~ARC@s`` (s along the reversed arc)."""
        text = text.strip()
        if text.startswith("v:"):
            return self.check_point(Vertex(vertex=text[2:]))
        orientation = Orientation.FWD
        if text.startswith("~"):
            orientation, text = Orientation.REV, text[1:]
        arc_id, sep, s = text.rpartition("@")
        if not sep:
            raise NetworkDocumentError(f"cannot parse point {text!r}")
        try:
            value = float(s)
        except ValueError:
            raise NetworkDocumentError(f"cannot parse parameter in {text!r}") from None
        return self.canonical_point(arc_id, value, orientation)

    def coordinates(self, point: NetworkPoint) -> np.ndarray:
        if isinstance(point, Vertex):
            return self.vertices[point.vertex]
        return self.arc(point.arc).geometry.position([point.s])[0]

    def split_pieces(self, extra_points: Iterable[NetworkPoint] = ()) -> list[Piece]:
        """Arcs cut at the interior extra points, in document order."""
        cuts: dict[str, set[float]] = {arc_id: set() for arc_id in self.arcs}
        for point in extra_points:
            point = self.check_point(point)
            if isinstance(point, Interior):
                cuts[point.arc].add(point.s)
        pieces = []
        for arc_id, arc in self.arcs.items():
            params = [0.0, *sorted(cuts[arc_id]), 1.0]
            for s0, s1 in zip(params[:-1], params[1:]):
                pieces.append(Piece(arc_id, s0, s1, self.canonical_point(arc_id, s0), self.canonical_point(arc_id, s1)))
        return pieces

    def geodesic_distance(self, x: NetworkPoint, y: NetworkPoint) -> float:
        x, y = self.check_point(x), self.check_point(y)
        if x == y:
            return 0.0
        graph = nx.MultiGraph()
        graph.add_nodes_from([x, y])
        for piece in self.split_pieces([x, y]):
            if piece.start != piece.end:
                length = self.arcs[piece.arc].length_between(piece.s0, piece.s1)
                graph.add_edge(piece.start, piece.end, weight=length)
        return float(nx.dijkstra_path_length(graph, x, y, weight="weight"))

    @property
    def diameter(self) -> float:
        points = np.vstack([arc.geometry.polyline() for arc in self.arcs.values()])
        return float(np.linalg.norm(np.ptp(points, axis=0)))


def geodesic_distance(network: Network, x: NetworkPoint, y: NetworkPoint) -> float:
    return network.geodesic_distance(x, y)


def canonical_point(network: Network, arc_id: str, s: float, orientation: Orientation = Orientation.FWD) -> NetworkPoint:
    return network.canonical_point(arc_id, s, orientation)


def _segment_distances(p0: np.ndarray, p1: np.ndarray, q0: np.ndarray, q1: np.ndarray) -> np.ndarray:
    """Pairwise minimum distances between segments [p0, p1] and [q0, q1]."""
    d1 = (p1 - p0)[:, None, :]
    d2 = (q1 - q0)[None, :, :]
    r = p0[:, None, :] - q0[None, :, :]
    a = np.sum(d1 * d1, axis=-1)
    e = np.sum(d2 * d2, axis=-1)
    b = np.sum(d1 * d2, axis=-1)
    c = np.sum(d1 * r, axis=-1)
    f = np.sum(d2 * r, axis=-1)
    a, e = np.broadcast_to(a, b.shape), np.broadcast_to(e, b.shape)
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-14 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        low, high = t < 0.0, t > 1.0
        s = np.where(low, np.clip(-c / a, 0.0, 1.0), np.where(high, np.clip((b - c) / a, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    closest_p = p0[:, None, :] + s[..., None] * d1
    closest_q = q0[None, :, :] + t[..., None] * d2
    return np.linalg.norm(closest_p - closest_q, axis=-1)


def _point_distances(x: np.ndarray, p0: np.ndarray, p1: np.ndarray) -> np.ndarray:
    d = p1 - p0
    t = np.clip(np.sum((x - p0) * d, axis=1) / np.sum(d * d, axis=1), 0.0, 1.0)
    return np.linalg.norm(p0 + t[:, None] * d - x, axis=1)


def _build_geometry(doc, arc_id: str, start: np.ndarray, end: np.ndarray, tol: float) -> ArcGeometry:
    if isinstance(doc, SegmentGeometryDoc):
        return SegmentGeometry(start, end)
    if isinstance(doc, SamplesGeometryDoc):
        points = np.asarray(doc.points, dtype=float)
        if len(points) < MIN_SAMPLES:
            raise NetworkDocumentError(f"arc {arc_id!r}: sampled geometry needs at least {MIN_SAMPLES} points")
        if points.shape[1] != start.size:
            raise NetworkDocumentError(f"arc {arc_id!r}: sample dimension differs from vertex coordinates")
        geometry: ArcGeometry = SampledGeometry(points)
    elif isinstance(doc, CircularArcGeometryDoc):
        if start.size < 2:
            raise NetworkDocumentError(f"arc {arc_id!r}: circular arcs need at least two coordinates")
        if len(doc.center) != start.size:
            raise NetworkDocumentError(f"arc {arc_id!r}: center dimension differs from vertex coordinates")
        if doc.plane is None:
            u, v = np.eye(start.size)[0], np.eye(start.size)[1]
        else:
            u, v = (np.asarray(w, dtype=float) for w in doc.plane)
            gram = np.array([[u @ u, u @ v], [v @ u, v @ v]])
            if u.size != start.size or v.size != start.size or not np.allclose(gram, np.eye(2), atol=1e-12):
                raise NetworkDocumentError(f"arc {arc_id!r}: plane must be an orthonormal pair in R^{start.size}")
        geometry = CircularArcGeometry(doc.center, doc.radius, doc.start_angle, doc.sweep, u, v)
    else:
        raise NetworkDocumentError(f"arc {arc_id!r}: unsupported geometry")
    ends = geometry.position([0.0, 1.0])
    if np.linalg.norm(ends[0] - start) > tol or np.linalg.norm(ends[1] - end) > tol:
        raise EndpointMismatch(f"arc {arc_id!r}: geometry endpoints do not match its vertices")
    return geometry


def _check_overlaps(arcs: dict[str, Arc], vertices: dict[str, np.ndarray], tol: float) -> None:
    polylines = {arc_id: arc.geometry.polyline() for arc_id, arc in arcs.items()}

    def touching(arc: Arc, n_segments: int) -> dict[str, list[int]]:
        rows: dict[str, list[int]] = {arc.tail: [0]}
        rows.setdefault(arc.head, []).append(n_segments - 1)
        return rows

    for arc_id, arc in arcs.items():
        poly = polylines[arc_id]
        n = len(poly) - 1
        dist = _segment_distances(poly[:-1], poly[1:], poly[:-1], poly[1:])
        i, j = np.triu_indices(n, k=2)
        close = dist[i, j] <= tol
        if arc.is_loop:
            close &= ~((i == 0) & (j == n - 1))
        if np.any(close):
            raise OverlapViolation(f"arc {arc_id!r} is not simple")
        for vertex, coords in vertices.items():
            if vertex in (arc.tail, arc.head):
                continue
            if np.min(_point_distances(coords, poly[:-1], poly[1:])) <= tol:
                raise OverlapViolation(f"vertex {vertex!r} lies on arc {arc_id!r}")

    for first, second in combinations(arcs.values(), 2):
        p, q = polylines[first.id], polylines[second.id]
        dist = _segment_distances(p[:-1], p[1:], q[:-1], q[1:])
        rows, cols = touching(first, len(p) - 1), touching(second, len(q) - 1)
        for vertex in rows.keys() & cols.keys():
            dist[np.ix_(rows[vertex], cols[vertex])] = np.inf
        if np.min(dist) <= tol:
            raise OverlapViolation(f"arcs {first.id!r} and {second.id!r} meet away from a shared vertex")


def build_network(document: NetworkDocument | dict) -> Network:
    """Assemble a network and verify its standing assumptions.

    Raises:
        NetworkDocumentError: malformed document or unknown vertex
        NonRegularArc: vanishing derivative on some arc
        EndpointMismatch: geometry does not start/end at its vertices
        OverlapViolation: arcs meet outside shared endpoints or self-intersect
        Disconnected: some vertex cannot be reached
    """
    if not isinstance(document, NetworkDocument):
        document = parse_document(document, NetworkDocument)

    vertices: dict[str, np.ndarray] = {}
    for vertex in document.vertices:
        if vertex.id in vertices:
            raise NetworkDocumentError(f"duplicate vertex {vertex.id!r}")
        vertices[vertex.id] = np.asarray(vertex.coords, dtype=float)
    if len({v.size for v in vertices.values()}) != 1:
        raise NetworkDocumentError("vertices have coordinates of different dimensions")

    extent = np.linalg.norm(np.ptp(np.vstack(list(vertices.values())), axis=0))
    coarse_tol = 1e-9 * max(extent, 1.0)

    arcs: dict[str, Arc] = {}
    for doc in document.arcs:
        if doc.id in arcs:
            raise NetworkDocumentError(f"duplicate arc {doc.id!r}")
        for end in (doc.tail, doc.head):
            if end not in vertices:
                raise NetworkDocumentError(f"arc {doc.id!r} references unknown vertex {end!r}")
        if doc.tail == doc.head and isinstance(doc.geometry, SegmentGeometryDoc):
            raise NonRegularArc(f"arc {doc.id!r}: a segment cannot close a loop")
        geometry = _build_geometry(doc.geometry, doc.id, vertices[doc.tail], vertices[doc.head], coarse_tol)
        if np.min(geometry.speed(geometry.regularity_samples())) <= 1e-12 * max(extent, 1.0):
            raise NonRegularArc(f"arc {doc.id!r} has a vanishing derivative")
        arcs[doc.id] = Arc(doc.id, doc.tail, doc.head, geometry)

    used = {arc.tail for arc in arcs.values()} | {arc.head for arc in arcs.values()}
    if set(vertices) != used:
        raise NetworkDocumentError(f"vertices {sorted(set(vertices) - used)} are not arc endpoints")

    network = Network(vertices, arcs, tolerance=0.0)
    network.tolerance = 1e-9 * network.diameter
    _check_overlaps(arcs, vertices, network.tolerance)

    graph = nx.MultiGraph()
    graph.add_nodes_from(vertices)
    graph.add_edges_from((arc.tail, arc.head) for arc in arcs.values())
    if not nx.is_connected(graph):
        raise Disconnected("network is not connected")

    logger.debug("Built network: {} vertices, {} arcs, diameter {:.4g}", len(vertices), len(arcs), network.diameter)
    return network


def load_network(path: str | Path) -> tuple[Network, NetworkDocument]:
    document = read_document(path, NetworkDocument)
    return build_network(document), document
