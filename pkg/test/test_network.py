import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA, power
from eikonet.errors import (
    Disconnected,
    EndpointMismatch,
    NetworkDocumentError,
    NonRegularArc,
    OverlapViolation,
    ParameterOutOfRange,
    UnknownArc,
)
from eikonet.network import Interior, Orientation, Vertex, build_network, load_network


def segment_doc(*arcs, vertices=None):
    vertices = vertices or {"a": [0.0, 0.0], "b": [1.0, 0.0]}
    return {
        "vertices": [{"id": k, "coords": v} for k, v in vertices.items()],
        "arcs": [{"id": arc_id, "from": tail, "to": head, **extra} for arc_id, tail, head, extra in arcs],
    }


@pytest.fixture(scope="module")
def triangle_net():
    network, _ = load_network(DATA / "triangle.json")
    return network


def test_single_segment_is_valid():
    network = build_network(segment_doc(("e", "a", "b", {})))
    assert len(network.vertices) == 2
    assert network.arc_count == 1
    assert network.dimension == 2
    assert network.arc("e").length == pytest.approx(1.0)


def test_triangle_incidence(triangle_net):
    assert set(triangle_net.incidence("a")) == {("ca", Orientation.FWD), ("ab", Orientation.REV)}
    assert triangle_net.endpoints("bc", Orientation.REV) == ("c", "b")


def test_crossing_arcs_rejected():
    doc = segment_doc(
        ("d1", "p", "q", {}),
        ("d2", "r", "t", {}),
        vertices={"p": [0.0, 0.0], "q": [1.0, 1.0], "r": [1.0, 0.0], "t": [0.0, 1.0]},
    )
    with pytest.raises(OverlapViolation):
        build_network(doc)


def test_vertex_on_arc_rejected():
    doc = segment_doc(
        ("e", "a", "b", {}),
        ("f", "m", "a", {}),
        vertices={"a": [0.0, 0.0], "b": [2.0, 0.0], "m": [1.0, 0.0]},
    )
    with pytest.raises(OverlapViolation):
        build_network(doc)


def test_disconnected_rejected():
    doc = segment_doc(
        ("e", "a", "b", {}),
        ("f", "c", "d", {}),
        vertices={"a": [0.0, 0.0], "b": [1.0, 0.0], "c": [0.0, 1.0], "d": [1.0, 1.0]},
    )
    with pytest.raises(Disconnected):
        build_network(doc)


def test_segment_loop_is_not_regular():
    with pytest.raises(NonRegularArc):
        build_network(segment_doc(("e", "a", "a", {}), ("f", "a", "b", {})))


def test_circular_arc_must_end_at_its_vertices():
    geometry = {"kind": "circular-arc", "center": [0.5, 0.1], "radius": 0.5, "start_angle": np.pi, "sweep": -np.pi}
    with pytest.raises(EndpointMismatch):
        build_network(segment_doc(("e", "a", "b", {"geometry": geometry})))


def test_circular_loop_has_unit_length():
    network, document = load_network(DATA / "loop.json")
    loop = network.arc("loop")
    assert loop.is_loop
    assert loop.length == pytest.approx(1.0, abs=1e-12)
    assert document.arcs[0].tail == "v"


def test_sampled_geometry_needs_enough_points():
    points = [[s, 0.0] for s in np.linspace(0.0, 1.0, 10)]
    with pytest.raises(NetworkDocumentError):
        build_network(segment_doc(("e", "a", "b", {"geometry": {"kind": "samples", "points": points}})))


def test_sampled_geometry_arclength():
    s = np.linspace(0.0, 1.0, 65)
    points = np.column_stack([s, s * (1 - s)]).tolist()
    network = build_network(segment_doc(("e", "a", "b", {"geometry": {"kind": "samples", "points": points}})))
    expected = np.sum(np.linalg.norm(np.diff(np.asarray(points), axis=0), axis=1))
    assert network.arc("e").length == pytest.approx(expected)


def test_unknown_vertex_in_arc():
    with pytest.raises(NetworkDocumentError):
        build_network(segment_doc(("e", "a", "z", {})))


def test_canonical_points(triangle_net):
    assert triangle_net.canonical_point("ab", 0.0) == Vertex(vertex="a")
    assert triangle_net.canonical_point("ab", 1.0, Orientation.REV) == Vertex(vertex="a")
    assert triangle_net.canonical_point("ab", 0.3, Orientation.REV) == Interior(arc="ab", s=0.7)
    assert triangle_net.canonical_point("ab", 0.5) == Interior(arc="ab", s=0.5)
    with pytest.raises(ParameterOutOfRange):
        triangle_net.canonical_point("ab", 1.2)
    with pytest.raises(UnknownArc):
        triangle_net.canonical_point("zz", 0.5)


def test_parse_point(triangle_net):
    assert triangle_net.parse_point("v:b") == Vertex(vertex="b")
    assert triangle_net.parse_point("bc@0.25") == Interior(arc="bc", s=0.25)
    assert triangle_net.parse_point("~bc@0.25") == Interior(arc="bc", s=0.75)
    assert triangle_net.parse_point("~bc@1") == Vertex(vertex="b")
    with pytest.raises(NetworkDocumentError):
        triangle_net.parse_point("bc")


def test_geodesic_distance_examples(triangle_net):
    segment = build_network(segment_doc(("e", "a", "b", {})))
    assert segment.geodesic_distance(Vertex(vertex="a"), Vertex(vertex="b")) == pytest.approx(1.0)
    point = Interior(arc="ab", s=0.4)
    assert triangle_net.geodesic_distance(point, point) == 0.0

    equilateral = build_network(
        segment_doc(
            ("ab", "a", "b", {}),
            ("bc", "b", "c", {}),
            ("ca", "c", "a", {}),
            vertices={"a": [0.0, 0.0], "b": [1.0, 0.0], "c": [0.5, np.sqrt(3) / 2]},
        )
    )
    assert equilateral.geodesic_distance(Vertex(vertex="a"), Vertex(vertex="c")) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(
    st.sampled_from(["ab", "bc", "ca"]),
    st.floats(0.0, 1.0),
    st.sampled_from(["ab", "bc", "ca"]),
    st.floats(0.0, 1.0),
)
def test_geodesic_dominates_euclidean(arc_x, s_x, arc_y, s_y):
    network, _ = load_network(DATA / "triangle.json")
    x, y = network.canonical_point(arc_x, s_x), network.canonical_point(arc_y, s_y)
    euclid = np.linalg.norm(network.coordinates(x) - network.coordinates(y))
    assert network.geodesic_distance(x, y) >= euclid - 1e-12


def test_split_pieces_in_document_order(triangle_net):
    pieces = triangle_net.split_pieces([Interior(arc="bc", s=0.5), Vertex(vertex="a")])
    assert [(p.arc, p.s0, p.s1) for p in pieces] == [
        ("ab", 0.0, 1.0),
        ("bc", 0.0, 0.5),
        ("bc", 0.5, 1.0),
        ("ca", 0.0, 1.0),
    ]


def test_hamiltonian_section_is_optional_for_geometry():
    network = build_network(segment_doc(("e", "a", "b", {"hamiltonian": power()})))
    assert network.tolerance == pytest.approx(1e-9)
