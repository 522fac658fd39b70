from pathlib import Path

import numpy as np
import pytest

from eikonet.config import DEFAULT_NUMERICS, Numerics
from eikonet.critical_aubry import aubry_set, critical_value
from eikonet.instance import Instance, load_instance

DATA = Path(__file__).resolve().parent.parent / "data"


def poly(*coeffs: float) -> dict:
    return {"kind": "poly", "coeffs": list(coeffs) or [0.0]}


def power(p: float = 1.0, b=(0.0,), V=(0.0,)) -> dict:
    """|mu - b(s)|**p - V(s) with polynomial coefficients (ascending powers)."""
    return {"family": "power", "p": p, "b": poly(*b), "V": poly(*V)}


def segment_instance(hamiltonian: dict, length: float = 1.0, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    return Instance.from_document(
        {
            "vertices": [{"id": "a", "coords": [0.0, 0.0]}, {"id": "b", "coords": [length, 0.0]}],
            "arcs": [{"id": "e", "from": "a", "to": "b", "hamiltonian": hamiltonian}],
        },
        numerics,
    )


def triangle_instance(hamiltonians, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    """Right triangle (0,0), (1,0), (0,1) with arcs ab, bc, ca."""
    if isinstance(hamiltonians, dict):
        hamiltonians = [hamiltonians] * 3
    ends = [("ab", "a", "b"), ("bc", "b", "c"), ("ca", "c", "a")]
    return Instance.from_document(
        {
            "vertices": [
                {"id": "a", "coords": [0.0, 0.0]},
                {"id": "b", "coords": [1.0, 0.0]},
                {"id": "c", "coords": [0.0, 1.0]},
            ],
            "arcs": [
                {"id": arc_id, "from": tail, "to": head, "hamiltonian": h}
                for (arc_id, tail, head), h in zip(ends, hamiltonians)
            ],
        },
        numerics,
    )


def loop_instance(hamiltonian: dict, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    """Unit-length circle through its single vertex."""
    r = 1.0 / (2 * np.pi)
    return Instance.from_document(
        {
            "vertices": [{"id": "v", "coords": [r, 0.0]}],
            "arcs": [
                {
                    "id": "loop",
                    "from": "v",
                    "to": "v",
                    "geometry": {"kind": "circular-arc", "center": [0.0, 0.0], "radius": r, "start_angle": 0.0, "sweep": 2 * np.pi},
                    "hamiltonian": hamiltonian,
                }
            ],
        },
        numerics,
    )


def lollipop_instance(loop_hamiltonian: dict, tail_hamiltonian: dict, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    """Unit-length circle through v plus a unit segment from v out to w."""
    r = 1.0 / (2 * np.pi)
    return Instance.from_document(
        {
            "vertices": [{"id": "v", "coords": [r, 0.0]}, {"id": "w", "coords": [r + 1.0, 0.0]}],
            "arcs": [
                {
                    "id": "loop",
                    "from": "v",
                    "to": "v",
                    "geometry": {"kind": "circular-arc", "center": [0.0, 0.0], "radius": r, "start_angle": 0.0, "sweep": 2 * np.pi},
                    "hamiltonian": loop_hamiltonian,
                },
                {"id": "tail", "from": "v", "to": "w", "hamiltonian": tail_hamiltonian},
            ],
        },
        numerics,
    )


@pytest.fixture(scope="session")
def loop():
    return load_instance(DATA / "loop.json")


@pytest.fixture(scope="session")
def well():
    return load_instance(DATA / "well.json")


@pytest.fixture(scope="session")
def triangle():
    return load_instance(DATA / "triangle.json")


@pytest.fixture(scope="session")
def loop_critical(loop):
    return critical_value(loop.network, loop.field)


@pytest.fixture(scope="session")
def well_critical(well):
    return critical_value(well.network, well.field)


@pytest.fixture(scope="session")
def triangle_critical(triangle):
    return critical_value(triangle.network, triangle.field)


@pytest.fixture(scope="session")
def loop_aubry(loop, loop_critical):
    return aubry_set(loop.network, loop.field, loop_critical)


@pytest.fixture(scope="session")
def well_aubry(well, well_critical):
    return aubry_set(well.network, well.field, well_critical)


@pytest.fixture(scope="session")
def triangle_aubry(triangle, triangle_critical):
    return aubry_set(triangle.network, triangle.field, triangle_critical)
