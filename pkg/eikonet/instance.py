"""Loaded instances (network + Hamiltonian field) and the random instance generator."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from eikonet.config import DEFAULT_NUMERICS, Numerics
from eikonet.hamiltonian import HamiltonianField, build_field
from eikonet.network import Network, build_network
from eikonet.schemas import NetworkDocument, parse_document, read_document

P_CHOICES = (1.0, 1.5, 2.0, 3.0)
MAX_ARCS = 9
LOOP_RADIUS = 0.1


@dataclass
class Instance:
    network: Network
    document: NetworkDocument
    field: HamiltonianField

    @classmethod
    def from_document(cls, document: NetworkDocument | dict, numerics: Numerics = DEFAULT_NUMERICS) -> "Instance":
        if not isinstance(document, NetworkDocument):
            document = parse_document(document, NetworkDocument)
        network = build_network(document)
        return cls(network, document, build_field(network, document, numerics))


def load_instance(path: str | Path, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    return Instance.from_document(read_document(path, NetworkDocument), numerics)


def _poly(rng: np.random.Generator, scale: float = 1.0) -> dict:
    degree = int(rng.integers(0, 3))
    return {"kind": "poly", "coeffs": rng.uniform(-scale, scale, degree + 1).round(6).tolist()}


def _power_field(rng: np.random.Generator) -> dict:
    return {"family": "power", "p": float(rng.choice(P_CHOICES)), "b": _poly(rng), "V": _poly(rng)}


def _bulge(p: np.ndarray, q: np.ndarray, side: np.ndarray, sagitta: float) -> dict:
    """Minor circular arc from p to q bulging ``sagitta`` towards ``side``."""
    middle, half = (p + q) / 2, np.linalg.norm(q - p) / 2
    radius = (half**2 + sagitta**2) / (2 * sagitta)
    center = middle + side * (sagitta - radius)
    start = np.arctan2(*(p - center)[::-1])
    end = np.arctan2(*(q - center)[::-1])
    sweep = (end - start + np.pi) % (2 * np.pi) - np.pi
    return {
        "kind": "circular-arc",
        "center": center.tolist(),
        "radius": float(radius),
        "start_angle": float(start),
        "sweep": float(sweep),
    }


def _loop(v: np.ndarray) -> dict:
    return {
        "kind": "circular-arc",
        "center": (v * (1.0 + LOOP_RADIUS)).tolist(),
        "radius": LOOP_RADIUS,
        "start_angle": float(np.arctan2(-v[1], -v[0])),
        "sweep": float(2 * np.pi),
    }


def random_document(rng: np.random.Generator) -> NetworkDocument:
    """Planar network with 2 to 6 vertices on the unit circle and at most nine arcs.

    Ring segments keep it connected; fan chords from the first vertex,
    bulging arcs over ring edges and small loops outside the circle are
    added at random. None of them cross.
    """
    n = int(rng.integers(2, 7))
    angles = np.array([0.0, 2 * np.pi / 3]) if n == 2 else 2 * np.pi * np.arange(n) / n
    points = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    vertices = [{"id": f"v{i}", "coords": points[i].tolist()} for i in range(n)]

    ring = [(i, (i + 1) % n) for i in range(n if n > 2 else 1)]
    arcs = [{"from": f"v{i}", "to": f"v{j}", "geometry": {"kind": "segment"}} for i, j in ring]

    extras = []
    for k in range(2, n - 1):
        extras.append({"from": "v0", "to": f"v{k}", "geometry": {"kind": "segment"}})
    for i, j in ring:
        p, q = points[i], points[j]
        chord = q - p
        outward = np.array([chord[1], -chord[0]]) / np.linalg.norm(chord)
        if np.dot(outward, (p + q) / 2) < 0:
            outward = -outward
        depth = 1.0 - np.cos(np.arccos(np.clip(np.dot(p, q), -1.0, 1.0)) / 2)
        sides = (outward, -outward) if n == 2 else (outward,)
        for side in sides:
            sagitta = float(rng.uniform(0.2, 0.8)) * depth
            extras.append({"from": f"v{i}", "to": f"v{j}", "geometry": _bulge(p, q, side, sagitta)})
    for i in range(n):
        extras.append({"from": f"v{i}", "to": f"v{i}", "geometry": _loop(points[i])})

    order = rng.permutation(len(extras))
    budget = int(rng.integers(0, MAX_ARCS - len(arcs) + 1))
    arcs += [extras[k] for k in sorted(order[:budget])]
    for index, arc in enumerate(arcs):
        arc["id"] = f"e{index}"
        if rng.random() < 0.5:
            arc["from"], arc["to"] = arc["to"], arc["from"]
            arc["geometry"] = _reversed_geometry(arc["geometry"])
        arc["hamiltonian"] = _power_field(rng)
    return parse_document({"vertices": vertices, "arcs": arcs}, NetworkDocument, source="<random>")


def _reversed_geometry(geometry: dict) -> dict:
    if geometry["kind"] != "circular-arc":
        return geometry
    return {**geometry, "start_angle": geometry["start_angle"] + geometry["sweep"], "sweep": -geometry["sweep"]}


def random_instance(rng: np.random.Generator, numerics: Numerics = DEFAULT_NUMERICS) -> Instance:
    return Instance.from_document(random_document(rng), numerics)
