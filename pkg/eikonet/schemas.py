"""Pydantic models of the JSON documents read and written by eikonet."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Literal, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from eikonet.errors import NetworkDocumentError


class VertexDoc(BaseModel):
    id: str
    coords: list[float] = Field(min_length=1)


class SegmentGeometryDoc(BaseModel):
    kind: Literal["segment"] = "segment"


class SamplesGeometryDoc(BaseModel):
    kind: Literal["samples"]
    points: list[list[float]] = Field(min_length=2)


class CircularArcGeometryDoc(BaseModel):
    """Circle piece center + radius*(cos t * u + sin t * v), t = start_angle + sweep*s.

    ``plane`` holds the orthonormal basis (u, v); it defaults to the first two
    coordinate axes.
    """

    kind: Literal["circular-arc"]
    center: list[float]
    radius: float = Field(gt=0)
    start_angle: float
    sweep: float
    plane: list[list[float]] | None = None


GeometryDoc = Annotated[
    Union[SegmentGeometryDoc, SamplesGeometryDoc, CircularArcGeometryDoc],
    Field(discriminator="kind"),
]


class PolyCoefficientDoc(BaseModel):
    """Polynomial in s, ``coeffs[k]`` multiplies s**k."""

    kind: Literal["poly"]
    coeffs: list[float] = Field(min_length=1)


class SamplesCoefficientDoc(BaseModel):
    """Values on a uniform s-grid over [0, 1], linearly interpolated."""

    kind: Literal["samples"]
    values: list[float] = Field(min_length=2)


CoefficientDoc = Annotated[
    Union[PolyCoefficientDoc, SamplesCoefficientDoc],
    Field(discriminator="kind"),
]


def _zero() -> PolyCoefficientDoc:
    return PolyCoefficientDoc(kind="poly", coeffs=[0.0])


class PowerHamiltonianDoc(BaseModel):
    """H(s, mu) = |mu - b(s)|**p - V(s)."""

    family: Literal["power"]
    p: float = Field(default=1.0, ge=1.0)
    b: CoefficientDoc = Field(default_factory=_zero)
    V: CoefficientDoc = Field(default_factory=_zero)


class TableHamiltonianDoc(BaseModel):
    """Bilinear interpolation of ``values[i][j]`` at (s_grid[i], mu_grid[j])."""

    family: Literal["table"]
    s_grid: list[float] = Field(min_length=2)
    mu_grid: list[float] = Field(min_length=3)
    values: list[list[float]]


HamiltonianDoc = Annotated[
    Union[PowerHamiltonianDoc, TableHamiltonianDoc],
    Field(discriminator="family"),
]


class ArcDoc(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    id: str
    tail: str = Field(alias="from")
    head: str = Field(alias="to")
    geometry: GeometryDoc = Field(default_factory=SegmentGeometryDoc)
    hamiltonian: HamiltonianDoc | None = None


class NetworkDocument(BaseModel):
    vertices: list[VertexDoc] = Field(min_length=1)
    arcs: list[ArcDoc] = Field(min_length=1)

    def dump(self) -> dict:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)


class VertexAt(BaseModel):
    vertex: str


class ArcAt(BaseModel):
    arc: str
    s: float


class TracePointDoc(BaseModel):
    at: Union[VertexAt, ArcAt]
    value: float


class TraceIntervalDoc(BaseModel):
    """Values sampled uniformly over ``s``; a single value means a constant."""

    arc: str
    s: tuple[float, float]
    values: list[float] = Field(min_length=1)


class TraceDocument(BaseModel):
    points: list[TracePointDoc] = Field(default_factory=list)
    intervals: list[TraceIntervalDoc] = Field(default_factory=list)


class ArcSamplesDoc(BaseModel):
    arc: str
    s_grid: list[float] = Field(min_length=2)
    values: list[float] = Field(min_length=2)


class FieldDocument(BaseModel):
    arcs: list[ArcSamplesDoc]
    vertices: dict[str, float]


def read_document(path: str | Path, model: type[BaseModel]) -> BaseModel:
    """Parse a JSON file into ``model``, reporting problems as input errors."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise NetworkDocumentError(f"cannot read {path}: {e}") from e
    return parse_document(text, model, source=str(path))


def parse_document(data: str | dict, model: type[BaseModel], source: str = "<document>") -> BaseModel:
    try:
        if isinstance(data, str):
            return model.model_validate_json(data)
        return model.model_validate(data)
    except ValidationError as e:
        raise NetworkDocumentError(f"{source}: {e}") from e
