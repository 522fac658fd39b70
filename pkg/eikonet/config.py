"""Numeric settings, run configuration and logging setup."""

from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Literal

import numpy as np
from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from eikonet.errors import ConfigError


class Numerics(BaseModel):
    """Every numeric knob used by the solvers.

    Attributes:
        grid: number of s-samples per arc for fields and support functions
        panels: Simpson panels over a full arc, aligned with the grid
        root_tol: relative tolerance of argmin / root searches
        cycle_tol: per-arc factor of the negative-cycle tolerance
        bisection_tol: relative width at which the critical bisection stops
        energy_tol: relative slack when detecting m(s) touching a level
        pair_tol: relative slack of pairwise and slope checks
        solution_tol: relative slack of the solution fixed-point check
        geometry_tol: relative slack (times the network diameter) of geometric checks
        max_doublings: cap on upper bracket doublings for the critical value
        validation_radius: extra momentum radius sampled by the field validator
    """

    model_config = ConfigDict(frozen=True)

    grid: int = 257
    panels: int = 256
    root_tol: float = 1e-10
    cycle_tol: float = 1e-9
    bisection_tol: float = 3e-9
    energy_tol: float = 1e-7
    pair_tol: float = 1e-7
    solution_tol: float = 1e-6
    geometry_tol: float = 1e-9
    max_doublings: int = 60
    validation_radius: float = 8.0

    @field_validator("grid")
    @classmethod
    def _grid_shape(cls, value: int) -> int:
        if value < 33 or value % 2 == 0:
            raise ValueError("grid must be odd and at least 33")
        return value

    @field_validator(
        "root_tol",
        "cycle_tol",
        "bisection_tol",
        "energy_tol",
        "pair_tol",
        "solution_tol",
        "geometry_tol",
        "validation_radius",
    )
    @classmethod
    def _positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("tolerances must be positive")
        return value

    @model_validator(mode="after")
    def _aligned(self) -> "Numerics":
        if self.panels < self.grid - 1 or self.panels % (self.grid - 1):
            raise ValueError("panels must be a positive multiple of grid - 1")
        return self

    @classmethod
    def build(cls, **overrides) -> "Numerics":
        """Construct, turning validation problems into ConfigError."""
        try:
            return cls(**{k: v for k, v in overrides.items() if v is not None})
        except ValidationError as e:
            raise ConfigError(str(e)) from e

    @classmethod
    def from_env(cls, **overrides) -> "Numerics":
        """Defaults, then EIKONET_* environment values, then explicit overrides."""
        load_dotenv()
        settings: dict[str, object] = {}
        for variable, key, kind in (
            ("EIKONET_GRID", "grid", int),
            ("EIKONET_PANELS", "panels", int),
            ("EIKONET_TOL", "pair_tol", float),
        ):
            raw = os.getenv(variable)
            if not raw:
                continue
            try:
                settings[key] = kind(raw)
            except ValueError as e:
                raise ConfigError(f"{variable}={raw!r} is not a valid {kind.__name__}") from e
        settings.update({k: v for k, v in overrides.items() if v is not None})
        if "grid" in settings and "panels" not in settings:
            settings["panels"] = int(settings["grid"]) - 1
        return cls.build(**settings)

    def sample_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.grid)

    def quadrature_grid(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.panels + 1)

    def cycle_tolerance(self, level: float, arc_count: int) -> float:
        return self.cycle_tol * (1.0 + abs(level)) * max(arc_count, 1)

    def energy_tolerance(self, level: float) -> float:
        return self.energy_tol * (1.0 + abs(level))


DEFAULT_NUMERICS = Numerics()


class RunConfig(BaseModel):
    """Everything a command line run depends on; echoed into each artifact."""

    network: Path
    command: str
    numerics: Numerics = DEFAULT_NUMERICS
    output: Path | None = None
    format: Literal["json", "csv"] = "json"
    seed: int = 0
    workers: int = 1
    log_level: str = "WARNING"
    log_file: Path | None = None


def configure_logging(level: str = "WARNING", log_file: str | Path | None = None) -> None:
    """Route package logs to stderr, and optionally append them to a file."""
    logger.enable("eikonet")
    logger.remove()
    logger.add(sys.stderr, level=level.upper())
    if log_file:
        logger.add(log_file, format="{message}", mode="a", level="DEBUG")
