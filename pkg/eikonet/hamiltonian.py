"""Per-arc Hamiltonians H(s, mu), their support functions and energy levels."""

from __future__ import annotations

from abc import ABC, abstractmethod
from enum import Enum
from typing import Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, computed_field
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq, elementwise, minimize_scalar

from eikonet.config import DEFAULT_NUMERICS, Numerics
from eikonet.errors import (
    BracketFailure,
    NetworkDocumentError,
    ParameterOutOfRange,
    TableOutOfRange,
    UnknownArc,
)
from eikonet.network import Network, Orientation
from eikonet.schemas import (
    NetworkDocument,
    PolyCoefficientDoc,
    PowerHamiltonianDoc,
    SamplesCoefficientDoc,
    TableHamiltonianDoc,
)

FWD, REV = Orientation.FWD, Orientation.REV


class Coefficient(ABC):
    @abstractmethod
    def __call__(self, s) -> np.ndarray: ...


class PolyCoefficient(Coefficient):
    def __init__(self, coeffs):
        self.coeffs = np.asarray(coeffs, dtype=float)

    def __call__(self, s) -> np.ndarray:
        return np.polynomial.polynomial.polyval(np.asarray(s, dtype=float), self.coeffs)


class SampledCoefficient(Coefficient):
    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        self.knots = np.linspace(0.0, 1.0, len(self.values))

    def __call__(self, s) -> np.ndarray:
        return np.interp(np.asarray(s, dtype=float), self.knots, self.values)


def build_coefficient(doc) -> Coefficient:
    if isinstance(doc, PolyCoefficientDoc):
        return PolyCoefficient(doc.coeffs)
    if isinstance(doc, SamplesCoefficientDoc):
        return SampledCoefficient(doc.values)
    raise NetworkDocumentError(f"unsupported coefficient {doc!r}")


class ArcHamiltonian(ABC):
    """H_gamma(s, mu) of one preferred-orientation arc.

    The reversed arc is never stored: it is evaluated as H(1 - s, -mu).
    Subclasses with closed forms override ``minimum`` and ``sigma_plus``;
    the defaults bracket and solve numerically.
    """

    family = "generic"

    @abstractmethod
    def _h(self, s: np.ndarray, mu: np.ndarray) -> np.ndarray: ...

    def evaluate(self, s, mu, orientation: Orientation = FWD) -> np.ndarray:
        s, mu = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(mu, dtype=float))
        if orientation is REV:
            return self._h(1.0 - s, -mu)
        return self._h(s, mu)

    def mu_window(self, orientation: Orientation = FWD) -> tuple[float, float]:
        return -np.inf, np.inf

    def validation_window(self, s: np.ndarray, radius: float) -> tuple[np.ndarray, np.ndarray]:
        mu_star, _ = self.minimum(s)
        return mu_star - radius, mu_star + radius

    def minimum(self, s, orientation: Orientation = FWD, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        lo, hi = self.mu_window(orientation)

        def f(mu, s):
            return self.evaluate(s, mu, orientation)

        if np.isfinite(lo):
            middle = np.full(s.shape, (lo + hi) / 2)
            quarter = (hi - lo) / 4
            bracket = elementwise.bracket_minimum(
                f, middle, xl0=middle - quarter, xr0=middle + quarter, xmin=lo, xmax=hi, args=(s,)
            )
        else:
            middle = np.zeros(s.shape)
            bracket = elementwise.bracket_minimum(f, middle, xl0=middle - 1.0, xr0=middle + 1.0, args=(s,))
        if not np.all(bracket.success):
            raise BracketFailure(f"{self.family} Hamiltonian: no minimum bracket (coercivity violated?)")
        found = elementwise.find_minimum(f, bracket.bracket, args=(s,), tolerances={"xatol": tol, "xrtol": tol})
        return found.x, found.f_x

    def sigma_plus(self, s, a: float, orientation: Orientation = FWD, tol: float = 1e-10) -> np.ma.MaskedArray:
        s = np.atleast_1d(np.asarray(s, dtype=float))
        mu_star, m = self.minimum(s, orientation, tol)
        defined = a >= m - tol * (1.0 + abs(a))
        values = np.where(defined, mu_star, 0.0)
        open_ = defined & (a > m)
        if np.any(open_):
            lo, ss = mu_star[open_], s[open_]
            hi = self._upper_bracket(lo, ss, a, orientation)

            def f(mu, s):
                return self.evaluate(s, mu, orientation) - a

            root = elementwise.find_root(
                f, (lo, hi), args=(ss,), tolerances={"xatol": tol, "xrtol": tol, "fatol": tol * (1.0 + abs(a))}
            )
            if not np.all(root.success):
                raise BracketFailure(f"{self.family} Hamiltonian: level {a} root search failed")
            values[open_] = root.x
        return np.ma.masked_array(values, mask=~defined)

    def _upper_bracket(self, lo: np.ndarray, s: np.ndarray, a: float, orientation: Orientation) -> np.ndarray:
        _, top = self.mu_window(orientation)
        if np.isfinite(top):
            hi = np.full(lo.shape, top)
            if np.any(self.evaluate(s, hi, orientation) < a):
                raise TableOutOfRange(f"level {a} is not reached inside the tabulated momentum window")
            return hi
        radius = np.ones(lo.shape)
        for _ in range(200):
            short = self.evaluate(s, lo + radius, orientation) < a
            if not np.any(short):
                return lo + radius
            radius = np.where(short, 2.0 * radius, radius)
        raise BracketFailure(f"level {a} not bracketed (coercivity violated?)")


class PowerHamiltonian(ArcHamiltonian):
    """H(s, mu) = |mu - b(s)|**p - V(s), with closed-form support functions."""

    family = "power"

    def __init__(self, p: float, b: Coefficient, V: Coefficient):
        self.p = float(p)
        self.b = b
        self.V = V

    def _h(self, s, mu):
        return np.abs(mu - self.b(s)) ** self.p - self.V(s)

    def validation_window(self, s, radius):
        centre = self.b(s)
        return centre - radius, centre + radius

    def minimum(self, s, orientation=FWD, tol=1e-10):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if orientation is REV:
            return -self.b(1.0 - s), -self.V(1.0 - s)
        return self.b(s), -self.V(s)

    def sigma_plus(self, s, a, orientation=FWD, tol=1e-10):
        mu_star, m = self.minimum(s, orientation)
        defined = a >= m - tol * (1.0 + abs(a))
        values = mu_star + np.maximum(a - m, 0.0) ** (1.0 / self.p)
        return np.ma.masked_array(np.where(defined, values, 0.0), mask=~defined)


class TableHamiltonian(ArcHamiltonian):
    """Bilinear interpolation of tabulated values on an (s, mu) grid."""

    family = "table"

    def __init__(self, s_grid, mu_grid, values):
        self.s_grid = np.asarray(s_grid, dtype=float)
        self.mu_grid = np.asarray(mu_grid, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self._interp = RegularGridInterpolator((self.s_grid, self.mu_grid), self.values, method="linear")

    def _h(self, s, mu):
        lo, hi = self.mu_grid[0], self.mu_grid[-1]
        slack = 1e-12 * (1.0 + max(abs(lo), abs(hi)))
        if np.any(mu < lo - slack) or np.any(mu > hi + slack):
            raise TableOutOfRange(f"momentum outside tabulated window [{lo}, {hi}]")
        points = np.stack([np.clip(s, 0.0, 1.0).ravel(), np.clip(mu, lo, hi).ravel()], axis=-1)
        return self._interp(points).reshape(s.shape)

    def mu_window(self, orientation=FWD):
        if orientation is REV:
            return -float(self.mu_grid[-1]), -float(self.mu_grid[0])
        return float(self.mu_grid[0]), float(self.mu_grid[-1])

    def validation_window(self, s, radius):
        shape = np.shape(s)
        return np.full(shape, self.mu_grid[0]), np.full(shape, self.mu_grid[-1])


def build_arc_hamiltonian(doc, arc_id: str = "?") -> ArcHamiltonian:
    if isinstance(doc, PowerHamiltonianDoc):
        return PowerHamiltonian(doc.p, build_coefficient(doc.b), build_coefficient(doc.V))
    if isinstance(doc, TableHamiltonianDoc):
        s_grid, mu_grid = np.asarray(doc.s_grid), np.asarray(doc.mu_grid)
        values = np.asarray(doc.values, dtype=float)
        if values.shape != (s_grid.size, mu_grid.size):
            raise NetworkDocumentError(f"arc {arc_id!r}: table values must have shape (len(s_grid), len(mu_grid))")
        if s_grid[0] != 0.0 or s_grid[-1] != 1.0 or np.any(np.diff(s_grid) <= 0) or np.any(np.diff(mu_grid) <= 0):
            raise NetworkDocumentError(f"arc {arc_id!r}: table grids must increase and s_grid must span [0, 1]")
        return TableHamiltonian(s_grid, mu_grid, values)
    raise NetworkDocumentError(f"arc {arc_id!r}: unsupported Hamiltonian family")


class SupportSample(BaseModel):
    """Support functions of one oriented arc at level ``level``; None marks undefined."""

    arc: str
    orientation: Orientation
    level: float
    s: list[float]
    sigma_plus: list[Optional[float]]
    sigma_minus: list[Optional[float]]
    mu_star: list[float]
    m: list[float]


class HamiltonianField:
    """The Hamiltonians of every arc of a network, with cached energy data."""

    def __init__(self, network: Network, hamiltonians: dict[str, ArcHamiltonian], numerics: Numerics = DEFAULT_NUMERICS):
        missing = [arc_id for arc_id in network.arcs if arc_id not in hamiltonians]
        if missing:
            raise NetworkDocumentError(f"arcs without a Hamiltonian: {missing}")
        self.network = network
        self.hamiltonians = hamiltonians
        self.numerics = numerics
        self._peaks: dict[str, tuple[float, float]] = {}
        self._contacts: dict[tuple[str, float], list[tuple[float, float, float]]] = {}

    def arc_hamiltonian(self, arc_id: str) -> ArcHamiltonian:
        try:
            return self.hamiltonians[arc_id]
        except KeyError:
            raise UnknownArc(f"unknown arc {arc_id!r}") from None

    @staticmethod
    def _parameters(s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ParameterOutOfRange("arc parameter outside [0, 1]")
        return s

    def evaluate(self, arc_id: str, s, mu, orientation: Orientation = FWD):
        values = self.arc_hamiltonian(arc_id).evaluate(self._parameters(s), mu, orientation)
        return float(values) if np.ndim(values) == 0 else values

    def min_over_mu(self, arc_id: str, s, orientation: Orientation = FWD):
        s_arr = self._parameters(s)
        mu_star, m = self.arc_hamiltonian(arc_id).minimum(s_arr, orientation, self.numerics.root_tol)
        if np.ndim(s) == 0:
            return float(mu_star[0]), float(m[0])
        return mu_star, m

    def sigma_plus(self, arc_id: str, a: float, s, orientation: Orientation = FWD) -> np.ma.MaskedArray:
        return self.arc_hamiltonian(arc_id).sigma_plus(self._parameters(s), float(a), orientation, self.numerics.root_tol)

    def sigma_minus(self, arc_id: str, a: float, s, orientation: Orientation = FWD) -> np.ma.MaskedArray:
        """Smallest momentum at level a, defined through the reversed arc."""
        s = np.atleast_1d(self._parameters(s))
        return -self.sigma_plus(arc_id, a, 1.0 - s, orientation.flipped)

    def sigma_plus_at(self, arc_id: str, a: float, s: float, orientation: Orientation = FWD) -> float | None:
        value = self.sigma_plus(arc_id, a, [s], orientation)
        return None if value.mask[0] else float(value[0])

    def sigma_minus_at(self, arc_id: str, a: float, s: float, orientation: Orientation = FWD) -> float | None:
        value = self.sigma_minus(arc_id, a, [s], orientation)
        return None if value.mask[0] else float(value[0])

    def support_sample(self, arc_id: str, a: float, s_grid=None, orientation: Orientation = FWD) -> SupportSample:
        s = self.numerics.sample_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
        plus = self.sigma_plus(arc_id, a, s, orientation)
        minus = self.sigma_minus(arc_id, a, s, orientation)
        mu_star, m = self.min_over_mu(arc_id, s, orientation)
        return SupportSample(
            arc=arc_id,
            orientation=orientation,
            level=a,
            s=s.tolist(),
            sigma_plus=[None if masked else float(v) for v, masked in zip(plus.data, np.ma.getmaskarray(plus))],
            sigma_minus=[None if masked else float(v) for v, masked in zip(minus.data, np.ma.getmaskarray(minus))],
            mu_star=np.asarray(mu_star).tolist(),
            m=np.asarray(m).tolist(),
        )

    def energy_peak(self, arc_id: str) -> tuple[float, float]:
        """(s*, a_gamma): where max_s min_mu H is attained, and its value."""
        if arc_id not in self._peaks:
            grid = self.numerics.sample_grid()
            _, m = self.min_over_mu(arc_id, grid)
            k = int(np.argmax(m))
            best = (float(grid[k]), float(m[k]))
            lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
            refined = minimize_scalar(
                lambda s: -self.min_over_mu(arc_id, float(s))[1],
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-12},
            )
            if refined.success and -refined.fun > best[1]:
                best = (float(refined.x), float(-refined.fun))
            self._peaks[arc_id] = best
        return self._peaks[arc_id]

    def a_gamma(self, arc_id: str) -> float:
        return self.energy_peak(arc_id)[1]

    def a_zero(self) -> float:
        return max(self.a_gamma(arc_id) for arc_id in self.network.arcs)

    def constant_subsolution_level(self) -> float:
        """Level above which every constant function is a subsolution."""
        grid = self.numerics.sample_grid()
        level = -np.inf
        for arc_id, hamiltonian in self.hamiltonians.items():
            lo, hi = hamiltonian.mu_window()
            if not lo <= 0.0 <= hi:
                return np.inf
            level = max(level, float(np.max(hamiltonian.evaluate(grid, 0.0))))
        return level

    def contact_intervals(self, arc_id: str, a: float) -> list[tuple[float, float, float]]:
        """Maximal intervals where m(s) >= a - tol, as (start, peak, end) triples."""
        key = (arc_id, float(a))
        if key in self._contacts:
            return self._contacts[key]
        floor = a - self.numerics.energy_tolerance(a)
        s_star, peak = self.energy_peak(arc_id)
        if peak < floor:
            self._contacts[key] = []
            return []

        grid = self.numerics.sample_grid()
        _, m = self.min_over_mu(arc_id, grid)
        inside = m >= floor

        def gap(s: float) -> float:
            return self.min_over_mu(arc_id, float(s))[1] - floor

        def crossing(outside: float, within: float) -> float:
            return float(brentq(gap, min(outside, within), max(outside, within), xtol=1e-14))

        intervals: list[tuple[float, float, float]] = []
        runs = np.flatnonzero(np.diff(np.concatenate([[0], inside.astype(np.int8), [0]])))
        for first, stop in zip(runs[::2], runs[1::2]):
            last = stop - 1
            start = 0.0 if first == 0 else crossing(grid[first - 1], grid[first])
            end = 1.0 if last == grid.size - 1 else crossing(grid[last + 1], grid[last])
            top = s_star if start <= s_star <= end else float(grid[first + int(np.argmax(m[first:stop]))])
            intervals.append((start, top, end))

        if not any(start <= s_star <= end for start, _, end in intervals):
            k = int(np.searchsorted(grid, s_star))
            start = 0.0 if s_star == 0.0 else crossing(grid[k - 1], s_star)
            end = 1.0 if s_star == 1.0 else crossing(grid[k], s_star)
            intervals.append((start, s_star, end))
            intervals.sort()

        self._contacts[key] = intervals
        return intervals

    def breakpoints(self, arc_id: str, a: float) -> np.ndarray:
        """Parameters where the support functions may lose smoothness at level a."""
        points = [p for interval in self.contact_intervals(arc_id, a) for p in interval]
        return np.unique(np.asarray(points, dtype=float))


def build_field(network: Network, document: NetworkDocument, numerics: Numerics = DEFAULT_NUMERICS) -> HamiltonianField:
    hamiltonians = {}
    for doc in document.arcs:
        if doc.hamiltonian is None:
            raise NetworkDocumentError(f"arc {doc.id!r} has no hamiltonian")
        hamiltonians[doc.id] = build_arc_hamiltonian(doc.hamiltonian, doc.id)
    return HamiltonianField(network, hamiltonians, numerics)


def a_zero(network: Network, field: HamiltonianField) -> float:
    return max(field.a_gamma(arc_id) for arc_id in network.arcs)


class CheckStatus(str, Enum):
    PASS = "PASS"
    WARN = "WARN"
    FAIL = "FAIL"


class ArcValidation(BaseModel):
    arc: str
    family: str
    continuity: CheckStatus
    coercivity: CheckStatus
    quasiconvexity: CheckStatus
    compatibility: CheckStatus
    notes: list[str] = []


class FieldValidationReport(BaseModel):
    arcs: list[ArcValidation]

    @computed_field
    @property
    def passed(self) -> bool:
        return all(
            CheckStatus.FAIL not in (a.continuity, a.coercivity, a.quasiconvexity, a.compatibility) for a in self.arcs
        )

    @computed_field
    @property
    def warnings(self) -> int:
        return sum(
            CheckStatus.WARN in (a.continuity, a.coercivity, a.quasiconvexity, a.compatibility) for a in self.arcs
        )


def _quasiconvexity(h: np.ndarray, tol: float) -> CheckStatus:
    """Rows of h must satisfy h[j] < max(h[i], h[k]) for every i < j < k."""
    left = np.minimum.accumulate(h, axis=1)
    right = np.minimum.accumulate(h[:, ::-1], axis=1)[:, ::-1]
    threshold = np.maximum(left[:, :-2], right[:, 2:])
    middle = h[:, 1:-1]
    if np.any(middle >= threshold + tol):
        return CheckStatus.FAIL
    if np.any(middle >= threshold - tol):
        return CheckStatus.WARN
    return CheckStatus.PASS


def _validate_arc(arc_id: str, hamiltonian: ArcHamiltonian, numerics: Numerics) -> ArcValidation:
    s = np.linspace(0.0, 1.0, 65)
    notes: list[str] = []
    lo, hi = hamiltonian.validation_window(s, numerics.validation_radius)
    mu = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, 65)[None, :]
    ss = np.broadcast_to(s[:, None], mu.shape)
    h = hamiltonian.evaluate(ss, mu)

    continuity = CheckStatus.PASS if np.all(np.isfinite(h)) else CheckStatus.FAIL
    if continuity is CheckStatus.FAIL:
        notes.append("non-finite values on the sampling grid")
        return ArcValidation(
            arc=arc_id,
            family=hamiltonian.family,
            continuity=continuity,
            coercivity=CheckStatus.FAIL,
            quasiconvexity=CheckStatus.FAIL,
            compatibility=CheckStatus.FAIL,
            notes=notes,
        )

    tol = 1e-9 * (1.0 + float(np.max(np.abs(h))))
    floor = np.min(h, axis=1)
    coercivity = CheckStatus.PASS
    if np.any(np.minimum(h[:, 0], h[:, -1]) <= floor + tol):
        coercivity = CheckStatus.FAIL
        notes.append("H does not grow at the edges of the momentum window")

    quasiconvexity = _quasiconvexity(h, tol)
    if quasiconvexity is CheckStatus.FAIL:
        notes.append("a momentum slice is not quasiconvex")
    elif quasiconvexity is CheckStatus.WARN:
        notes.append("a momentum slice has flat stretches")

    reversed_h = hamiltonian.evaluate(1.0 - ss, -mu, REV)
    compatibility = CheckStatus.PASS if np.allclose(reversed_h, h, rtol=1e-12, atol=tol) else CheckStatus.FAIL
    if compatibility is CheckStatus.FAIL:
        notes.append("reversed evaluation differs from H(1 - s, -mu)")

    return ArcValidation(
        arc=arc_id,
        family=hamiltonian.family,
        continuity=continuity,
        coercivity=coercivity,
        quasiconvexity=quasiconvexity,
        compatibility=compatibility,
        notes=notes,
    )


def validate_field(network: Network, field: HamiltonianField) -> FieldValidationReport:
    """Check continuity, coercivity, quasiconvexity and compatibility on grids."""
    results = []
    for arc_id in network.arcs:
        try:
            results.append(_validate_arc(arc_id, field.arc_hamiltonian(arc_id), field.numerics))
        except (TableOutOfRange, BracketFailure) as e:
            results.append(
                ArcValidation(
                    arc=arc_id,
                    family=field.arc_hamiltonian(arc_id).family,
                    continuity=CheckStatus.FAIL,
                    coercivity=CheckStatus.FAIL,
                    quasiconvexity=CheckStatus.FAIL,
                    compatibility=CheckStatus.FAIL,
                    notes=[str(e)],
                )
            )
    report = FieldValidationReport(arcs=results)
    for arc in report.arcs:
        for note in arc.notes:
            logger.warning("Arc {}: {}", arc.arc, note)
    return report
