"""Eikonal Hamilton-Jacobi equations on embedded networks.

Critical values, Aubry sets and Hopf-Lax solutions for arc-wise
Hamiltonians on finite networks of regular curves.
"""

from loguru import logger

from eikonet.config import DEFAULT_NUMERICS, Numerics, RunConfig, configure_logging
from eikonet.critical_aubry import (
    AubryStructure,
    CriticalData,
    StaticClass,
    aubry_set,
    condition_D_holds,
    critical_value,
    degenerate_set,
    uniqueness_set,
)
from eikonet.errors import EikonetError
from eikonet.hamiltonian import HamiltonianField, SupportSample, a_zero, build_field, validate_field
from eikonet.hopflax import (
    FieldOnNetwork,
    Trace,
    aubry_trace,
    check_admissible,
    check_degenerate_slopes,
    check_solution_fixed_point,
    check_static_class_rigidity,
    check_subsolution,
    comparison_harness,
    random_subsolution,
    solve,
)
from eikonet.instance import Instance, load_instance, random_instance
from eikonet.network import Interior, Network, Orientation, Vertex, build_network, canonical_point, geodesic_distance, load_network
from eikonet.semidistance import (
    PathCertificate,
    arc_cost,
    brute_force_semidistance,
    build_level_graph,
    has_negative_cycle,
    lipschitz_bound,
    semidistance,
)

logger.disable("eikonet")

__all__ = [
    "DEFAULT_NUMERICS",
    "AubryStructure",
    "CriticalData",
    "EikonetError",
    "FieldOnNetwork",
    "HamiltonianField",
    "Instance",
    "Interior",
    "Network",
    "Numerics",
    "Orientation",
    "PathCertificate",
    "RunConfig",
    "StaticClass",
    "SupportSample",
    "Trace",
    "Vertex",
    "a_zero",
    "arc_cost",
    "aubry_set",
    "aubry_trace",
    "brute_force_semidistance",
    "build_field",
    "build_level_graph",
    "build_network",
    "canonical_point",
    "check_admissible",
    "check_degenerate_slopes",
    "check_solution_fixed_point",
    "check_static_class_rigidity",
    "check_subsolution",
    "comparison_harness",
    "condition_D_holds",
    "configure_logging",
    "critical_value",
    "degenerate_set",
    "geodesic_distance",
    "has_negative_cycle",
    "lipschitz_bound",
    "load_instance",
    "load_network",
    "random_instance",
    "random_subsolution",
    "semidistance",
    "solve",
    "uniqueness_set",
    "validate_field",
]
