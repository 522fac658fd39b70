"""Command line entry point: ``eikonet [flags] <command> [options]``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import BaseModel

from eikonet.config import Numerics, RunConfig, configure_logging
from eikonet.critical_aubry import aubry_set, condition_D_holds, critical_value
from eikonet.errors import ConfigError, EikonetError, InadmissibleTrace
from eikonet.hamiltonian import validate_field
from eikonet.hopflax import (
    FieldOnNetwork,
    FixedPointReport,
    Trace,
    aubry_trace,
    check_solution_fixed_point,
    check_subsolution,
    comparison_harness,
    solve,
)
from eikonet.instance import Instance, load_instance
from eikonet.network import Interior, Vertex
from eikonet.schemas import FieldDocument, TraceDocument, read_document
from eikonet.semidistance import differential_oracle, semidistance

CSV_COMMANDS = ("solve", "distance", "critical")


@dataclass
class Outcome:
    """What a command hands back: a JSON-able result, an optional CSV table and a verdict."""

    result: Any
    table: Optional[pd.DataFrame] = None
    passed: bool = True
    header: dict[str, Any] = dataclass_field(default_factory=dict)


def _dump(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {k: _dump(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_dump(v) for v in value]
    return value


def _level(args: argparse.Namespace, instance: Instance):
    critical = critical_value(instance.network, instance.field)
    return critical, critical.c if args.level is None else args.level


def cmd_validate(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    report = validate_field(instance.network, instance.field)
    network = instance.network
    summary = {
        "vertices": len(network.vertices),
        "arcs": network.arc_count,
        "dimension": network.dimension,
        "diameter": network.diameter,
        "tolerance": network.tolerance,
        "incidence": {v: [f"{a}:{o.value}" for a, o in network.incidence(v)] for v in network.vertices},
    }
    return Outcome(result={"network": summary, "field": report}, passed=report.passed)


def cmd_critical(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    critical = critical_value(instance.network, instance.field)
    table = pd.DataFrame([step.model_dump() for step in critical.history])
    return Outcome(result=critical, table=table, header={"c": critical.c, "a0": critical.a0})


def cmd_aubry(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    critical = critical_value(instance.network, instance.field)
    aubry = aubry_set(instance.network, instance.field, critical)
    condition = condition_D_holds(instance.network, instance.field, critical)
    return Outcome(result={"critical": critical, "aubry": aubry, "condition_D": condition})


def cmd_distance(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    network = instance.network
    y, x = network.parse_point(args.source), network.parse_point(args.target)
    level = args.level
    if level is None:
        level = critical_value(network, instance.field).c
    value, certificate = semidistance(network, instance.field, level, y, x)
    table = pd.DataFrame(
        [{"arc": leg.arc, "dir": leg.dir.value, "s1": leg.s[0], "s2": leg.s[1], "cost": leg.cost} for leg in certificate.legs],
        columns=["arc", "dir", "s1", "s2", "cost"],
    )
    return Outcome(
        result={"level": level, "value": value, "certificate": certificate},
        table=table,
        header={"level": level, "value": value},
    )


def cmd_solve(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    network, field = instance.network, instance.field
    document = read_document(args.trace, TraceDocument)
    trace = Trace.from_document(network, document, field.numerics.sample_grid())
    critical, level = _level(args, instance)
    if args.on == "aubry":
        aubry = aubry_set(network, field, critical)
        extended = solve(network, field, critical, trace, level=level, require_admissible=False)
        trace = aubry_trace(extended, aubry.classes)
    u = solve(network, field, critical, trace, level=level)
    return Outcome(
        result={"level": level, "on": args.on, "constraint_points": len(trace), "field": u.to_document()},
        table=u.to_frame(),
        header={"level": level, "on": args.on},
    )


def cmd_verify(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    network, field = instance.network, instance.field
    w = FieldOnNetwork.from_document(network, read_document(args.field, FieldDocument))
    critical, level = _level(args, instance)
    refined = None
    if args.refined_field is not None:
        refined = FieldOnNetwork.from_document(network, read_document(args.refined_field, FieldDocument))
    subsolution = check_subsolution(network, field, w, level, pairs=args.pairs, seed=config.seed, refined=refined)
    try:
        aubry = aubry_set(network, field, critical)
        fixed_point = check_solution_fixed_point(network, field, w, critical, aubry, level=level)
    except InadmissibleTrace as e:
        fixed_point = FixedPointReport(
            level=level, tolerance=field.numerics.solution_tol * (1.0 + w.sup_norm()), reason=str(e)
        )
    return Outcome(
        result={"level": level, "subsolution": subsolution, "fixed_point": fixed_point},
        passed=subsolution.passed and fixed_point.passed,
    )


def cmd_harness(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    aubry = aubry_set(network, field, critical)
    report = comparison_harness(
        network,
        field,
        critical,
        aubry,
        args.trials,
        level=critical.c + args.level_offset,
        extra_vertices=args.extra_vertex,
        random_vertex=args.random_vertex,
        seed=config.seed,
        workers=config.workers,
    )
    return Outcome(result=report, passed=report.passed)


def cmd_oracle(args: argparse.Namespace, config: RunConfig, instance: Instance) -> Outcome:
    network, field = instance.network, instance.field
    critical = critical_value(network, field)
    rng = np.random.default_rng(config.seed)
    nodes = field.numerics.quadrature_grid()[1:-1]
    points = [Vertex(vertex=v) for v in network.vertices]
    for arc_id in network.arcs:
        points.append(Interior(arc=arc_id, s=float(rng.choice(nodes))))
    reports = [
        differential_oracle(network, field, level, points, tol=args.oracle_tol)
        for level in (critical.c, critical.c + args.level_offset)
    ]
    return Outcome(result={"c": critical.c, "levels": reports}, passed=all(r.passed for r in reports))


COMMANDS = {
    "validate": cmd_validate,
    "critical": cmd_critical,
    "aubry": cmd_aubry,
    "distance": cmd_distance,
    "solve": cmd_solve,
    "verify": cmd_verify,
    "harness": cmd_harness,
    "oracle": cmd_oracle,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="eikonet", description="Eikonal Hamilton-Jacobi equations on embedded networks.")
    parser.add_argument("--network", required=True, type=Path, help="Network JSON document.")
    parser.add_argument("--grid", type=int, default=None, help="s-samples per arc (odd, >= 33).")
    parser.add_argument("--panels", type=int, default=None, help="Simpson panels per arc (multiple of grid - 1).")
    parser.add_argument("--tol", type=float, default=None, help="Relative tolerance of pairwise checks.")
    parser.add_argument("--output", type=Path, default=None, help="Write the artifact here instead of stdout.")
    parser.add_argument("--format", choices=["json", "csv"], default="json")
    parser.add_argument("--seed", type=int, default=0, help="Seed for randomized checks.")
    parser.add_argument("--workers", type=int, default=1, help="Threads for the comparison harness.")
    parser.add_argument("--log-level", default="WARNING")
    parser.add_argument("--log-file", type=Path, default=None)

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("validate", help="Check the network and Hamiltonian assumptions.")
    commands.add_parser("critical", help="Compute the critical value.")
    commands.add_parser("aubry", help="Compute the Aubry set and its static classes.")

    sp = commands.add_parser("distance", help="Semidistance between two points.")
    sp.add_argument("--from", dest="source", required=True, help="Point as v:ID, ARC@s or ~ARC@s.")
    sp.add_argument("--to", dest="target", required=True)
    sp.add_argument("--level", type=float, default=None, help="Level a (default: critical value).")

    sp = commands.add_parser("solve", help="Hopf-Lax solution from a trace document.")
    sp.add_argument("--trace", required=True, type=Path)
    sp.add_argument("--on", choices=["trace-domain", "aubry"], default="trace-domain")
    sp.add_argument("--level", type=float, default=None)

    sp = commands.add_parser("verify", help="Subsolution and fixed-point checks of a field document.")
    sp.add_argument("--field", required=True, type=Path)
    sp.add_argument("--level", type=float, default=None)
    sp.add_argument("--pairs", type=int, default=16, help="Random long-range pairs.")
    sp.add_argument(
        "--refined-field", type=Path, default=None, help="The same field sampled on a finer grid, for the two-resolution slope test."
    )

    sp = commands.add_parser("harness", help="Randomized comparison-principle run.")
    sp.add_argument("--trials", type=int, default=100)
    sp.add_argument("--level-offset", type=float, default=0.0, help="Run at c + offset.")
    sp.add_argument("--extra-vertex", action="append", default=[], help="Vertex added to every constraint set.")
    sp.add_argument("--random-vertex", action="store_true", help="Add one random vertex per trial.")

    sp = commands.add_parser("oracle", help="Semidistance against exhaustive path enumeration.")
    sp.add_argument("--level-offset", type=float, default=1.0)
    sp.add_argument("--oracle-tol", type=float, default=1e-9)
    return parser


def _emit(text: str, output: Path | None) -> None:
    if output is None:
        sys.stdout.write(text)
    else:
        output.write_text(text, encoding="utf-8")


def _render_csv(config: RunConfig, outcome: Outcome) -> str:
    header = {
        "command": config.command,
        "network": str(config.network),
        "grid": config.numerics.grid,
        "panels": config.numerics.panels,
        "pair_tol": config.numerics.pair_tol,
        **outcome.header,
    }
    lines = "".join(f"# {key}={value}\n" for key, value in header.items())
    return lines + outcome.table.to_csv(index=False)


def run(argv: list[str] | None = None) -> int:
    """Parse ``argv``, run one command and write its artifact. Returns the exit status."""
    args = build_parser().parse_args(argv)
    try:
        config = RunConfig(
            network=args.network,
            command=args.command,
            numerics=Numerics.from_env(grid=args.grid, panels=args.panels, pair_tol=args.tol),
            output=args.output,
            format=args.format,
            seed=args.seed,
            workers=args.workers,
            log_level=args.log_level,
            log_file=args.log_file,
        )
        configure_logging(config.log_level, config.log_file)
        if config.format == "csv" and config.command not in CSV_COMMANDS:
            raise ConfigError(f"csv output is available for {', '.join(CSV_COMMANDS)} only")
        logger.info("Running {} on {}", config.command, config.network)
        instance = load_instance(config.network, config.numerics)
        outcome = COMMANDS[config.command](args, config, instance)
    except EikonetError as e:
        logger.debug("{} failed: {}", args.command, e)
        sys.stderr.write(json.dumps(e.to_payload()) + "\n")
        return e.exit_status

    if config.format == "csv":
        text = _render_csv(config, outcome)
    else:
        envelope = {"command": config.command, "config": config.model_dump(mode="json"), "result": _dump(outcome.result)}
        text = json.dumps(envelope, indent=2) + "\n"
    _emit(text, config.output)
    return 0 if outcome.passed else 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
