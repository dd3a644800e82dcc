import argparse
import json
import sys
import time
from pathlib import Path
from typing import Callable

import structlog
from jsonschema import ValidationError, validate

from . import __version__
from .canonical_metric import WEDGE_SCHEME, conformal_edge_lengths, energy_of, solve_canonical
from .config import Config, configure_logging, load_config
from .core_types.mesh import TriangleMesh
from .core_types.report import RunReport
from .dec_operators import STAR_SCHEME, DecOperators, build_operators
from .exceptions import (
    AssumptionError,
    DegenerateClassError,
    GeometryError,
    HarmcanonError,
    MeshFormatError,
    RhoFieldError,
    TopologyError,
)
from .generators import clifford_torus_positions, generate_flat_torus, generate_genus2, generate_revolution_torus
from .harmonic_basis import harmonic_basis
from .invariants import InvariantSuite
from .mesh_core import normalize_area, topology
from .mesh_io import (
    load_mesh,
    load_schema,
    read_face_field,
    write_face_field_json,
    write_face_field_ply,
    write_intrinsic_json,
    write_mesh,
)

logger = structlog.get_logger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_DEGENERATE = 4
EXIT_ASSUMPTION = 5
EXIT_RHO = 6
EXIT_VALIDATION = 7

SHAPES = ("flat-torus", "revolution-torus", "genus2")


def _dump(data) -> str:
    return json.dumps(data, indent=2, allow_nan=False)


def _error(message: str):
    print(f"error: {message}", file=sys.stderr)


class Workbench:
    """Runs one command against files on disk and returns its exit code.

    ``operator_factory`` is the operator assembly used by ``validate``; tests
    replace it to inject faults.
    """

    def __init__(
        self,
        config: Config | None = None,
        seed: int = 0,
        timings: bool = True,
        operator_factory: Callable[[TriangleMesh], DecOperators] = build_operators,
    ):
        self.config = load_config() if config is None else config
        self.seed = seed
        self.timings = timings
        self.operator_factory = operator_factory

    def _generated(self, shape: str, resolution: int | None, refinement: int | None) -> TriangleMesh | None:
        if shape == "flat-torus":
            return generate_flat_torus(8 if resolution is None else resolution)
        if shape == "revolution-torus":
            return generate_revolution_torus(16 if resolution is None else resolution)
        if shape == "genus2":
            return generate_genus2(1 if refinement is None else refinement)
        return None

    def handle_generate_command(self, shape: str, out: str, resolution: int | None = None, refinement: int | None = None) -> int:
        if shape not in SHAPES:
            _error(f"unknown shape {shape!r}; expected one of {', '.join(SHAPES)}")
            return EXIT_USAGE
        try:
            mesh = self._generated(shape, resolution, refinement)
        except ValueError as e:
            _error(str(e))
            return EXIT_USAGE
        if shape == "flat-torus" and Path(out).suffix.lower() == ".off":
            # a flat torus only embeds isometrically in 4D
            mesh = TriangleMesh.from_positions(
                clifford_torus_positions(resolution or 8), mesh.faces, source=mesh.source
            )
        write_mesh(mesh, out)
        logger.info("Generated mesh", shape=shape, out=out, vertex_count=mesh.vertex_count)
        return EXIT_OK

    def build_report(self, run, source: str | None, timings: dict | None) -> RunReport:
        report = RunReport(
            tool_version=__version__,
            mesh=RunReport.mesh_summary(source, topology(run.mesh)),
            discretization={"star_scheme": STAR_SCHEME, "wedge_scheme": WEDGE_SCHEME},
            basis=run.basis.residuals_dict(),
            result=run.result.to_dict(),
            timings_ms=timings if self.timings else None,
        )
        try:
            validate(instance=report.to_dict(), schema=load_schema("run_report"))
        except ValidationError as e:
            raise MeshFormatError(f"run report does not match its schema: {e.message}") from e
        return report

    def handle_canonical_command(
        self,
        mesh_path: str,
        out: str,
        field_out: str | None = None,
        metric_out: str | None = None,
    ) -> int:
        timings: dict = {}
        start = time.perf_counter()
        mesh = load_mesh(mesh_path)
        timings["load"] = (time.perf_counter() - start) * 1000.0

        run = solve_canonical(mesh, self.config, timings=timings)
        report = self.build_report(run, mesh.source, timings)
        Path(out).write_text(_dump(report.to_dict()) + "\n")

        if field_out:
            if Path(field_out).suffix.lower() == ".json":
                write_face_field_json(field_out, run.result.rho)
            else:
                write_face_field_ply(field_out, run.mesh, run.result.rho, run.result.rho_v)
        if metric_out:
            write_intrinsic_json(conformal_edge_lengths(run.mesh, run.result.rho_v), metric_out)

        if run.result.degenerate:
            _error(f"degenerate conformal class: min_f = {run.result.min_f!r}; report written to {out}")
            return EXIT_DEGENERATE
        return EXIT_OK

    def handle_energy_command(self, mesh_path: str, rho_path: str) -> int:
        mesh = load_mesh(mesh_path)
        run = solve_canonical(mesh, self.config)
        rho = read_face_field(rho_path, run.mesh.face_count)
        energy = energy_of(run.mesh, run.wedge, rho)
        e_min = run.result.e_min
        print(_dump({"energy": energy, "e_min": e_min, "gap": energy - e_min}))
        return EXIT_OK

    def handle_validate_command(self, mesh_path: str) -> int:
        mesh = load_mesh(mesh_path)
        suite = InvariantSuite(mesh, self.config, seed=self.seed, operator_factory=self.operator_factory)
        report = suite.run()
        print(_dump(report.to_dict()))
        if not report.passed:
            _error(f"invariant check failed: {report.first_failure.name}")
            return EXIT_VALIDATION
        return EXIT_OK

    def handle_basis_command(self, mesh_path: str, out: str) -> int:
        mesh = normalize_area(load_mesh(mesh_path))
        basis = harmonic_basis(mesh, self.operator_factory(mesh), self.config)
        data = {"mesh": RunReport.mesh_summary(mesh.source, topology(mesh)), "basis": basis.to_dict()}
        Path(out).write_text(_dump(data) + "\n")
        return EXIT_OK

    def handle_sweep_command(self, shape: str, levels: list[int]) -> int:
        """Canonical pipeline over a refinement ladder of one generated shape."""
        if shape not in SHAPES:
            _error(f"unknown shape {shape!r}; expected one of {', '.join(SHAPES)}")
            return EXIT_USAGE
        rows = []
        previous = None
        for level in levels:
            try:
                mesh = self._generated(shape, level, level)
            except ValueError as e:
                _error(str(e))
                return EXIT_USAGE
            run = solve_canonical(mesh, self.config)
            target = topology(run.mesh).betti1
            e_min = run.result.e_min
            row = {
                "level": level,
                "face_count": run.mesh.face_count,
                "e_min": e_min,
                "c_sq": run.result.c_sq,
                "c_sq_error": abs(run.result.c_sq - target),
                "e_min_relative_change": None,
            }
            if previous is not None and previous != 0.0:
                row["e_min_relative_change"] = abs(e_min - previous) / abs(previous)
            previous = e_min
            rows.append(row)
            logger.info("Sweep level finished", shape=shape, level=level, e_min=e_min)
        print(_dump({"shape": shape, "levels": rows}))
        return EXIT_OK

    def dispatch(self, command: str, handler: Callable[..., int], *args, **kwargs) -> int:
        """Runs a handler and turns library exceptions into exit codes."""
        try:
            return handler(*args, **kwargs)
        except AssumptionError as e:
            _error(str(e))
            return EXIT_ASSUMPTION
        except RhoFieldError as e:
            _error(str(e))
            return EXIT_RHO
        except (MeshFormatError, TopologyError, GeometryError, OSError) as e:
            _error(str(e))
            return EXIT_INPUT
        except DegenerateClassError as e:
            _error(str(e))
            return EXIT_DEGENERATE
        except HarmcanonError as e:
            logger.error("Command failed", command=command, exc_info=True)
            _error(f"{type(e).__name__}: {e}")
            return EXIT_FAILURE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="harmcanon",
        description="Canonical metrics in the conformal class of triangulated surfaces.",
    )
    parser.add_argument("--quiet", action="store_true", help="only log to the log file")
    parser.add_argument("--no-timings", action="store_true", help="omit timings from reports")
    parser.add_argument("--seed", type=int, default=0, help="seed of the random fields used by validate")
    commands = parser.add_subparsers(dest="command", required=True)

    generate = commands.add_parser("generate", help="write a generated mesh")
    generate.add_argument("--shape", required=True)
    generate.add_argument("--resolution", type=int)
    generate.add_argument("--refinement", type=int)
    generate.add_argument("--out", required=True)

    canonical = commands.add_parser("canonical", help="compute the canonical metric")
    canonical.add_argument("--mesh", required=True)
    canonical.add_argument("--out", required=True)
    canonical.add_argument("--field-out")
    canonical.add_argument("--metric-out", help="approximate rescaled edge lengths (intrinsic JSON)")

    energy = commands.add_parser("energy", help="harmonic energy of a conformal factor")
    energy.add_argument("--mesh", required=True)
    energy.add_argument("--rho", required=True)

    validate_cmd = commands.add_parser("validate", help="run the invariant checks")
    validate_cmd.add_argument("--mesh", required=True)

    basis = commands.add_parser("basis", help="dump the harmonic basis")
    basis.add_argument("--mesh", required=True)
    basis.add_argument("--out", required=True)

    sweep = commands.add_parser("sweep", help="canonical pipeline over refinement levels")
    sweep.add_argument("--shape", required=True)
    sweep.add_argument("--levels", type=int, nargs="+", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config()
    except ValueError as e:
        _error(str(e))
        return EXIT_USAGE
    configure_logging(config.log_dir, quiet=args.quiet)
    logger.info("harmcanon starting", command=args.command, version=__version__)

    workbench = Workbench(config=config, seed=args.seed, timings=not args.no_timings)
    command_handlers = {
        "generate": lambda: workbench.handle_generate_command(
            args.shape, args.out, resolution=args.resolution, refinement=args.refinement
        ),
        "canonical": lambda: workbench.handle_canonical_command(
            args.mesh, args.out, field_out=args.field_out, metric_out=args.metric_out
        ),
        "energy": lambda: workbench.handle_energy_command(args.mesh, args.rho),
        "validate": lambda: workbench.handle_validate_command(args.mesh),
        "basis": lambda: workbench.handle_basis_command(args.mesh, args.out),
        "sweep": lambda: workbench.handle_sweep_command(args.shape, args.levels),
    }
    code = workbench.dispatch(args.command, command_handlers[args.command])
    logger.info("harmcanon finished", command=args.command, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
