from typing import Callable

import numpy as np
import structlog

from .canonical_metric import CanonicalRun, canonical_metric, energy_direct, energy_of, solve_canonical
from .config import Config
from .core_types.mesh import TriangleMesh
from .core_types.report import CheckResult, ValidationReport
from .dec_operators import NEGATIVE_WEIGHT_TOLERANCE, DecOperators, build_operators, star0, star1
from .exceptions import AssumptionError, HarmcanonError
from .mesh_core import normalize_area, scale_mesh, topology

logger = structlog.get_logger(__name__)

SCALE_FACTORS = (0.1, 3.7, 42.0)
ADJOINTNESS_TOLERANCE = 1e-12
GRAM_TOLERANCE = 1e-10
CLOSEDNESS_TOLERANCE = 1e-10
COCLOSEDNESS_TOLERANCE = 1e-8
ANTISYMMETRY_TOLERANCE = 1e-14
MINIMALITY_TOLERANCE = 1e-10
UNIQUENESS_GAP = 1e-6
UNIQUENESS_DISTANCE = 0.1
SCALE_TOLERANCE = 1e-12


def rescaled_mesh(mesh: TriangleMesh, k: float) -> TriangleMesh:
    """Rebuilds ``mesh`` from its edge lengths multiplied by ``k``.

    Meshes with several edges between one vertex pair cannot be rebuilt from
    keyed lengths and fall back to replacing the length scale.
    """
    if not mesh.is_simplicial:
        return scale_mesh(mesh, k)
    lengths = {key: k * length for key, length in mesh.edge_length_map().items()}
    return TriangleMesh.from_edge_lengths(mesh.faces, lengths, vertex_count=mesh.vertex_count, source=mesh.source)


def random_rho(mesh: TriangleMesh, base: np.ndarray, rng: np.random.Generator, spread: float = 0.5) -> np.ndarray:
    """Log-normal perturbation of ``base``, normalized to unit ρ-weighted area."""
    rho = base * np.exp(spread * rng.standard_normal(mesh.face_count))
    return rho / np.sum(rho * mesh.face_areas)


class InvariantSuite:
    """Structural, numerical and variational checks of one mesh.

    ``operator_factory`` builds the operator bundle under test; the adjointness
    check compares it against inner products assembled directly from the
    geometry, so a corrupted Hodge star shows up there.
    """

    def __init__(
        self,
        mesh: TriangleMesh,
        config: Config | None = None,
        seed: int = 0,
        samples: int = 100,
        operator_factory: Callable[[TriangleMesh], DecOperators] = build_operators,
    ):
        self.mesh = normalize_area(mesh)
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.samples = samples
        self.operator_factory = operator_factory
        self.operators = operator_factory(self.mesh)
        self._run: CanonicalRun | None = None

    @property
    def run_data(self) -> CanonicalRun:
        if self._run is None:
            self._run = solve_canonical(self.mesh, self.config, operator_factory=self.operator_factory)
        return self._run

    def check_d_squared(self) -> CheckResult:
        product = (self.operators.d1 @ self.operators.d0).toarray()
        value = float(np.max(np.abs(product), initial=0.0))
        return CheckResult("d_squared", value == 0.0, value, 0.0)

    def check_adjointness(self) -> CheckResult:
        weights0 = star0(self.mesh).diagonal()
        weights1 = star1(self.mesh).diagonal()
        worst = 0.0
        for _ in range(self.samples):
            u = self.rng.standard_normal(self.mesh.vertex_count)
            alpha = self.rng.standard_normal(self.mesh.edge_count)
            du = self.operators.d0 @ u
            delta = self.operators.codifferential1(alpha).values
            lhs = np.sum(weights1 * (du * alpha))
            rhs = np.sum(weights0 * (u * delta))
            scale = np.sum(np.abs(weights1 * du * alpha)) + np.finfo(float).tiny
            worst = max(worst, abs(lhs - rhs) / scale)
        return CheckResult("adjointness", worst <= ADJOINTNESS_TOLERANCE, worst, ADJOINTNESS_TOLERANCE)

    def check_laplacian_psd(self) -> CheckResult:
        laplacian = self.operators.laplacian0
        diagonal = laplacian.diagonal()
        scale = float(np.max(np.abs(diagonal)))
        row_sums = float(np.max(np.abs(laplacian.sum(axis=1))))
        asymmetry = float(abs(laplacian - laplacian.T).max())
        worst_quadratic = 0.0
        for _ in range(self.samples):
            u = self.rng.standard_normal(self.mesh.vertex_count)
            worst_quadratic = min(worst_quadratic, float(u @ (laplacian @ u)) / (scale * (u @ u)))
        value = max(row_sums / scale, asymmetry / scale, -worst_quadratic)
        weights = star1(self.mesh).diagonal()
        negative = np.any(weights < -NEGATIVE_WEIGHT_TOLERANCE * np.max(np.abs(weights)))
        detail = "negative cotan weights" if negative else ""
        return CheckResult("laplacian_psd", value <= 1e-12, value, 1e-12, detail=detail)

    def check_gram(self) -> CheckResult:
        value = self.run_data.basis.gram_residual
        return CheckResult("gram", value <= GRAM_TOLERANCE, value, GRAM_TOLERANCE)

    def check_closedness(self) -> CheckResult:
        value = self.run_data.basis.closedness_residual
        return CheckResult("closedness", value <= CLOSEDNESS_TOLERANCE, value, CLOSEDNESS_TOLERANCE)

    def check_coclosedness(self) -> CheckResult:
        value = self.run_data.basis.coclosedness_residual
        return CheckResult("coclosedness", value <= COCLOSEDNESS_TOLERANCE, value, COCLOSEDNESS_TOLERANCE)

    def check_wedge_antisymmetry(self) -> CheckResult:
        wd = self.run_data.wedge
        diagonal = max(
            float(np.max(np.abs(np.diagonal(wd.f, axis1=1, axis2=2)))),
            float(np.max(np.abs(np.diag(wd.c)))),
        )
        value = max(wd.antisymmetry_residual(), diagonal)
        return CheckResult("wedge_antisymmetry", value <= ANTISYMMETRY_TOLERANCE, value, ANTISYMMETRY_TOLERANCE)

    def _sample_base(self) -> np.ndarray:
        result = self.run_data.result
        return np.ones(self.mesh.face_count) if result.degenerate else result.rho

    def check_energy_consistency(self) -> CheckResult:
        run = self.run_data
        fields = [] if run.result.degenerate else [run.result.rho]
        fields.extend(random_rho(self.mesh, self._sample_base(), self.rng) for _ in range(5))
        bound = 1e-10 * (1.0 + abs(run.result.e_min))
        worst = 0.0
        for rho in fields:
            expanded = energy_of(run.mesh, run.wedge, rho)
            direct = energy_direct(run.mesh, run.basis, run.wedge, rho)
            worst = max(worst, abs(expanded - direct))
        return CheckResult("energy_consistency", worst <= bound, worst, bound)

    def check_minimality(self) -> CheckResult:
        run = self.run_data
        e_min = run.result.e_min
        lowest_gap = np.inf
        strict_violations = 0
        for _ in range(self.samples):
            rho = random_rho(self.mesh, self._sample_base(), self.rng)
            gap = energy_of(run.mesh, run.wedge, rho) - e_min
            lowest_gap = min(lowest_gap, gap)
            far = np.max(np.abs(rho - run.result.rho)) >= UNIQUENESS_DISTANCE
            if far and not run.result.degenerate and gap < UNIQUENESS_GAP:
                strict_violations += 1
        passed = lowest_gap >= -MINIMALITY_TOLERANCE and strict_violations == 0
        detail = f"{strict_violations} distant fields within the uniqueness gap" if strict_violations else ""
        return CheckResult("minimality", passed, float(lowest_gap), -MINIMALITY_TOLERANCE, detail=detail)

    def check_scale_invariance(self) -> CheckResult:
        reference = self.run_data.result
        worst = 0.0
        for k in SCALE_FACTORS:
            scaled = canonical_metric(rescaled_mesh(self.mesh, k), self.config)
            worst = max(
                worst,
                float(np.max(np.abs(scaled.rho - reference.rho))),
                abs(scaled.e_min - reference.e_min),
                abs(scaled.c_sq - reference.c_sq),
            )
        return CheckResult("scale_invariance", worst <= SCALE_TOLERANCE, worst, SCALE_TOLERANCE)

    def check_c_sq_relative_error(self) -> CheckResult:
        target = float(topology(self.mesh).betti1)
        value = abs(self.run_data.result.c_sq - target) / target
        return CheckResult("c_sq_relative_error", True, value, None, informational=True)

    def checks(self) -> list[Callable[[], CheckResult]]:
        return [
            self.check_d_squared,
            self.check_adjointness,
            self.check_laplacian_psd,
            self.check_gram,
            self.check_closedness,
            self.check_coclosedness,
            self.check_wedge_antisymmetry,
            self.check_energy_consistency,
            self.check_minimality,
            self.check_scale_invariance,
            self.check_c_sq_relative_error,
        ]

    def run(self) -> ValidationReport:
        """Runs every check in order. AssumptionError (genus 0) propagates."""
        report = ValidationReport()
        for check in self.checks():
            name = check.__name__.removeprefix("check_")
            try:
                result = check()
            except AssumptionError:
                raise
            except HarmcanonError as e:
                result = CheckResult(name, False, detail=f"{type(e).__name__}: {e}")
            report.checks.append(result)
            logger.info("Invariant check finished", check=result.name, passed=result.passed, value=result.value)
        if not report.passed:
            logger.warning("Invariant validation failed", first_failure=report.first_failure.name)
        return report
