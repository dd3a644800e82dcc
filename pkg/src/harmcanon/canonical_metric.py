import time
from typing import Callable, NamedTuple, Sequence

import numpy as np
import structlog

from .config import Config
from .core_types.basis import HarmonicBasis
from .core_types.mesh import TriangleMesh
from .core_types.results import CanonicalResult, FField, WedgeData
from .dec_operators import DecOperators, build_operators
from .exceptions import (
    DegenerateClassError,
    DimensionMismatch,
    NonPositiveRhoError,
    NormalizationError,
)
from .harmonic_basis import harmonic_basis
from .mesh_core import face_geometry, normalize_area

logger = structlog.get_logger(__name__)

WEDGE_SCHEME = "whitney"
DEGENERACY_RATIO = 1e-8
NORMALIZATION_TOLERANCE = 1e-8


def whitney_wedge_face(a: Sequence[float], b: Sequence[float]) -> float:
    """Integral of Wa∧Wb over one face.

    ``a`` and ``b`` hold the cochain values on the directed sides 0→1, 1→2
    and 2→0. Each bracket is a 2x2 minor, so swapping the arguments negates
    the result exactly and ``a == b`` gives exactly zero.
    """
    a01, a12, a20 = (float(x) for x in a)
    b01, b12, b20 = (float(x) for x in b)
    return ((a01 * b12 - a12 * b01) + (a12 * b20 - a20 * b12) + (a20 * b01 - a01 * b20)) / 6.0


def face_coefficients(mesh: TriangleMesh, forms) -> np.ndarray:
    """(F, 3, p) cochain values pulled back onto the directed sides of every face."""
    matrix = np.column_stack([_form_values(mesh, form) for form in forms])
    return mesh.face_edge_signs[:, :, None] * matrix[mesh.face_edges]


def _form_values(mesh: TriangleMesh, form) -> np.ndarray:
    values = np.asarray(getattr(form, "values", form), dtype=np.float64)
    if values.shape != (mesh.edge_count,):
        raise DimensionMismatch(
            f"1-form has shape {values.shape}, mesh has {mesh.edge_count} edges."
        )
    return values


def face_wedge_integrals(coefficients: np.ndarray) -> np.ndarray:
    """Vectorized ``whitney_wedge_face`` over all faces and all pairs: (F, p, p)."""
    total = None
    for k in range(3):
        head = coefficients[:, k, :]
        tail = coefficients[:, (k + 1) % 3, :]
        outer = head[:, :, None] * tail[:, None, :]
        minor = outer - np.swapaxes(outer, 1, 2)
        total = minor if total is None else total + minor
    return total / 6.0


def wedge_data(mesh: TriangleMesh, basis: HarmonicBasis | Sequence) -> WedgeData:
    forms = list(basis)
    if not forms:
        raise DimensionMismatch("wedge data needs at least one 1-form.")
    integrals = face_wedge_integrals(face_coefficients(mesh, forms))
    f = integrals / mesh.face_areas[:, None, None]
    c = np.sum(integrals, axis=0)
    logger.debug("Computed wedge data", faces=mesh.face_count, size=len(forms))
    return WedgeData(f=f, c=c)


def f_field(wd: WedgeData, mesh: TriangleMesh) -> FField:
    """Pointwise Frobenius norm of the wedge densities (ordered pairs)."""
    if wd.face_count != mesh.face_count:
        raise DimensionMismatch(f"wedge data covers {wd.face_count} faces, mesh has {mesh.face_count}.")
    values = np.sqrt(np.sum(wd.f * wd.f, axis=(1, 2)))
    integral = float(np.sum(values * mesh.face_areas))
    return FField(values=values, integral_f=integral, min_f=float(np.min(values)))


def canonical_factor(f_values, integral_f: float, n: int = 1) -> np.ndarray:
    """ρ = (f / ∫f)^(1/n), normalized so that the ρ^n-weighted area is one."""
    if isinstance(f_values, FField):
        f_values = f_values.values
    if not integral_f > 0.0:
        raise DegenerateClassError(
            f"integral of f is {integral_f!r}; the wedge data vanishes identically."
        )
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}.")
    ratio = np.asarray(f_values, dtype=np.float64) / integral_f
    return ratio if n == 1 else ratio ** (1.0 / n)


def minimal_energy(integral_f: float, c_sq: float) -> float:
    return integral_f * integral_f - c_sq


def _check_rho(mesh: TriangleMesh, rho, n: int) -> np.ndarray:
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (mesh.face_count,):
        raise DimensionMismatch(f"rho has shape {rho.shape}, mesh has {mesh.face_count} faces.")
    bad = np.flatnonzero(~(rho > 0.0) | ~np.isfinite(rho))
    if bad.size:
        raise NonPositiveRhoError(
            f"rho must be finite and strictly positive; face {int(bad[0])} has {rho[bad[0]]!r}."
        )
    volume = float(np.sum(rho ** n * mesh.face_areas))
    if abs(volume - 1.0) > NORMALIZATION_TOLERANCE:
        raise NormalizationError(f"rho is not normalized: integral of rho^n is {volume!r}.")
    return rho


def energy_of(mesh: TriangleMesh, wd: WedgeData, rho, n: int = 1) -> float:
    """Harmonic energy of ρ·g₀ in the expanded form ∫ f² ρ^(-n) - C²."""
    rho = _check_rho(mesh, rho, n)
    f_values = f_field(wd, mesh).values
    return float(np.sum(f_values * f_values * rho ** (-n) * mesh.face_areas)) - wd.c_sq


def energy_direct(mesh: TriangleMesh, basis: HarmonicBasis | None, wd: WedgeData, rho, n: int = 1) -> float:
    """Squared norm of the residuals f_ij ρ^(-n) - c_ij in the metric ρ·g₀.

    Agrees with ``energy_of`` after expanding the square; computed
    independently as a consistency check.
    """
    if basis is not None and len(basis) != wd.size:
        raise DimensionMismatch(f"basis has {len(basis)} forms, wedge data has size {wd.size}.")
    rho = _check_rho(mesh, rho, n)
    weight = rho ** (-n)
    residual = wd.f * weight[:, None, None] - wd.c[None, :, :]
    measure = rho ** n * mesh.face_areas
    return float(np.sum(np.sum(residual * residual, axis=(1, 2)) * measure))


def harmonic_density(mesh: TriangleMesh, basis: HarmonicBasis | Sequence) -> np.ndarray:
    """Per-face Σ_i |ξ_i|² from the cotan form of the local Dirichlet energy."""
    geometry = face_geometry(mesh)
    # side k is opposite corner (k + 2) % 3
    opposite = np.roll(geometry.cotangents, -2, axis=1)
    coefficients = face_coefficients(mesh, list(basis))
    energy = np.sum(0.5 * opposite[:, :, None] * coefficients * coefficients, axis=(1, 2))
    return energy / mesh.face_areas


def vertex_average(mesh: TriangleMesh, rho) -> np.ndarray:
    """Barycentric-dual-area weighted average of a face field at every vertex."""
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (mesh.face_count,):
        raise DimensionMismatch(f"face field has shape {rho.shape}, mesh has {mesh.face_count} faces.")
    thirds = np.repeat(mesh.face_areas / 3.0, 3)
    corners = mesh.faces.ravel()
    weighted = np.bincount(corners, weights=thirds * np.repeat(rho, 3), minlength=mesh.vertex_count)
    dual_areas = np.bincount(corners, weights=thirds, minlength=mesh.vertex_count)
    return weighted / dual_areas


def conformal_edge_lengths(mesh: TriangleMesh, rho_v) -> TriangleMesh:
    """Approximate realization of ρ·g₀ as edge lengths.

    A per-face factor has no exact edge-length realization; every length is
    multiplied by the square root of the mean factor of its end points. The
    result is tagged ``approximate`` in its source.
    """
    rho_v = np.asarray(rho_v, dtype=np.float64)
    if rho_v.shape != (mesh.vertex_count,):
        raise DimensionMismatch(f"vertex field has shape {rho_v.shape}, mesh has {mesh.vertex_count} vertices.")
    if np.any(~(rho_v > 0.0)):
        raise NonPositiveRhoError("vertex factor must be strictly positive.")
    factor = np.sqrt(0.5 * (rho_v[mesh.edges[:, 0]] + rho_v[mesh.edges[:, 1]]))
    lengths = mesh.edge_lengths * factor
    side_keys = mesh.face_edges.tolist()
    rescaled = TriangleMesh(
        mesh.faces,
        side_keys,
        {e: float(length) for e, length in enumerate(lengths)},
        vertex_count=mesh.vertex_count,
        source=f"{mesh.source or 'mesh'}+conformal(approximate)",
    )
    return normalize_area(rescaled)


class CanonicalRun(NamedTuple):
    mesh: TriangleMesh
    operators: DecOperators
    basis: HarmonicBasis
    wedge: WedgeData
    result: CanonicalResult


def _timed(timings: dict | None, stage: str, start: float):
    if timings is not None:
        timings[stage] = (time.perf_counter() - start) * 1000.0


def solve_canonical(
    mesh: TriangleMesh,
    config: Config | None = None,
    timings: dict | None = None,
    operator_factory: Callable[[TriangleMesh], DecOperators] = build_operators,
) -> CanonicalRun:
    """Runs the full pipeline and keeps the intermediate objects.

    Stage durations in milliseconds are recorded into ``timings`` when given;
    ``operator_factory`` assembles the operator bundle of the normalized mesh.
    """
    start = time.perf_counter()
    normalized = normalize_area(mesh)
    operators = operator_factory(normalized)
    _timed(timings, "operators", start)

    start = time.perf_counter()
    basis = harmonic_basis(normalized, operators, config)
    _timed(timings, "harmonic_basis", start)

    start = time.perf_counter()
    wd = wedge_data(normalized, basis)
    field = f_field(wd, normalized)
    c_sq = wd.c_sq
    degenerate = field.min_f < DEGENERACY_RATIO * (field.integral_f / normalized.total_area)
    rho = canonical_factor(field, field.integral_f, n=1)
    e_min = minimal_energy(field.integral_f, c_sq)
    density = harmonic_density(normalized, basis)
    result = CanonicalResult(
        f_field=field.values,
        integral_f=field.integral_f,
        c_matrix=wd.c,
        c_sq=c_sq,
        rho=rho,
        e_min=e_min,
        min_f=field.min_f,
        n=1,
        degenerate=bool(degenerate),
        c_singular_values=np.linalg.svd(wd.c, compute_uv=False),
        min_harmonic_density=float(np.min(density)),
        rho_v=vertex_average(normalized, rho),
    )
    _timed(timings, "canonical_factor", start)

    if result.degenerate:
        logger.warning(
            "Canonical factor is degenerate: f nearly vanishes on some face",
            min_f=result.min_f,
            integral_f=result.integral_f,
        )
    logger.info(
        "Computed canonical metric",
        e_min=result.e_min,
        c_sq=result.c_sq,
        integral_f=result.integral_f,
        degenerate=result.degenerate,
    )
    return CanonicalRun(mesh=normalized, operators=operators, basis=basis, wedge=wd, result=result)


def canonical_metric(mesh: TriangleMesh, config: Config | None = None) -> CanonicalResult:
    return solve_canonical(mesh, config).result
