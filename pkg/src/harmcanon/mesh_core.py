import numpy as np
import structlog

from .core_types.mesh import FaceGeometry, MeshTopology, TriangleMesh, heron_areas, strict_triangle_violations
from .exceptions import GeometryError

logger = structlog.get_logger(__name__)


def topology(mesh: TriangleMesh) -> MeshTopology:
    chi = mesh.vertex_count - mesh.edge_count + mesh.face_count
    genus = (2 - chi) // 2
    return MeshTopology(
        vertex_count=mesh.vertex_count,
        edge_count=mesh.edge_count,
        face_count=mesh.face_count,
        euler_characteristic=chi,
        genus=genus,
        betti1=2 * genus,
    )


def _corner_geometry(side_lengths: np.ndarray, shape_areas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angles and cotangents at the three corners of every face.

    Corner k sits between side k and side k + 2; side k + 1 is opposite.
    cot = (adjacent² + adjacent² - opposite²) / (4 * area) is invariant under
    scaling of the lengths, as are the angles derived from it.
    """
    squared = side_lengths * side_lengths
    adjacent = squared + np.roll(squared, 1, axis=1)
    opposite = np.roll(squared, -1, axis=1)
    numerator = adjacent - opposite
    four_area = 4.0 * shape_areas[:, None]
    cotangents = numerator / four_area
    angles = np.arctan2(np.broadcast_to(four_area, numerator.shape), numerator)
    return angles, cotangents


def triangle_geometry(a: float, b: float, c: float) -> tuple[float, tuple[float, float, float]]:
    """Area and the angles opposite sides a, b and c of a single triangle."""
    sides = np.array([[a, b, c]], dtype=np.float64)
    if not np.all(np.isfinite(sides)) or np.any(sides <= 0.0):
        raise GeometryError(f"side lengths must be positive, got {(a, b, c)}.")
    if strict_triangle_violations(sides).size:
        raise GeometryError(f"lengths {(a, b, c)} violate the strict triangle inequality.")
    # sides a, b, c as sides 0, 1, 2: the corner opposite side k is corner k + 2
    area = heron_areas(sides)
    angles, _ = _corner_geometry(sides, area)
    return float(area[0]), (float(angles[0, 2]), float(angles[0, 0]), float(angles[0, 1]))


def face_geometry(mesh: TriangleMesh) -> FaceGeometry:
    side_lengths = mesh.shape_side_lengths
    if strict_triangle_violations(side_lengths).size:
        raise GeometryError("mesh has a face violating the strict triangle inequality.")
    shape_areas = mesh.shape_face_areas
    if np.any(shape_areas <= 0.0):
        raise GeometryError("mesh has a face of zero area.")
    angles, cotangents = _corner_geometry(side_lengths, shape_areas)
    return FaceGeometry(areas=mesh.face_areas, angles=angles, cotangents=cotangents)


def vertex_angle_sums(mesh: TriangleMesh) -> np.ndarray:
    """Sum of the corner angles around every vertex (2π at flat vertices)."""
    geometry = face_geometry(mesh)
    return np.bincount(mesh.faces.ravel(), weights=geometry.angles.ravel(), minlength=mesh.vertex_count)


def scale_mesh(mesh: TriangleMesh, k: float) -> TriangleMesh:
    """Multiplies every edge length by the positive constant ``k``."""
    if not k > 0.0:
        raise GeometryError(f"scale factor must be positive, got {k}.")
    return mesh.with_length_scale(mesh.length_scale * k)


def normalize_area(mesh: TriangleMesh) -> TriangleMesh:
    """Rescales the lengths so that the total area is one.

    The new scale is computed from the shape lengths alone, so meshes that
    differ only by a uniform scale normalize to identical meshes.
    """
    if mesh.total_area == 1.0:
        return mesh
    shape_total = float(np.sum(mesh.shape_face_areas))
    normalized = mesh.with_length_scale(1.0 / np.sqrt(shape_total))
    logger.debug(
        "Normalized mesh area",
        previous_area=mesh.total_area,
        length_scale=normalized.length_scale,
    )
    return normalized
