import numpy as np
import structlog
from scipy import sparse

from .core_types.forms import DiscreteForm, SparseOperator, assemble_operator
from .core_types.mesh import TriangleMesh
from .exceptions import DimensionMismatch
from .mesh_core import face_geometry

logger = structlog.get_logger(__name__)

STAR_SCHEME = "cotan-lumped-barycentric"
# weights within rounding of zero (right angles) are not reported as negative
NEGATIVE_WEIGHT_TOLERANCE = 1e-12


def d0(mesh: TriangleMesh) -> SparseOperator:
    """Exterior derivative on 0-forms: (d0 u)_e = u_high - u_low."""
    edge_ids = np.arange(mesh.edge_count)
    rows = np.concatenate([edge_ids, edge_ids])
    cols = np.concatenate([mesh.edges[:, 0], mesh.edges[:, 1]])
    values = np.concatenate([-np.ones(mesh.edge_count), np.ones(mesh.edge_count)])
    return assemble_operator(rows, cols, values, (mesh.edge_count, mesh.vertex_count))


def d1(mesh: TriangleMesh) -> SparseOperator:
    """Exterior derivative on 1-forms: signed sum around each counterclockwise face."""
    rows = np.repeat(np.arange(mesh.face_count), 3)
    cols = mesh.face_edges.ravel()
    values = mesh.face_edge_signs.ravel().astype(np.float64)
    return assemble_operator(rows, cols, values, (mesh.face_count, mesh.edge_count))


def star0(mesh: TriangleMesh) -> SparseOperator:
    """Barycentric dual areas: a third of every incident face area."""
    dual_areas = np.bincount(
        mesh.faces.ravel(),
        weights=np.repeat(mesh.face_areas / 3.0, 3),
        minlength=mesh.vertex_count,
    )
    return sparse.diags(dual_areas, format="csr")


def cotan_weights(mesh: TriangleMesh) -> np.ndarray:
    """(cot α + cot β) / 2 per edge, from the shape lengths only."""
    cotangents = face_geometry(mesh).cotangents
    # side k is opposite corner (k + 2) % 3
    opposite = np.roll(cotangents, -2, axis=1)
    return np.bincount(
        mesh.face_edges.ravel(),
        weights=0.5 * opposite.ravel(),
        minlength=mesh.edge_count,
    )


def star1(mesh: TriangleMesh) -> SparseOperator:
    weights = cotan_weights(mesh)
    negative = int(np.count_nonzero(weights < -NEGATIVE_WEIGHT_TOLERANCE * np.max(np.abs(weights))))
    if negative:
        logger.warning(
            "Negative cotan weights: mesh is not Delaunay",
            negative_edges=negative,
            min_weight=float(weights.min()),
        )
    return sparse.diags(weights, format="csr")


def star2(mesh: TriangleMesh) -> SparseOperator:
    return sparse.diags(1.0 / mesh.face_areas, format="csr")


def _values(form: DiscreteForm | np.ndarray, mesh: TriangleMesh, degree: int) -> np.ndarray:
    if isinstance(form, DiscreteForm):
        return form.check(mesh, degree).values
    values = np.asarray(form, dtype=np.float64)
    expected = (mesh.vertex_count, mesh.edge_count, mesh.face_count)[degree]
    if values.shape != (expected,):
        raise DimensionMismatch(f"expected {expected} values for a {degree}-form, got shape {values.shape}.")
    return values


def _weighted_dot(weights: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    # a * b is commutative in floating point, so the result is symmetric bitwise
    return float(np.sum(weights * (a * b)))


def inner_product_0(mesh: TriangleMesh, u, v, star: SparseOperator | None = None) -> float:
    star = star0(mesh) if star is None else star
    return _weighted_dot(star.diagonal(), _values(u, mesh, 0), _values(v, mesh, 0))


def inner_product_1(mesh: TriangleMesh, alpha, beta, star: SparseOperator | None = None) -> float:
    star = star1(mesh) if star is None else star
    return _weighted_dot(star.diagonal(), _values(alpha, mesh, 1), _values(beta, mesh, 1))


def laplacian0(mesh: TriangleMesh, star: SparseOperator | None = None) -> SparseOperator:
    """Weak-form cotan Laplacian d0ᵀ ★1 d0 (no ★0 inverse)."""
    derivative = d0(mesh)
    star = star1(mesh) if star is None else star
    return (derivative.T @ star @ derivative).tocsr()


def codifferential1(mesh: TriangleMesh, alpha, operators: "DecOperators | None" = None) -> DiscreteForm:
    """δα = ★0⁻¹ d0ᵀ ★1 α, the L² adjoint of d0."""
    operators = build_operators(mesh) if operators is None else operators
    return operators.codifferential1(alpha)


class DecOperators:
    """The operator bundle of one mesh, assembled once and shared read-only."""

    def __init__(
        self,
        mesh: TriangleMesh,
        d0: SparseOperator,
        d1: SparseOperator,
        star0: SparseOperator,
        star1: SparseOperator,
        star2: SparseOperator,
    ):
        self.mesh = mesh
        self.d0 = d0
        self.d1 = d1
        self.star0 = star0
        self.star1 = star1
        self.star2 = star2
        self._laplacian0 = None

    @property
    def laplacian0(self) -> SparseOperator:
        if self._laplacian0 is None:
            self._laplacian0 = (self.d0.T @ self.star1 @ self.d0).tocsr()
        return self._laplacian0

    def inner_product_0(self, u, v) -> float:
        return inner_product_0(self.mesh, u, v, star=self.star0)

    def inner_product_1(self, alpha, beta) -> float:
        return inner_product_1(self.mesh, alpha, beta, star=self.star1)

    def weak_divergence(self, alpha) -> np.ndarray:
        """d0ᵀ ★1 α, the codifferential before the ★0 inverse."""
        return self.d0.T @ (self.star1 @ _values(alpha, self.mesh, 1))

    def codifferential1(self, alpha) -> DiscreteForm:
        return DiscreteForm(0, self.weak_divergence(alpha) / self.star0.diagonal())

    def __repr__(self):
        return f"DecOperators(scheme={STAR_SCHEME!r}, mesh={self.mesh!r})"


def build_operators(mesh: TriangleMesh) -> DecOperators:
    operators = DecOperators(
        mesh=mesh,
        d0=d0(mesh),
        d1=d1(mesh),
        star0=star0(mesh),
        star1=star1(mesh),
        star2=star2(mesh),
    )
    logger.debug("Assembled DEC operators", mesh=repr(mesh))
    return operators
