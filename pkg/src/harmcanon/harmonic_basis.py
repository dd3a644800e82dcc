from collections import deque
from typing import Sequence

import numpy as np
import structlog
from scipy.sparse import linalg as sparse_linalg

from .config import Config, load_config
from .core_types.basis import HarmonicBasis, TreeCotree
from .core_types.forms import DiscreteForm
from .core_types.mesh import TriangleMesh
from .dec_operators import DecOperators, build_operators
from .exceptions import (
    AssumptionError,
    PreconditionError,
    RankDeficiencyError,
    SolverError,
    TopologyError,
)
from .mesh_core import topology

logger = structlog.get_logger(__name__)

RANK_TOLERANCE = 1e-12
CLOSEDNESS_TOLERANCE = 1e-12


def _sorted_adjacency(node_count: int, a: np.ndarray, b: np.ndarray, edge_ids: np.ndarray) -> list[list[tuple[int, int]]]:
    """Neighbour lists (neighbour, edge) in ascending order, for both directions of each link."""
    rows = np.concatenate([a, b])
    neighbours = np.concatenate([b, a])
    ids = np.concatenate([edge_ids, edge_ids])
    order = np.lexsort((ids, neighbours, rows))
    adjacency: list[list[tuple[int, int]]] = [[] for _ in range(node_count)]
    for i in order:
        adjacency[rows[i]].append((int(neighbours[i]), int(ids[i])))
    return adjacency


def _bfs_tree(node_count: int, adjacency: list[list[tuple[int, int]]]) -> tuple[np.ndarray, np.ndarray]:
    parent = np.full(node_count, -1, dtype=np.int64)
    parent_edge = np.full(node_count, -1, dtype=np.int64)
    seen = np.zeros(node_count, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for neighbour, edge in adjacency[node]:
            if not seen[neighbour]:
                seen[neighbour] = True
                parent[neighbour] = node
                parent_edge[neighbour] = edge
                queue.append(neighbour)
    return parent, parent_edge


def tree_cotree(mesh: TriangleMesh) -> TreeCotree:
    """Breadth-first tree from vertex 0 and cotree from face 0, ascending neighbour order."""
    edge_ids = np.arange(mesh.edge_count)
    vertex_adjacency = _sorted_adjacency(mesh.vertex_count, mesh.edges[:, 0], mesh.edges[:, 1], edge_ids)
    vertex_parent, vertex_parent_edge = _bfs_tree(mesh.vertex_count, vertex_adjacency)

    in_tree = np.zeros(mesh.edge_count, dtype=bool)
    in_tree[vertex_parent_edge[vertex_parent_edge >= 0]] = True

    dual_ids = edge_ids[~in_tree]
    face_adjacency = _sorted_adjacency(
        mesh.face_count,
        mesh.edge_faces[dual_ids, 0],
        mesh.edge_faces[dual_ids, 1],
        dual_ids,
    )
    face_parent, face_parent_edge = _bfs_tree(mesh.face_count, face_adjacency)

    in_cotree = np.zeros(mesh.edge_count, dtype=bool)
    in_cotree[face_parent_edge[face_parent_edge >= 0]] = True
    generators = tuple(int(e) for e in np.flatnonzero(~in_tree & ~in_cotree))

    expected = topology(mesh).betti1
    if len(generators) != expected:
        raise TopologyError(f"tree-cotree left {len(generators)} edges, expected {expected}.")
    logger.debug("Built tree-cotree decomposition", generator_edges=generators)
    return TreeCotree(
        vertex_parent=vertex_parent,
        vertex_parent_edge=vertex_parent_edge,
        face_parent=face_parent,
        face_parent_edge=face_parent_edge,
        generator_edges=generators,
    )


def _require_genus(mesh: TriangleMesh) -> int:
    genus = topology(mesh).genus
    if genus < 1:
        raise AssumptionError(
            "the surface has genus 0: there are no harmonic 1-forms, so no canonical metric exists."
        )
    return genus


def _face_sign(mesh: TriangleMesh, face: int, edge: int) -> int:
    return 1 if mesh.edge_faces[edge, 0] == face else -1


def homology_generators(mesh: TriangleMesh, decomposition: TreeCotree | None = None) -> list[DiscreteForm]:
    """One closed 1-cochain per generator edge: ±1 on the edges its dual cycle crosses.

    The dual cycle leaves the face traversing the generator edge forwards,
    enters the other face, walks the cotree up to the root and back down.
    Every crossing from face A into face B adds A's orientation sign of the
    crossed edge, so each face is entered and left equally often and d1ω = 0
    holds in integer arithmetic.
    """
    _require_genus(mesh)
    decomposition = tree_cotree(mesh) if decomposition is None else decomposition
    generators = []
    for edge in decomposition.generator_edges:
        omega = np.zeros(mesh.edge_count)
        leaving, entering = int(mesh.edge_faces[edge, 0]), int(mesh.edge_faces[edge, 1])
        omega[edge] += 1.0
        face = entering
        while decomposition.face_parent[face] >= 0:
            parent_edge = decomposition.face_parent_edge[face]
            omega[parent_edge] += _face_sign(mesh, face, parent_edge)
            face = decomposition.face_parent[face]
        face = leaving
        while decomposition.face_parent[face] >= 0:
            parent_edge = decomposition.face_parent_edge[face]
            omega[parent_edge] -= _face_sign(mesh, face, parent_edge)
            face = decomposition.face_parent[face]
        generators.append(DiscreteForm(1, omega))
    logger.info("Built homology generators", count=len(generators))
    return generators


def homology_cycles(mesh: TriangleMesh, decomposition: TreeCotree | None = None) -> list[np.ndarray]:
    """Primal generator cycles as edge chains (coefficient per canonical edge).

    Cycle i runs along generator edge i from its low to its high end point,
    then through the tree back to its start.
    """
    decomposition = tree_cotree(mesh) if decomposition is None else decomposition

    def walk_to_root(chain: np.ndarray, vertex: int, sign: float):
        while decomposition.vertex_parent[vertex] >= 0:
            edge = decomposition.vertex_parent_edge[vertex]
            direction = 1.0 if mesh.edges[edge, 0] == vertex else -1.0
            chain[edge] += sign * direction
            vertex = decomposition.vertex_parent[vertex]

    cycles = []
    for edge in decomposition.generator_edges:
        chain = np.zeros(mesh.edge_count)
        low, high = int(mesh.edges[edge, 0]), int(mesh.edges[edge, 1])
        chain[edge] += 1.0
        walk_to_root(chain, high, 1.0)
        walk_to_root(chain, low, -1.0)
        cycles.append(chain)
    return cycles


def period_matrix(cycles: Sequence[np.ndarray], forms: Sequence[DiscreteForm]) -> np.ndarray:
    """P[i, j] = integral of form j over cycle i."""
    return np.array([[float(np.dot(cycle, form.values)) for form in forms] for cycle in cycles])


class HarmonicProjector:
    """Projects closed 1-forms onto their harmonic representatives.

    Solves (d0ᵀ★1d0) u = d0ᵀ★1ω and returns ω - d0u. The direct solver grounds
    vertex 0 and factorizes once per mesh; the iterative solver runs Jacobi
    preconditioned CG on the singular but consistent system.
    """

    def __init__(self, operators: DecOperators, config: Config | None = None):
        self.operators = operators
        self.config = load_config() if config is None else config
        self.laplacian = operators.laplacian0
        self._factor = None
        if self.config.solver_method == "direct":
            reduced = self.laplacian[1:, 1:].tocsc()
            try:
                self._factor = sparse_linalg.splu(reduced)
            except RuntimeError as e:
                raise SolverError(f"factorization of the grounded Laplacian failed: {e}") from e
        logger.debug(
            "HarmonicProjector ready",
            solver=self.config.solver_method,
            tolerance=self.config.solver_tol,
            unknowns=self.laplacian.shape[0],
        )

    def _solve(self, rhs: np.ndarray) -> tuple[np.ndarray, int]:
        if self._factor is not None:
            reduced = self._factor.solve(rhs[1:])
            if not np.all(np.isfinite(reduced)):
                raise SolverError("direct solve produced non-finite values.")
            return np.concatenate([[0.0], reduced]), 0

        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        diagonal = self.laplacian.diagonal()
        if np.any(diagonal <= 0.0):
            raise SolverError("Jacobi preconditioner needs a positive Laplacian diagonal.")
        preconditioner = sparse_linalg.LinearOperator(
            self.laplacian.shape, matvec=lambda x: x / diagonal, dtype=np.float64
        )
        # cg stops on the 2-norm; acceptance is measured in the max norm
        rhs_norm = np.linalg.norm(rhs)
        rtol = self.config.solver_tol
        if rhs_norm > 0.0:
            rtol *= np.max(np.abs(rhs)) / rhs_norm
        solution, info = sparse_linalg.cg(
            self.laplacian,
            rhs,
            rtol=rtol,
            atol=0.0,
            maxiter=self.config.max_iterations,
            M=preconditioner,
            callback=count,
        )
        if info > 0:
            raise SolverError(f"CG did not converge within {info} iterations.")
        if info < 0:
            raise SolverError("CG broke down.")
        return solution, iterations

    def project(self, omega: DiscreteForm) -> tuple[DiscreteForm, np.ndarray, int]:
        """Returns (ξ, gauged potential u, solver iterations)."""
        mesh = self.operators.mesh
        omega = omega.check(mesh, 1)
        curl = self.operators.d1 @ omega.values
        scale = max(1.0, float(np.max(np.abs(omega.values), initial=0.0)))
        if np.max(np.abs(curl), initial=0.0) > CLOSEDNESS_TOLERANCE * scale:
            raise PreconditionError(
                f"harmonic projection needs a closed 1-form; max |d1 ω| = {np.max(np.abs(curl)):.3e}."
            )

        rhs = self.operators.weak_divergence(omega)
        potential, iterations = self._solve(rhs)
        residual = np.max(np.abs(self.laplacian @ potential - rhs), initial=0.0)
        allowed = self.config.solver_tol * np.max(np.abs(rhs), initial=0.0) + 1e-12
        if not residual <= allowed:
            raise SolverError(
                f"Poisson residual {residual:.3e} exceeds the tolerance {allowed:.3e}."
            )
        xi = omega.values - self.operators.d0 @ potential

        weights = self.operators.star0.diagonal()
        gauged = potential - np.sum(weights * potential) / np.sum(weights)
        logger.debug("Projected closed form", residual=float(residual), iterations=iterations)
        return DiscreteForm(1, xi), gauged, iterations


def harmonic_projection(
    mesh: TriangleMesh,
    omega: DiscreteForm,
    operators: DecOperators | None = None,
    config: Config | None = None,
) -> DiscreteForm:
    operators = build_operators(mesh) if operators is None else operators
    xi, _, _ = HarmonicProjector(operators, config).project(omega)
    return xi


def orthonormalize(
    mesh: TriangleMesh,
    forms: Sequence[DiscreteForm],
    operators: DecOperators | None = None,
) -> list[DiscreteForm]:
    """Modified Gram–Schmidt under the ★1 inner product, in the given order.

    Each vector is swept twice against the accepted ones, which keeps the
    Gram matrix at rounding level for ill-conditioned inputs.
    """
    operators = build_operators(mesh) if operators is None else operators
    vectors = [form.check(mesh, 1).values for form in forms]
    if not vectors:
        return []
    initial_scale = max(np.sqrt(abs(operators.inner_product_1(v, v))) for v in vectors)
    if initial_scale == 0.0:
        raise RankDeficiencyError("all input forms vanish.")

    accepted: list[np.ndarray] = []
    for index, vector in enumerate(vectors):
        v = vector.copy()
        for _ in range(2):
            for q in accepted:
                v = v - operators.inner_product_1(q, v) * q
        norm_squared = operators.inner_product_1(v, v)
        if not norm_squared > (RANK_TOLERANCE * initial_scale) ** 2:
            raise RankDeficiencyError(
                f"form {index} is numerically dependent on the previous ones "
                f"(residual norm² {norm_squared:.3e}, scale {initial_scale:.3e})."
            )
        accepted.append(v / np.sqrt(norm_squared))
    return [DiscreteForm(1, v) for v in accepted]


def gram_matrix(operators: DecOperators, forms: Sequence[DiscreteForm]) -> np.ndarray:
    return np.array([[operators.inner_product_1(a, b) for b in forms] for a in forms])


def harmonic_basis(
    mesh: TriangleMesh,
    operators: DecOperators | None = None,
    config: Config | None = None,
) -> HarmonicBasis:
    _require_genus(mesh)
    operators = build_operators(mesh) if operators is None else operators
    decomposition = tree_cotree(mesh)
    generators = homology_generators(mesh, decomposition)

    projector = HarmonicProjector(operators, config)
    projected = []
    iterations = []
    for omega in generators:
        xi, _, count = projector.project(omega)
        projected.append(xi)
        iterations.append(count)

    forms = orthonormalize(mesh, projected, operators)
    gram = gram_matrix(operators, forms)
    gram_residual = float(np.max(np.abs(gram - np.eye(len(forms)))))
    closedness = max(float(np.max(np.abs(operators.d1 @ form.values))) for form in forms)
    coclosedness = max(float(np.max(np.abs(operators.weak_divergence(form)))) for form in forms)

    basis = HarmonicBasis(
        forms=tuple(forms),
        gram_residual=gram_residual,
        closedness_residual=closedness,
        coclosedness_residual=coclosedness,
        solver_iterations=tuple(iterations),
        generator_edges=decomposition.generator_edges,
    )
    logger.info(
        "Computed harmonic basis",
        count=len(basis),
        gram_residual=gram_residual,
        closedness_residual=closedness,
        coclosedness_residual=coclosedness,
    )
    return basis
