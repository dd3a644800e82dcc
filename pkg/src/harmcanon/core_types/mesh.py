import copy
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

import numpy as np
import structlog
from scipy import sparse
from scipy.sparse import csgraph

from ..exceptions import GeometryError, MeshFormatError, TopologyError

logger = structlog.get_logger(__name__)


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def heron_areas(side_lengths: np.ndarray) -> np.ndarray:
    """Triangle areas from an (F, 3) array of side lengths.

    Uses the sorted-length arrangement of Heron's formula, which stays accurate
    for needle-shaped triangles. Callers are expected to have checked the
    triangle inequality.
    """
    ordered = -np.sort(-side_lengths, axis=1)
    a, b, c = ordered[:, 0], ordered[:, 1], ordered[:, 2]
    product = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))
    return 0.25 * np.sqrt(np.maximum(product, 0.0))


def strict_triangle_violations(side_lengths: np.ndarray) -> np.ndarray:
    """Indices of rows whose longest side is not strictly shorter than the other two."""
    ordered = -np.sort(-side_lengths, axis=1)
    return np.flatnonzero(~(ordered[:, 0] < ordered[:, 1] + ordered[:, 2]))


@dataclass(frozen=True)
class MeshTopology:
    vertex_count: int
    edge_count: int
    face_count: int
    euler_characteristic: int
    genus: int
    betti1: int

    def to_dict(self) -> dict:
        return {
            "vertex_count": self.vertex_count,
            "edge_count": self.edge_count,
            "face_count": self.face_count,
            "euler_characteristic": self.euler_characteristic,
            "genus": self.genus,
            "betti1": self.betti1,
        }


@dataclass(frozen=True)
class FaceGeometry:
    """Per-face intrinsic geometry.

    ``angles[f, k]`` and ``cotangents[f, k]`` belong to the corner at vertex
    ``faces[f, k]``; the side opposite that corner is side ``(k + 1) % 3``.
    """
    areas: np.ndarray
    angles: np.ndarray
    cotangents: np.ndarray


class TriangleMesh:
    """A closed, connected, oriented triangulated surface with intrinsic lengths.

    Faces are vertex triples listed counterclockwise. Side ``k`` of face ``f``
    runs from ``faces[f, k]`` to ``faces[f, (k + 1) % 3]`` and is the edge
    ``face_edges[f, k]``; ``face_edge_signs[f, k]`` is +1 when that traversal
    agrees with the edge's canonical low-to-high orientation.

    Edges are an explicit list, so two edges may join the same pair of vertices
    (the torus at resolution 2 needs this). Lengths are held as a shape vector
    times a global ``length_scale``; angles only ever see the shape vector.
    """

    def __init__(
        self,
        faces: Sequence[Sequence[int]],
        side_keys: Sequence[Sequence[Hashable]],
        key_lengths: Mapping[Hashable, float],
        vertex_positions: np.ndarray | None = None,
        vertex_count: int | None = None,
        length_scale: float = 1.0,
        source: str | None = None,
    ):
        faces_arr = np.array(faces, dtype=np.int64)
        if faces_arr.ndim != 2 or faces_arr.shape[1] != 3:
            raise MeshFormatError("faces must be an (F, 3) array of vertex indices.")
        if faces_arr.shape[0] == 0:
            raise TopologyError("mesh has no faces.")
        if faces_arr.min() < 0:
            raise MeshFormatError("negative vertex index in faces.")
        referenced = int(faces_arr.max()) + 1
        if vertex_count is None:
            vertex_count = referenced
        if referenced > vertex_count:
            raise MeshFormatError(
                f"face references vertex {referenced - 1} but only {vertex_count} vertices exist."
            )
        if not (length_scale > 0.0 and np.isfinite(length_scale)):
            raise GeometryError(f"length scale must be positive and finite, got {length_scale}.")

        self._faces = _readonly(faces_arr)
        self._vertex_count = int(vertex_count)
        self._length_scale = float(length_scale)
        self.source = source

        self._assemble_edges(side_keys, key_lengths)
        self._check_topology()
        self._check_geometry()

        if vertex_positions is not None:
            positions = np.array(vertex_positions, dtype=np.float64)
            if positions.shape[0] != self._vertex_count:
                raise MeshFormatError("vertex_positions does not match the vertex count.")
            vertex_positions = _readonly(positions)
        self._vertex_positions = vertex_positions

        logger.debug(
            "TriangleMesh assembled",
            vertex_count=self.vertex_count,
            edge_count=self.edge_count,
            face_count=self.face_count,
            source=source,
        )

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_edge_lengths(
        cls,
        faces: Sequence[Sequence[int]],
        edge_lengths: Mapping[tuple[int, int], float] | Iterable[Sequence[float]],
        vertex_positions: np.ndarray | None = None,
        vertex_count: int | None = None,
        source: str | None = None,
    ) -> "TriangleMesh":
        """Builds a simplicial mesh whose edges are identified by vertex pairs.

        ``edge_lengths`` is either a mapping ``(i, j) -> length`` or rows
        ``[i, j, length]``; the pair order does not matter.
        """
        if isinstance(edge_lengths, Mapping):
            items = edge_lengths.items()
        else:
            items = (((int(row[0]), int(row[1])), row[2]) for row in edge_lengths)
        lengths = {}
        for (i, j), value in items:
            key = (min(int(i), int(j)), max(int(i), int(j)))
            if key in lengths and lengths[key] != float(value):
                raise MeshFormatError(f"conflicting lengths given for edge {key}.")
            lengths[key] = float(value)

        faces_arr = np.asarray(faces, dtype=np.int64)
        if faces_arr.ndim != 2 or faces_arr.shape[1] != 3:
            raise MeshFormatError("faces must be an (F, 3) array of vertex indices.")
        side_keys = [
            [
                (min(int(face[k]), int(face[(k + 1) % 3])), max(int(face[k]), int(face[(k + 1) % 3])))
                for k in range(3)
            ]
            for face in faces_arr
        ]
        return cls(
            faces_arr,
            side_keys,
            lengths,
            vertex_positions=vertex_positions,
            vertex_count=vertex_count,
            source=source,
        )

    @classmethod
    def from_positions(
        cls,
        vertices: np.ndarray,
        faces: Sequence[Sequence[int]],
        source: str | None = None,
    ) -> "TriangleMesh":
        """Builds a simplicial mesh, taking lengths as Euclidean distances."""
        vertices = np.asarray(vertices, dtype=np.float64)
        faces_arr = np.asarray(faces, dtype=np.int64)
        if vertices.ndim != 2:
            raise MeshFormatError("vertices must be an (V, n) array of coordinates.")
        if faces_arr.size and faces_arr.max() >= vertices.shape[0]:
            raise MeshFormatError("face references a vertex that does not exist.")
        if faces_arr.size and faces_arr.min() < 0:
            raise MeshFormatError("negative vertex index in faces.")
        lengths = {}
        for face in faces_arr:
            for k in range(3):
                i, j = int(face[k]), int(face[(k + 1) % 3])
                key = (min(i, j), max(i, j))
                if key not in lengths:
                    lengths[key] = float(np.linalg.norm(vertices[key[1]] - vertices[key[0]]))
        return cls.from_edge_lengths(
            faces_arr,
            lengths,
            vertex_positions=vertices,
            vertex_count=vertices.shape[0],
            source=source,
        )

    def with_length_scale(self, length_scale: float) -> "TriangleMesh":
        """Returns the same surface with its global length scale replaced."""
        if not (length_scale > 0.0 and np.isfinite(length_scale)):
            raise GeometryError(f"length scale must be positive and finite, got {length_scale}.")
        scaled = copy.copy(self)
        scaled._length_scale = float(length_scale)
        scaled.__dict__.pop("_total_area", None)
        return scaled

    def _assemble_edges(self, side_keys, key_lengths):
        faces = self._faces
        face_count = faces.shape[0]
        if len(side_keys) != face_count:
            raise MeshFormatError("side_keys must list three keys for every face.")

        first_seen: dict[Hashable, int] = {}
        endpoints: dict[Hashable, tuple[int, int]] = {}
        for f in range(face_count):
            keys = side_keys[f]
            if len(keys) != 3:
                raise MeshFormatError("side_keys must list three keys for every face.")
            if faces[f, 0] == faces[f, 1] or faces[f, 1] == faces[f, 2] or faces[f, 0] == faces[f, 2]:
                raise TopologyError(f"face {f} repeats a vertex: {faces[f].tolist()}.")
            for k in range(3):
                a, b = int(faces[f, k]), int(faces[f, (k + 1) % 3])
                pair = (min(a, b), max(a, b))
                key = keys[k]
                if key not in first_seen:
                    first_seen[key] = len(first_seen)
                    endpoints[key] = pair
                elif endpoints[key] != pair:
                    raise TopologyError(f"edge {key!r} is used with different end points.")

        # canonical order: by end points, ties broken by first appearance
        ordered_keys = sorted(first_seen, key=lambda key: (endpoints[key], first_seen[key]))
        edge_index = {key: e for e, key in enumerate(ordered_keys)}
        edge_count = len(ordered_keys)

        edges = np.array([endpoints[key] for key in ordered_keys], dtype=np.int64).reshape(edge_count, 2)
        face_edges = np.empty((face_count, 3), dtype=np.int64)
        for f in range(face_count):
            for k in range(3):
                face_edges[f, k] = edge_index[side_keys[f][k]]
        starts = faces
        ends = np.roll(faces, -1, axis=1)
        face_edge_signs = np.where(starts < ends, 1, -1).astype(np.int64)

        missing = [key for key in ordered_keys if key not in key_lengths]
        if missing:
            raise MeshFormatError(f"no length given for edge {missing[0]!r}.")
        extra = len(key_lengths) - edge_count
        if extra > 0:
            logger.warning("Edge lengths given for edges not used by any face", count=extra)
        shape_lengths = np.array([float(key_lengths[key]) for key in ordered_keys], dtype=np.float64)

        self._edges = _readonly(edges)
        self._face_edges = _readonly(face_edges)
        self._face_edge_signs = _readonly(face_edge_signs)
        self._shape_lengths = _readonly(shape_lengths)

    def _check_topology(self):
        faces = self._faces
        face_count = faces.shape[0]
        edge_count = self._edges.shape[0]

        flat_edges = self._face_edges.ravel()
        flat_signs = self._face_edge_signs.ravel()
        uses = np.bincount(flat_edges, minlength=edge_count)
        boundary = np.flatnonzero(uses == 1)
        if boundary.size:
            raise TopologyError(f"boundary edge {self._edges[boundary[0]].tolist()}: the surface is not closed.")
        crowded = np.flatnonzero(uses > 2)
        if crowded.size:
            raise TopologyError(f"non-manifold edge {self._edges[crowded[0]].tolist()} has {uses[crowded[0]]} faces.")

        forward = np.bincount(flat_edges[flat_signs > 0], minlength=edge_count)
        inconsistent = np.flatnonzero(forward != 1)
        if inconsistent.size:
            raise TopologyError(
                f"edge {self._edges[inconsistent[0]].tolist()} is traversed twice in the same direction: "
                "the faces are not consistently oriented."
            )

        order = np.argsort(flat_edges, kind="stable")
        slots = order.reshape(edge_count, 2)
        slot_signs = flat_signs[slots]
        # put the face that traverses the edge forwards first
        swap = slot_signs[:, 0] < 0
        slots[swap] = slots[swap][:, ::-1]
        edge_faces = slots // 3
        if np.any(edge_faces[:, 0] == edge_faces[:, 1]):
            raise TopologyError("a face uses the same edge twice.")
        self._edge_faces = _readonly(edge_faces)
        self._edge_sides = _readonly(slots % 3)

        dual = sparse.coo_matrix(
            (np.ones(edge_count), (edge_faces[:, 0], edge_faces[:, 1])),
            shape=(face_count, face_count),
        )
        n_parts, _ = csgraph.connected_components(dual, directed=False)
        if n_parts != 1:
            raise TopologyError(f"mesh is disconnected ({n_parts} components).")

        used = np.unique(faces)
        if used.size != self._vertex_count:
            raise TopologyError(
                f"{self._vertex_count - used.size} vertices are not used by any face: the mesh is disconnected."
            )

        # corners around a vertex must form a single fan
        f0, f1 = edge_faces[:, 0], edge_faces[:, 1]
        k0, k1 = self._edge_sides[:, 0], self._edge_sides[:, 1]
        corner_a = np.concatenate([3 * f0 + k0, 3 * f0 + (k0 + 1) % 3])
        corner_b = np.concatenate([3 * f1 + (k1 + 1) % 3, 3 * f1 + k1])
        corners = sparse.coo_matrix(
            (np.ones(corner_a.size), (corner_a, corner_b)),
            shape=(3 * face_count, 3 * face_count),
        )
        n_fans, _ = csgraph.connected_components(corners, directed=False)
        if n_fans != self._vertex_count:
            raise TopologyError("non-manifold vertex: some vertex link is not a single cycle.")

        if (self._vertex_count - edge_count + face_count) % 2:
            raise TopologyError("odd Euler characteristic: the surface is not a closed orientable surface.")

    def _check_geometry(self):
        lengths = self._shape_lengths
        bad = np.flatnonzero(~(np.isfinite(lengths) & (lengths > 0.0)))
        if bad.size:
            raise GeometryError(
                f"edge {self._edges[bad[0]].tolist()} has non-positive or non-finite length {lengths[bad[0]]}."
            )
        violations = strict_triangle_violations(self.shape_side_lengths)
        if violations.size:
            f = int(violations[0])
            raise GeometryError(
                f"face {f} violates the strict triangle inequality: lengths {self.shape_side_lengths[f].tolist()}."
            )

    # -- read-only views ------------------------------------------------------

    @property
    def vertex_count(self) -> int:
        return self._vertex_count

    @property
    def edge_count(self) -> int:
        return self._edges.shape[0]

    @property
    def face_count(self) -> int:
        return self._faces.shape[0]

    @property
    def faces(self) -> np.ndarray:
        return self._faces

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def face_edges(self) -> np.ndarray:
        return self._face_edges

    @property
    def face_edge_signs(self) -> np.ndarray:
        return self._face_edge_signs

    @property
    def edge_faces(self) -> np.ndarray:
        """(E, 2): the face traversing the edge forwards, then the one traversing it backwards."""
        return self._edge_faces

    @property
    def edge_sides(self) -> np.ndarray:
        """(E, 2): the side slot of the edge inside each face of ``edge_faces``."""
        return self._edge_sides

    @property
    def vertex_positions(self) -> np.ndarray | None:
        return self._vertex_positions

    @property
    def length_scale(self) -> float:
        return self._length_scale

    @property
    def shape_lengths(self) -> np.ndarray:
        return self._shape_lengths

    @property
    def edge_lengths(self) -> np.ndarray:
        return self._length_scale * self._shape_lengths

    @property
    def shape_side_lengths(self) -> np.ndarray:
        """(F, 3) shape lengths of the sides of every face."""
        return self._shape_lengths[self._face_edges]

    @property
    def shape_face_areas(self) -> np.ndarray:
        if "_shape_face_areas" not in self.__dict__:
            self._shape_face_areas = _readonly(heron_areas(self.shape_side_lengths))
        return self._shape_face_areas

    @property
    def face_areas(self) -> np.ndarray:
        return (self._length_scale * self._length_scale) * self.shape_face_areas

    @property
    def total_area(self) -> float:
        if "_total_area" not in self.__dict__:
            self._total_area = float((self._length_scale * self._length_scale) * np.sum(self.shape_face_areas))
        return self._total_area

    @property
    def is_simplicial(self) -> bool:
        """True when no two edges share both end points."""
        return np.unique(self._edges, axis=0).shape[0] == self.edge_count

    def edge_length_map(self) -> dict[tuple[int, int], float]:
        if not self.is_simplicial:
            raise MeshFormatError("mesh has several edges between the same vertices; lengths cannot be keyed by pairs.")
        lengths = self.edge_lengths
        return {(int(i), int(j)): float(lengths[e]) for e, (i, j) in enumerate(self._edges)}

    def to_dict(self) -> dict:
        """Intrinsic mesh document: faces and ``[i, j, length]`` rows."""
        lengths = self.edge_length_map()
        return {
            "faces": self._faces.tolist(),
            "edge_lengths": [[i, j, length] for (i, j), length in lengths.items()],
        }

    @classmethod
    def from_dict(cls, data: dict, source: str | None = None) -> "TriangleMesh":
        return cls.from_edge_lengths(data["faces"], data["edge_lengths"], source=source)

    def __repr__(self):
        return (
            f"TriangleMesh(V={self.vertex_count}, E={self.edge_count}, F={self.face_count}, "
            f"scale={self._length_scale!r}, source={self.source!r})"
        )
