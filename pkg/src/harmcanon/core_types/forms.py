from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy import sparse

from ..exceptions import DimensionMismatch

if TYPE_CHECKING:
    from .mesh import TriangleMesh

# Operators between cochain spaces are plain CSR matrices.
SparseOperator = sparse.csr_matrix


def assemble_operator(rows, cols, values, shape: tuple[int, int]) -> SparseOperator:
    """Assembles a CSR operator from triplets, summing duplicate entries."""
    matrix = sparse.coo_matrix(
        (np.asarray(values, dtype=np.float64), (np.asarray(rows), np.asarray(cols))),
        shape=shape,
    ).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def cell_count(mesh: "TriangleMesh", degree: int) -> int:
    if degree == 0:
        return mesh.vertex_count
    if degree == 1:
        return mesh.edge_count
    if degree == 2:
        return mesh.face_count
    raise DimensionMismatch(f"surface cochains have degree 0, 1 or 2, got {degree}.")


@dataclass(frozen=True)
class DiscreteForm:
    """A k-cochain: one number per vertex, canonically oriented edge, or face.

    The value on an edge is the integral of the form along the oriented edge;
    the value on a face is the integral over the counterclockwise face.
    """
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.degree not in (0, 1, 2):
            raise DimensionMismatch(f"surface cochains have degree 0, 1 or 2, got {self.degree}.")
        values = np.array(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise DimensionMismatch("cochain values must be one-dimensional.")
        if not np.all(np.isfinite(values)):
            raise ValueError("cochain values must be finite.")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]

    def check(self, mesh: "TriangleMesh", degree: int | None = None) -> "DiscreteForm":
        """Raises DimensionMismatch unless this cochain lives on ``mesh`` in ``degree``."""
        if degree is not None and self.degree != degree:
            raise DimensionMismatch(f"expected a {degree}-form, got a {self.degree}-form.")
        expected = cell_count(mesh, self.degree)
        if len(self) != expected:
            raise DimensionMismatch(
                f"{self.degree}-form has {len(self)} values but the mesh has {expected} cells."
            )
        return self

    def _combine(self, other: "DiscreteForm", op) -> "DiscreteForm":
        if not isinstance(other, DiscreteForm):
            return NotImplemented
        if other.degree != self.degree or len(other) != len(self):
            raise DimensionMismatch("forms of different degree or size cannot be combined.")
        return DiscreteForm(self.degree, op(self.values, other.values))

    def __add__(self, other):
        return self._combine(other, np.add)

    def __sub__(self, other):
        return self._combine(other, np.subtract)

    def __mul__(self, scalar: float) -> "DiscreteForm":
        return DiscreteForm(self.degree, float(scalar) * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return DiscreteForm(self.degree, -self.values)

    def __eq__(self, other):
        if not isinstance(other, DiscreteForm):
            return NotImplemented
        return self.degree == other.degree and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.degree, self.values.tobytes()))

    def __repr__(self):
        return f"DiscreteForm(degree={self.degree}, size={len(self)})"

    def to_dict(self) -> dict:
        return {"degree": self.degree, "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "DiscreteForm":
        return cls(degree=int(data["degree"]), values=np.asarray(data["values"], dtype=np.float64))

    @classmethod
    def zeros(cls, mesh: "TriangleMesh", degree: int) -> "DiscreteForm":
        return cls(degree, np.zeros(cell_count(mesh, degree)))
