from dataclasses import dataclass, field

import numpy as np

from .forms import DiscreteForm


@dataclass(frozen=True)
class TreeCotree:
    """Spanning tree of the vertex graph, spanning cotree of the face graph.

    ``vertex_parent_edge[v]`` / ``face_parent_edge[f]`` is the edge leading to
    the parent (-1 at the roots). ``generator_edges`` are the edges in neither
    tree, in ascending order; there are exactly 2g of them.
    """
    vertex_parent: np.ndarray
    vertex_parent_edge: np.ndarray
    face_parent: np.ndarray
    face_parent_edge: np.ndarray
    generator_edges: tuple[int, ...]

    def __len__(self):
        return len(self.generator_edges)


@dataclass(frozen=True)
class HarmonicBasis:
    """An L²-orthonormal basis of discrete harmonic 1-forms, 2g forms long."""
    forms: tuple[DiscreteForm, ...]
    gram_residual: float
    closedness_residual: float
    coclosedness_residual: float
    solver_iterations: tuple[int, ...]
    generator_edges: tuple[int, ...] = field(default=())

    def __len__(self):
        return len(self.forms)

    def __iter__(self):
        return iter(self.forms)

    def __getitem__(self, i: int) -> DiscreteForm:
        return self.forms[i]

    def as_matrix(self) -> np.ndarray:
        """(E, 2g) matrix whose columns are the basis cochains."""
        return np.column_stack([form.values for form in self.forms])

    def residuals_dict(self) -> dict:
        return {
            "count": len(self.forms),
            "gram_residual": self.gram_residual,
            "closedness_residual": self.closedness_residual,
            "coclosedness_residual": self.coclosedness_residual,
        }

    def to_dict(self) -> dict:
        data = self.residuals_dict()
        data["solver_iterations"] = list(self.solver_iterations)
        data["generator_edges"] = list(self.generator_edges)
        data["forms"] = [form.values.tolist() for form in self.forms]
        return data

    def __repr__(self):
        return (
            f"HarmonicBasis(count={len(self.forms)}, gram_residual={self.gram_residual:.3e}, "
            f"coclosedness_residual={self.coclosedness_residual:.3e})"
        )
