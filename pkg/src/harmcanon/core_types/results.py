from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WedgeData:
    """Per-face wedge densities and their integrals.

    ``f[T, i, j]`` is the integral of ξ_i∧ξ_j over face T divided by its area;
    ``c[i, j]`` is the integral over the whole surface. Both are antisymmetric.
    """
    f: np.ndarray
    c: np.ndarray

    @property
    def size(self) -> int:
        return self.c.shape[0]

    @property
    def face_count(self) -> int:
        return self.f.shape[0]

    @property
    def c_sq(self) -> float:
        return float(np.sum(self.c * self.c))

    def antisymmetry_residual(self) -> float:
        per_face = np.max(np.abs(self.f + np.swapaxes(self.f, 1, 2)), initial=0.0)
        total = np.max(np.abs(self.c + self.c.T), initial=0.0)
        return float(max(per_face, total))

    def __repr__(self):
        return f"WedgeData(faces={self.face_count}, size={self.size}, c_sq={self.c_sq:.6g})"


@dataclass(frozen=True)
class FField:
    values: np.ndarray
    integral_f: float
    min_f: float

    def __iter__(self):
        # unpacks as (values, integral_f, min_f)
        return iter((self.values, self.integral_f, self.min_f))


@dataclass(frozen=True)
class CanonicalResult:
    """Outputs of the canonical metric pipeline on an area-normalized mesh."""
    f_field: np.ndarray
    integral_f: float
    c_matrix: np.ndarray
    c_sq: float
    rho: np.ndarray
    e_min: float
    min_f: float
    n: int
    degenerate: bool
    c_singular_values: np.ndarray
    min_harmonic_density: float
    rho_v: np.ndarray | None = None

    def rho_stats(self) -> dict:
        return {
            "min": float(np.min(self.rho)),
            "max": float(np.max(self.rho)),
            "mean": float(np.mean(self.rho)),
        }

    def to_dict(self) -> dict:
        return {
            "c_matrix": self.c_matrix.tolist(),
            "c_sq": float(self.c_sq),
            "c_singular_values": [float(s) for s in self.c_singular_values],
            "integral_f": float(self.integral_f),
            "min_f": float(self.min_f),
            "min_harmonic_density": float(self.min_harmonic_density),
            "e_min": float(self.e_min),
            "n": self.n,
            "degenerate": bool(self.degenerate),
            "rho_stats": self.rho_stats(),
        }

    def __repr__(self):
        return (
            f"CanonicalResult(faces={self.rho.shape[0]}, e_min={self.e_min:.6g}, "
            f"c_sq={self.c_sq:.6g}, degenerate={self.degenerate})"
        )
