class HarmcanonError(Exception):
    """Base exception for all harmcanon errors."""
    pass


class MeshFormatError(HarmcanonError):
    """Raised when a mesh or field file cannot be parsed or written."""
    pass


ParseError = MeshFormatError


class TopologyError(HarmcanonError):
    """Raised when a mesh is not a closed, connected, oriented 2-manifold."""
    pass


class GeometryError(HarmcanonError):
    """Raised on non-positive lengths or violated triangle inequalities."""
    pass


class AssumptionError(HarmcanonError):
    """Raised when the surface has no harmonic 1-forms (genus 0)."""
    pass


class PreconditionError(HarmcanonError):
    """Raised when a 1-form handed to the harmonic projection is not closed."""
    pass


class DimensionMismatch(HarmcanonError):
    """Raised when a cochain does not match the cell count it is applied to."""
    pass


class SolverError(HarmcanonError):
    """Raised when a linear solve breaks down or misses its tolerance."""
    pass


class RankDeficiencyError(HarmcanonError):
    """Raised when the forms to orthonormalize are linearly dependent."""
    pass


class DegenerateClassError(HarmcanonError):
    """Raised when the wedge field integrates to zero and no canonical factor exists."""
    pass


class RhoFieldError(HarmcanonError):
    """Base for invalid conformal factor fields."""
    pass


class NormalizationError(RhoFieldError):
    """Raised when a conformal factor does not have unit weighted volume."""
    pass


class NonPositiveRhoError(RhoFieldError):
    """Raised when a conformal factor has a zero or negative entry."""
    pass
