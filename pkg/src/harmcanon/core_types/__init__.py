from .basis import HarmonicBasis, TreeCotree
from .forms import DiscreteForm, SparseOperator, assemble_operator
from .mesh import FaceGeometry, MeshTopology, TriangleMesh
from .report import CheckResult, RunReport, ValidationReport
from .results import CanonicalResult, FField, WedgeData
