from dataclasses import dataclass, field
from typing import Optional

from .mesh import MeshTopology


@dataclass
class CheckResult:
    """Outcome of one invariant check.

    Informational checks report a value but never fail the suite.
    """
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""
    informational: bool = False

    def to_dict(self) -> dict:
        data = {"name": self.name, "passed": self.passed, "value": self.value, "threshold": self.threshold}
        if self.detail:
            data["detail"] = self.detail
        if self.informational:
            data["informational"] = True
        return data

    def __repr__(self):
        status = "pass" if self.passed else "FAIL"
        return f"CheckResult({self.name}: {status}, value={self.value!r})"


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def first_failure(self) -> Optional[CheckResult]:
        return next((check for check in self.checks if not check.passed), None)

    def __getitem__(self, name: str) -> CheckResult:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_dict(self) -> dict:
        failure = self.first_failure
        return {
            "passed": self.passed,
            "first_failure": failure.name if failure else None,
            "checks": [check.to_dict() for check in self.checks],
        }


@dataclass
class RunReport:
    tool_version: str
    mesh: dict
    discretization: dict
    basis: dict
    result: dict
    timings_ms: Optional[dict] = None

    @classmethod
    def mesh_summary(cls, source: Optional[str], topology: MeshTopology) -> dict:
        return {
            "source": source,
            "vertex_count": topology.vertex_count,
            "edge_count": topology.edge_count,
            "face_count": topology.face_count,
            "genus": topology.genus,
        }

    def to_dict(self) -> dict:
        data = {
            "tool_version": self.tool_version,
            "mesh": self.mesh,
            "discretization": self.discretization,
            "basis": self.basis,
            "result": self.result,
        }
        if self.timings_ms is not None:
            data["timings_ms"] = self.timings_ms
        return data
