import json
from pathlib import Path

import meshio
import numpy as np
import structlog
from jsonschema import ValidationError, validate

from .core_types.mesh import TriangleMesh
from .exceptions import MeshFormatError

logger = structlog.get_logger(__name__)

SCHEMA_DIR = Path(__file__).parent / "schemas"
# meshio handles 3D "OFF" only; the higher-dimensional headers are parsed here
EXTENDED_OFF_HEADERS = ("4OFF", "nOFF")
MESHIO_ERRORS = (meshio.ReadError, ValueError, IndexError, KeyError)


def load_schema(name: str) -> dict:
    with open(SCHEMA_DIR / f"{name}.json", "r") as f:
        return json.load(f)


def _validated(data, schema_name: str, path) -> None:
    try:
        validate(instance=data, schema=load_schema(schema_name))
    except ValidationError as e:
        raise MeshFormatError(f"{path}: {e.message}") from e


def _fan(polygon) -> list[tuple[int, int, int]]:
    return [(int(polygon[0]), int(polygon[k]), int(polygon[k + 1])) for k in range(1, len(polygon) - 1)]


def _triangulate(polygons, path) -> list[tuple[int, int, int]]:
    faces = []
    split = 0
    for polygon in polygons:
        if len(polygon) < 3:
            raise MeshFormatError(f"{path}: face with {len(polygon)} vertices.")
        if len(polygon) > 3:
            split += 1
        faces.extend(_fan(polygon))
    if split:
        logger.warning("Fan-split polygonal faces into triangles", path=str(path), polygons=split)
    return faces


def _content_lines(text: str) -> list[str]:
    lines = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            lines.append(line)
    return lines


def _off_header(path) -> str:
    with open(path, "r") as f:
        for raw in f:
            line = raw.split("#", 1)[0].strip()
            if line:
                return line.split()[0]
    raise MeshFormatError(f"{path}: empty OFF file.")


def parse_off(text: str, path="<string>") -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Parses 4OFF and nOFF text into vertex coordinates and triangles."""
    lines = _content_lines(text)
    if not lines:
        raise MeshFormatError(f"{path}: empty OFF file.")
    tokens = lines[0].split()
    header = tokens[0]
    rest = tokens[1:]
    if header == "4OFF":
        dimension = 4
    elif header == "nOFF":
        if not rest:
            if len(lines) < 2:
                raise MeshFormatError(f"{path}: nOFF header without a dimension.")
            rest = lines[1].split()
            lines = lines[1:]
        dimension = int(rest[0])
        rest = rest[1:]
    else:
        raise MeshFormatError(f"{path}: expected a 4OFF or nOFF header, found {header!r}.")

    body = lines[1:]
    if rest:
        counts_line = rest
    else:
        if not body:
            raise MeshFormatError(f"{path}: missing element counts.")
        counts_line = body[0].split()
        body = body[1:]
    try:
        vertex_count, face_count = int(counts_line[0]), int(counts_line[1])
    except (ValueError, IndexError) as e:
        raise MeshFormatError(f"{path}: malformed element counts.") from e
    if len(body) < vertex_count + face_count:
        raise MeshFormatError(
            f"{path}: expected {vertex_count} vertices and {face_count} faces, file is truncated."
        )

    try:
        vertices = np.array(
            [[float(x) for x in line.split()[:dimension]] for line in body[:vertex_count]],
            dtype=np.float64,
        ).reshape(vertex_count, dimension)
        polygons = []
        for line in body[vertex_count:vertex_count + face_count]:
            values = line.split()
            size = int(values[0])
            polygons.append([int(v) for v in values[1:1 + size]])
    except ValueError as e:
        raise MeshFormatError(f"{path}: {e}") from e
    return vertices, _triangulate(polygons, path)


def read_surface(path, file_format: str) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
    """Reads an OBJ or 3D OFF file with meshio; polygon cells are fan-split."""
    try:
        surface = meshio.read(path, file_format=file_format)
    except MESHIO_ERRORS as e:
        raise MeshFormatError(f"{path}: {e}") from e
    polygons = []
    for block in surface.cells:
        data = np.asarray(block.data)
        if data.ndim != 2 or data.shape[1] < 3:
            continue
        polygons.extend(data.tolist())
    if surface.points.shape[0] == 0 or not polygons:
        raise MeshFormatError(f"{path}: file has no vertices or faces.")
    return np.asarray(surface.points, dtype=np.float64), _triangulate(polygons, path)


def load_mesh(path) -> TriangleMesh:
    """Reads OFF, OBJ or intrinsic JSON (chosen by file suffix) into a validated mesh."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".json":
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise MeshFormatError(f"{path}: invalid JSON: {e}") from e
        _validated(data, "intrinsic_mesh", path)
        mesh = TriangleMesh.from_dict(data, source=data.get("source", str(path)))
    elif suffix == ".off":
        header = _off_header(path)
        if header in EXTENDED_OFF_HEADERS:
            vertices, faces = parse_off(path.read_text(), path)
        elif header == "OFF":
            vertices, faces = read_surface(path, "off")
        else:
            raise MeshFormatError(f"{path}: missing OFF header, found {header!r}.")
        mesh = TriangleMesh.from_positions(vertices, faces, source=str(path))
    elif suffix == ".obj":
        vertices, faces = read_surface(path, "obj")
        mesh = TriangleMesh.from_positions(vertices, faces, source=str(path))
    else:
        raise MeshFormatError(f"{path}: unsupported mesh format {suffix!r}.")
    logger.info("Loaded mesh", path=str(path), vertex_count=mesh.vertex_count, face_count=mesh.face_count)
    return mesh


def write_off(mesh: TriangleMesh, path) -> None:
    """Writes OFF (3D, through meshio), 4OFF (4D) or nOFF.

    Needs vertex positions and a simplicial mesh.
    """
    positions = mesh.vertex_positions
    if positions is None:
        raise MeshFormatError("mesh has no vertex positions; write the intrinsic JSON format instead.")
    if not mesh.is_simplicial:
        raise MeshFormatError("OFF cannot represent several edges between the same vertices.")
    dimension = positions.shape[1]
    if dimension == 3:
        meshio.write_points_cells(str(path), positions, [("triangle", mesh.faces)], file_format="off")
        logger.info("Wrote OFF mesh", path=str(path), header="OFF")
        return
    header = "4OFF" if dimension == 4 else f"nOFF\n{dimension}"
    lines = [header, f"{mesh.vertex_count} {mesh.face_count} {mesh.edge_count}"]
    lines.extend(" ".join(repr(float(x)) for x in point) for point in positions)
    lines.extend(f"3 {a} {b} {c}" for a, b, c in mesh.faces.tolist())
    Path(path).write_text("\n".join(lines) + "\n")
    logger.info("Wrote OFF mesh", path=str(path), header=header.split()[0])


def write_intrinsic_json(mesh: TriangleMesh, path) -> None:
    data = mesh.to_dict()
    if mesh.source:
        data["source"] = mesh.source
    _validated(data, "intrinsic_mesh", path)
    Path(path).write_text(json.dumps(data) + "\n")
    logger.info("Wrote intrinsic mesh", path=str(path), edge_count=mesh.edge_count)


def write_mesh(mesh: TriangleMesh, path) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".json":
        write_intrinsic_json(mesh, path)
    elif suffix == ".off":
        write_off(mesh, path)
    else:
        raise MeshFormatError(f"{path}: cannot write mesh format {suffix!r}; use .off or .json.")


def write_face_field_json(path, rho) -> None:
    data = {str(f): float(value) for f, value in enumerate(np.asarray(rho, dtype=np.float64))}
    Path(path).write_text(json.dumps(data) + "\n")


def write_face_field_ply(path, mesh: TriangleMesh, rho, rho_v=None) -> None:
    """Binary little-endian PLY with per-face ``rho`` and per-vertex ``rho_v``.

    meshio's PLY writer drops face properties, so the records are laid out
    with numpy. Meshes without 3D positions get zero coordinates.
    """
    rho = np.asarray(rho, dtype=np.float64)
    if rho.shape != (mesh.face_count,):
        raise MeshFormatError(f"face field has {rho.shape[0]} values, mesh has {mesh.face_count} faces.")
    positions = mesh.vertex_positions
    if positions is None or positions.shape[1] != 3:
        positions = np.zeros((mesh.vertex_count, 3))

    vertex_fields = [(name, "<f8") for name in ("x", "y", "z")]
    if rho_v is not None:
        vertex_fields.append(("rho_v", "<f8"))
    vertex_records = np.zeros(mesh.vertex_count, dtype=np.dtype(vertex_fields))
    for axis, name in enumerate(("x", "y", "z")):
        vertex_records[name] = positions[:, axis]
    if rho_v is not None:
        vertex_records["rho_v"] = np.asarray(rho_v, dtype=np.float64)

    face_records = np.zeros(
        mesh.face_count,
        dtype=np.dtype([("count", "u1"), ("vertex_indices", "<i4", (3,)), ("rho", "<f8")]),
    )
    face_records["count"] = 3
    face_records["vertex_indices"] = mesh.faces
    face_records["rho"] = rho

    header = ["ply", "format binary_little_endian 1.0", "comment conformal factor field"]
    header.append(f"element vertex {mesh.vertex_count}")
    for name, _ in vertex_fields:
        header.append(f"property double {name}")
    header.append(f"element face {mesh.face_count}")
    header.append("property list uchar int vertex_indices")
    header.append("property double rho")
    header.append("end_header")

    with open(path, "wb") as f:
        f.write(("\n".join(header) + "\n").encode("ascii"))
        f.write(vertex_records.tobytes())
        f.write(face_records.tobytes())
    logger.info("Wrote face field PLY", path=str(path), face_count=mesh.face_count)


def read_face_field_ply(path) -> np.ndarray:
    """Reads the per-face ``rho`` property of a PLY file with meshio."""
    try:
        field_mesh = meshio.read(path, file_format="ply")
    except MESHIO_ERRORS as e:
        raise MeshFormatError(f"{path}: {e}") from e
    if "rho" not in field_mesh.cell_data:
        raise MeshFormatError(f"{path}: face element has no rho property.")
    if any(block.type != "triangle" for block in field_mesh.cells):
        raise MeshFormatError(f"{path}: only triangle faces are supported.")
    return np.concatenate([np.asarray(values, dtype=np.float64) for values in field_mesh.cell_data["rho"]])


def read_face_field(path, face_count: int | None = None) -> np.ndarray:
    """Reads a per-face field from a JSON mapping or list, or from a field PLY."""
    path = Path(path)
    if path.suffix.lower() == ".ply":
        values = read_face_field_ply(path)
    else:
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise MeshFormatError(f"{path}: invalid JSON: {e}") from e
        _validated(data, "face_field", path)
        if isinstance(data, list):
            values = np.array(data, dtype=np.float64)
        else:
            indices = sorted(int(key) for key in data)
            if indices != list(range(len(indices))):
                raise MeshFormatError(f"{path}: face indices must be 0..{len(indices) - 1} without gaps.")
            values = np.array([data[str(i)] for i in indices], dtype=np.float64)
    if face_count is not None and values.shape[0] != face_count:
        raise MeshFormatError(f"{path}: field has {values.shape[0]} values, mesh has {face_count} faces.")
    return values
