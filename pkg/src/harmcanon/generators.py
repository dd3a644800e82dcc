import math

import numpy as np
import structlog

from .core_types.mesh import TriangleMesh

logger = structlog.get_logger(__name__)

OCTAGON_SIDES = 8


def generate_flat_torus(resolution: int) -> TriangleMesh:
    """Unit-square flat torus on an N x N periodic grid.

    Vertex (i, j) sits at (i/N, j/N) with index i + N*j; every cell is split
    along its (i, j)-(i+1, j+1) diagonal. Edges carry their grid position as
    identity, which keeps N = 2 (several edges per vertex pair) well defined.
    """
    if not isinstance(resolution, (int, np.integer)) or resolution < 2:
        raise ValueError(f"flat torus resolution must be an integer >= 2, got {resolution!r}.")
    n = int(resolution)
    step = 1.0 / n
    lengths = {"h": step, "v": step, "d": math.sqrt(2.0) * step}

    def vid(i: int, j: int) -> int:
        return (i % n) + n * (j % n)

    faces = []
    side_keys = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            faces.append((a, b, c))
            side_keys.append((("h", i, j), ("v", (i + 1) % n, j), ("d", i, j)))
            faces.append((a, c, d))
            side_keys.append((("d", i, j), ("h", i, (j + 1) % n), ("v", i, j)))

    key_lengths = {key: lengths[key[0]] for keys in side_keys for key in keys}
    mesh = TriangleMesh(faces, side_keys, key_lengths, vertex_count=n * n, source=f"flat-torus:{n}")
    logger.info("Generated flat torus", resolution=n, face_count=mesh.face_count)
    return mesh


def clifford_torus_positions(resolution: int) -> np.ndarray:
    """4D positions of the flat torus grid on the Clifford torus.

    Chords between grid neighbours are a uniform multiple of the flat grid
    lengths, so the embedding reproduces the flat torus up to scale.
    """
    n = int(resolution)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    theta = 2.0 * np.pi * i.ravel() / n
    phi = 2.0 * np.pi * j.ravel() / n
    return np.column_stack([np.cos(theta), np.sin(theta), np.cos(phi), np.sin(phi)]) / (2.0 * np.pi)


def generate_revolution_torus(resolution: int, major: float = 2.0, minor: float = 1.0) -> TriangleMesh:
    """Torus of revolution in R³ on the flat torus grid connectivity.

    Its induced metric is curved but conformally flat, so the canonical metric
    of its class has zero energy.
    """
    if not isinstance(resolution, (int, np.integer)) or resolution < 3:
        raise ValueError(f"torus of revolution resolution must be an integer >= 3, got {resolution!r}.")
    if not 0.0 < minor < major:
        raise ValueError(f"torus radii must satisfy 0 < minor < major, got {minor!r} and {major!r}.")
    n = int(resolution)
    flat = generate_flat_torus(n)
    i, j = np.meshgrid(np.arange(n), np.arange(n), indexing="xy")
    theta = 2.0 * np.pi * i.ravel() / n
    phi = 2.0 * np.pi * j.ravel() / n
    ring = major + minor * np.cos(phi)
    positions = np.column_stack([ring * np.cos(theta), ring * np.sin(theta), minor * np.sin(phi)])
    mesh = TriangleMesh.from_positions(positions, flat.faces, source=f"revolution-torus:{n}")
    logger.info("Generated torus of revolution", resolution=n, major=major, minor=minor)
    return mesh


def _octagon_point_key(sector: int, a: int, b: int, c: int, m: int):
    """Identity of a grid point after gluing the octagon.

    (a, b, c) are integer barycentric coordinates (summing to m) with respect to
    the sector triangle (centre, corner ``sector``, corner ``sector + 1``).
    Opposite sides are glued by translation: side k at parameter t matches
    side k + 4 at parameter 1 - t.
    """
    if b == m or c == m:
        return ("corner",)
    if a == m:
        return ("centre",)
    if a == 0:
        if sector < OCTAGON_SIDES // 2:
            return ("side", sector, c)
        return ("side", sector - OCTAGON_SIDES // 2, m - c)
    if c == 0:
        return ("spoke", sector, b)
    if b == 0:
        return ("spoke", (sector + 1) % OCTAGON_SIDES, c)
    return ("interior", sector, b, c)


def generate_genus2(refinement: int) -> TriangleMesh:
    """Genus-2 surface: regular octagon of unit area with opposite sides glued.

    The octagon is cut into eight sectors from its centre and each sector is
    subdivided ``refinement + 1`` times by midpoints; one subdivision is not
    enough to separate all edges meeting at the glued corner. Lengths come
    from the planar octagon, so every vertex is flat except the single corner
    vertex with angle sum 6π.
    """
    if not isinstance(refinement, (int, np.integer)) or refinement < 1:
        raise ValueError(f"genus-2 refinement must be an integer >= 1, got {refinement!r}.")
    m = 2 ** (int(refinement) + 1)
    # regular octagon area is 2*sqrt(2)*R^2
    radius = 1.0 / math.sqrt(2.0 * math.sqrt(2.0))
    corners = [
        (radius * math.cos(2.0 * math.pi * k / OCTAGON_SIDES), radius * math.sin(2.0 * math.pi * k / OCTAGON_SIDES))
        for k in range(OCTAGON_SIDES)
    ]

    index: dict = {}
    faces = []
    lengths: dict[tuple[int, int], float] = {}

    def vertex(sector: int, b: int, c: int) -> tuple[int, np.ndarray]:
        key = _octagon_point_key(sector, m - b - c, b, c, m)
        v = index.setdefault(key, len(index))
        p, q = corners[sector], corners[(sector + 1) % OCTAGON_SIDES]
        point = np.array([(b * p[0] + c * q[0]) / m, (b * p[1] + c * q[1]) / m])
        return v, point

    for sector in range(OCTAGON_SIDES):
        for b in range(m):
            for c in range(m - b):
                triangles = [((b, c), (b + 1, c), (b, c + 1))]
                if b + c + 2 <= m:
                    triangles.append(((b + 1, c), (b + 1, c + 1), (b, c + 1)))
                for triangle in triangles:
                    corner_data = [vertex(sector, *bc) for bc in triangle]
                    face = tuple(v for v, _ in corner_data)
                    faces.append(face)
                    for k in range(3):
                        (v0, p0), (v1, p1) = corner_data[k], corner_data[(k + 1) % 3]
                        pair = (min(v0, v1), max(v0, v1))
                        lengths.setdefault(pair, float(np.hypot(*(p1 - p0))))

    mesh = TriangleMesh.from_edge_lengths(faces, lengths, source=f"genus2:{refinement}")
    logger.info(
        "Generated genus-2 octagon surface",
        refinement=refinement,
        subdivisions=int(refinement) + 1,
        face_count=mesh.face_count,
    )
    return mesh
