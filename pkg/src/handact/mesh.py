"""Indexed triangle meshes: validation, 1-ring adjacency, OFF/OBJ input.

Vertices are dimensionless model units; faces are counter-clockwise
vertex-index triples. All geometry downstream (curvature fields, the
synthetic hand templates) is built on these two arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidIndex, InvariantViolation, NonManifoldEdge, ParseError

MIN_FACE_AREA = 1e-12


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (V, 3) float64
    faces: np.ndarray     # (F, 3) int64, CCW

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise InvariantViolation("vertices must be an (V, 3) array")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise InvariantViolation("faces must be an (F, 3) array")

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_faces(self):
        return self.faces.shape[0]


def face_normals_raw(mesh):
    """Unnormalized face normals (cross products, magnitude = 2 * area)."""
    v = mesh.vertices
    f = mesh.faces
    e1 = v[f[:, 1]] - v[f[:, 0]]
    e2 = v[f[:, 2]] - v[f[:, 0]]
    return np.cross(e1, e2)


def face_areas(mesh):
    return 0.5 * np.linalg.norm(face_normals_raw(mesh), axis=1)


def edge_set(mesh):
    """Undirected edges as a sorted (E, 2) array of vertex-index pairs."""
    f = mesh.faces
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e = np.sort(e, axis=1)
    return np.unique(e, axis=0)


def euler_characteristic(mesh):
    return mesh.n_vertices - edge_set(mesh).shape[0] + mesh.n_faces


def validate_mesh(mesh):
    """Check all TriangleMesh invariants, raising InvariantViolation with
    the name of the first failed check."""
    f = mesh.faces
    if f.size and (f.min() < 0 or f.max() >= mesh.n_vertices):
        raise InvariantViolation("face index out of range")
    if (f[:, 0] == f[:, 1]).any() or (f[:, 1] == f[:, 2]).any() or (f[:, 0] == f[:, 2]).any():
        raise InvariantViolation("face repeats a vertex")
    if not np.isfinite(mesh.vertices).all():
        raise InvariantViolation("non-finite vertex position")
    if f.size and face_areas(mesh).min() <= MIN_FACE_AREA:
        raise InvariantViolation("zero-area face")
    # Manifold: every directed edge at most once (equal-orientation duplicates
    # would make an undirected edge shared with the same winding), every
    # undirected edge in at most two faces.
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    keys = directed[:, 0].astype(np.int64) * mesh.n_vertices + directed[:, 1]
    if np.unique(keys).size != keys.size:
        raise InvariantViolation("edge shared by two faces with equal orientation")
    und = np.sort(directed, axis=1)
    ukeys = und[:, 0].astype(np.int64) * mesh.n_vertices + und[:, 1]
    _, counts = np.unique(ukeys, return_counts=True)
    if counts.size and counts.max() > 2:
        raise InvariantViolation("non-manifold edge (more than two incident faces)")


@dataclass
class VertexAdjacency:
    """Ordered 1-ring neighborhoods.

    rings[i] lists the neighbors of vertex i in the order induced by face
    orientation; for an interior vertex the ring is a closed cycle (the
    successor of the last entry is the first), for a boundary vertex an
    open chain. incident_faces[i] lists face ids touching i in face order.
    """
    rings: list = field(repr=False)
    incident_faces: list = field(repr=False)
    boundary: np.ndarray = field(repr=False)

    @property
    def n_vertices(self):
        return self.boundary.shape[0]


def build_adjacency(mesh: TriangleMesh) -> VertexAdjacency:
    """Build ordered 1-rings by walking successor edges around each vertex.

    In a CCW face (i, j, k) the ring of i steps j -> k, so chaining these
    successors orders the ring consistently with face orientation. An open
    chain marks a boundary vertex.
    """
    nv = mesh.n_vertices
    f = mesh.faces
    if f.size and (f.min() < 0 or f.max() >= nv):
        raise InvalidIndex("face index out of range")

    # Undirected edge multiplicity check up front: >2 incident faces.
    directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    ukeys = und[:, 0].astype(np.int64) * nv + und[:, 1]
    _, counts = np.unique(ukeys, return_counts=True)
    if counts.size and counts.max() > 2:
        raise NonManifoldEdge("edge shared by more than two faces")

    succ = [dict() for _ in range(nv)]   # around i: j -> k per face (i, j, k)
    incident = [[] for _ in range(nv)]
    for fid, (a, b, c) in enumerate(f):
        for i, j, k in ((a, b, c), (b, c, a), (c, a, b)):
            if j in succ[i]:
                raise NonManifoldEdge(f"directed edge ({i},{j}) appears twice")
            succ[i][j] = k
            incident[i].append(fid)

    rings = []
    boundary = np.zeros(nv, dtype=bool)
    for i in range(nv):
        nxt = succ[i]
        if not nxt:
            rings.append(np.empty(0, dtype=np.int64))
            boundary[i] = True  # isolated vertex: treated as (degenerate) boundary
            continue
        targets = set(nxt.values())
        starts = [j for j in nxt if j not in targets]
        if len(starts) > 1:
            raise InvariantViolation(f"vertex {i} has multiple boundary fans")
        if starts:
            boundary[i] = True
            start = starts[0]
        else:
            start = next(iter(nxt))
        ring = [start]
        cur = start
        while cur in nxt:
            cur = nxt[cur]
            if cur == start:
                break
            ring.append(cur)
        # An interior ring must close over every neighbor; a pinched vertex
        # (two disjoint fans) leaves some unvisited.
        n_neighbors = len(nxt) + (1 if starts else 0)
        if len(ring) != n_neighbors:
            raise InvariantViolation(f"vertex {i} ring is not a single fan")
        rings.append(np.asarray(ring, dtype=np.int64))

    incident_faces = [np.asarray(lst, dtype=np.int64) for lst in incident]
    return VertexAdjacency(rings=rings, incident_faces=incident_faces, boundary=boundary)


# ---------------------------------------------------------------------------
# file input / output
# ---------------------------------------------------------------------------

def _significant_lines(text):
    """Yield (line_number, stripped_line) skipping blanks and # comments."""
    for no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield no, line


def _parse_off(text):
    lines = _significant_lines(text)
    try:
        no, header = next(lines)
    except StopIteration:
        raise ParseError("empty file") from None
    if header.upper() != "OFF":
        raise ParseError("missing OFF header", line=no)
    try:
        no, counts = next(lines)
    except StopIteration:
        raise ParseError("missing counts line") from None
    parts = counts.split()
    if len(parts) < 2:
        raise ParseError("counts line needs vertex and face counts", line=no)
    try:
        nv, nf = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("counts are not integers", line=no) from None

    verts = np.empty((nv, 3), dtype=np.float64)
    for i in range(nv):
        try:
            no, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nv} vertices, file ended after {i}") from None
        parts = line.split()
        if len(parts) < 3:
            raise ParseError("vertex line needs 3 coordinates", line=no)
        try:
            verts[i] = [float(parts[0]), float(parts[1]), float(parts[2])]
        except ValueError:
            # a face line showing up early means the vertex count lied
            raise ParseError(f"expected vertex {i}, got non-numeric data", line=no) from None

    faces = np.empty((nf, 3), dtype=np.int64)
    for i in range(nf):
        try:
            no, line = next(lines)
        except StopIteration:
            raise ParseError(f"expected {nf} faces, file ended after {i}") from None
        parts = line.split()
        try:
            n = int(parts[0])
        except ValueError:
            raise ParseError("face line must start with its vertex count", line=no) from None
        if n != 3:
            raise ParseError(f"only triangles supported, face has {n} vertices", line=no)
        if len(parts) < 4:
            raise ParseError("triangle face needs 3 indices", line=no)
        try:
            faces[i] = [int(parts[1]), int(parts[2]), int(parts[3])]
        except ValueError:
            raise ParseError("face indices are not integers", line=no) from None
    return verts, faces


def _parse_obj(text):
    verts = []
    faces = []
    for no, line in _significant_lines(text):
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise ParseError("vertex line needs 3 coordinates", line=no)
            try:
                verts.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError:
                raise ParseError("vertex coordinates are not numbers", line=no) from None
        elif tag == "f":
            refs = parts[1:]
            if len(refs) != 3:
                raise ParseError(f"only triangles supported, face has {len(refs)} vertices", line=no)
            idx = []
            for r in refs:
                head = r.split("/", 1)[0]
                try:
                    k = int(head)
                except ValueError:
                    raise ParseError(f"bad face reference {r!r}", line=no) from None
                # OBJ is 1-based; negative indices count from the end
                idx.append(k - 1 if k > 0 else len(verts) + k)
            faces.append(idx)
        # vt/vn/usemtl/o/g/s/mtllib are ignored
    if not verts:
        raise ParseError("no vertices found")
    return (np.asarray(verts, dtype=np.float64),
            np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def load_mesh(path, fmt=None) -> TriangleMesh:
    """Read an OFF or OBJ triangle mesh and validate its invariants.

    fmt is "off" or "obj"; when omitted it is taken from the file suffix.
    """
    path = str(path)
    if fmt is None:
        fmt = path.rsplit(".", 1)[-1].lower()
    fmt = fmt.lower()
    with open(path, "r", encoding="ascii") as fh:
        text = fh.read()
    if fmt == "off":
        verts, faces = _parse_off(text)
    elif fmt == "obj":
        verts, faces = _parse_obj(text)
    else:
        raise ParseError(f"unknown mesh format {fmt!r}")
    mesh = TriangleMesh(verts, faces)
    validate_mesh(mesh)
    return mesh


def write_off(mesh: TriangleMesh, path, precision=17):
    """Write an OFF file; precision 17 round-trips float64 exactly."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        fmt = f"%.{precision}g %.{precision}g %.{precision}g\n"
        for v in mesh.vertices:
            fh.write(fmt % (v[0], v[1], v[2]))
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
