"""Triangle mesh data model, validation, lumped vertex areas, and file I/O.

Meshes are immutable after construction: vertex positions, faces, and the
per-vertex lumped areas (one third of each incident face area) are computed
once and the backing arrays are marked read-only, so instances are safe for
concurrent shared reads.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateFaceWarning,
    DisconnectedMesh,
    NonFiniteValue,
    NonManifoldWarning,
    ParseError,
)

_DEGENERATE_REL_AREA = 1e-12


def _lock(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TriMesh:
    """Immutable triangle mesh with lumped per-vertex areas.

    Parameters
    ----------
    vertices : (n, 3) float array
        Vertex positions in model units.
    faces : (m, 3) int array
        Vertex index triples. Every index must be in ``[0, n)`` and no
        face may repeat a vertex.

    Attributes
    ----------
    vertex_area : (n,) float array
        One third of the summed incident face areas; their total equals
        the surface area.

    Raises
    ------
    ParseError
        Bad face indices or malformed arrays.
    NonFiniteValue
        Non-finite vertex coordinates.
    DisconnectedMesh
        The edge graph has more than one connected component (graph
        distances would be infinite).
    """

    vertices: np.ndarray
    faces: np.ndarray
    vertex_area: np.ndarray = field(init=False)

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        f = np.ascontiguousarray(np.asarray(self.faces, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParseError(f"vertices must be (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ParseError(f"faces must be (m, 3), got {f.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteValue("mesh vertices contain NaN/Inf")
        n = v.shape[0]
        if f.size and (f.min() < 0 or f.max() >= n):
            raise ParseError("face index out of range")
        if f.size and (
            (f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2])
        ).any():
            raise ParseError("face with repeated vertex")
        object.__setattr__(self, "vertices", _lock(v))
        object.__setattr__(self, "faces", _lock(f))
        object.__setattr__(self, "vertex_area", _lock(_vertex_areas(v, f)))
        _check_connected(n, f)
        _warn_nonmanifold(f)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_faces(self) -> int:
        return self.faces.shape[0]

    def face_areas(self) -> np.ndarray:
        return _face_areas(self.vertices, self.faces)

    def edges(self) -> np.ndarray:
        """Unique undirected edges as an (e, 2) array with first index smaller."""
        f = self.faces
        e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def mean_edge_length(self) -> float:
        e = self.edges()
        d = self.vertices[e[:, 0]] - self.vertices[e[:, 1]]
        return float(np.linalg.norm(d, axis=1).mean())

    def same_connectivity(self, other: "TriMesh") -> bool:
        return self.faces.shape == other.faces.shape and bool(
            (self.faces == other.faces).all()
        )

    def with_vertices(self, vertices: np.ndarray) -> "TriMesh":
        """New mesh sharing this connectivity with replaced positions."""
        return TriMesh(vertices, self.faces)


@dataclass(frozen=True)
class MeshFunction:
    """Scalar field sampled at mesh vertices with a channel tag."""

    values: np.ndarray
    channel: str = "scalar"

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if v.ndim != 1:
            raise ParseError(f"mesh function values must be 1-D, got {v.shape}")
        if not np.isfinite(v).all():
            raise NonFiniteValue(f"mesh function '{self.channel}' has NaN/Inf")
        object.__setattr__(self, "values", _lock(v))

    def __len__(self) -> int:
        return self.values.shape[0]


def _face_areas(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    a = v[f[:, 0]]
    cr = np.cross(v[f[:, 1]] - a, v[f[:, 2]] - a)
    return 0.5 * np.linalg.norm(cr, axis=1)


def _vertex_areas(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    areas = _face_areas(v, f)
    if areas.size:
        tiny = areas <= _DEGENERATE_REL_AREA * areas.max()
        if tiny.any():
            warnings.warn(
                f"{int(tiny.sum())} degenerate (zero-area) face(s); kept in "
                "connectivity with zero area contribution",
                DegenerateFaceWarning,
                stacklevel=3,
            )
    out = np.zeros(v.shape[0])
    third = areas / 3.0
    for c in range(3):
        np.add.at(out, f[:, c], third)
    return out


def _check_connected(n: int, f: np.ndarray) -> None:
    if n == 0:
        raise ParseError("mesh has no vertices")
    if n == 1:
        return
    from scipy import sparse
    from scipy.sparse.csgraph import connected_components

    i = np.concatenate([f[:, 0], f[:, 1], f[:, 2]])
    j = np.concatenate([f[:, 1], f[:, 2], f[:, 0]])
    adj = sparse.coo_matrix((np.ones(i.size), (i, j)), shape=(n, n))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp > 1:
        raise DisconnectedMesh(
            f"vertex graph has {n_comp} components; graph distances "
            "would be infinite"
        )


def _warn_nonmanifold(f: np.ndarray) -> None:
    if not f.size:
        return
    e = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    _, counts = np.unique(e, axis=0, return_counts=True)
    if (counts > 2).any():
        warnings.warn(
            f"{int((counts > 2).sum())} edge(s) shared by more than two faces",
            NonManifoldWarning,
            stacklevel=3,
        )


def _split_quad(quad, v):
    """Split a quad along its shorter diagonal into two triangles."""
    a, b, c, d = quad
    if np.linalg.norm(v[a] - v[c]) <= np.linalg.norm(v[b] - v[d]):
        return [(a, b, c), (a, c, d)]
    return [(a, b, d), (b, c, d)]


def _parse_off(lines) -> tuple[np.ndarray, list]:
    # strip comments / blanks
    toks = [ln.split("#", 1)[0].strip() for ln in lines]
    toks = [t for t in toks if t]
    if not toks or not toks[0].upper().startswith("OFF"):
        raise ParseError("not an OFF file (missing OFF header)")
    head = toks[0][3:].strip()  # counts may share the header line
    rest = toks[1:]
    if head:
        rest = [head] + rest
    try:
        nv, nf = int(rest[0].split()[0]), int(rest[0].split()[1])
    except (IndexError, ValueError) as exc:
        raise ParseError("bad OFF count line") from exc
    if len(rest) < 1 + nv + nf:
        raise ParseError("OFF file truncated")
    try:
        verts = np.array(
            [[float(x) for x in rest[1 + i].split()[:3]] for i in range(nv)]
        )
    except (IndexError, ValueError) as exc:
        raise ParseError("bad OFF vertex record") from exc
    polys = []
    for i in range(nf):
        parts = rest[1 + nv + i].split()
        try:
            k = int(parts[0])
            idx = [int(x) for x in parts[1 : 1 + k]]
        except (IndexError, ValueError) as exc:
            raise ParseError("bad OFF face record") from exc
        if len(idx) != k:
            raise ParseError("bad OFF face record")
        polys.append(idx)
    return verts, polys


def _parse_obj(lines) -> tuple[np.ndarray, list]:
    verts, polys = [], []
    for ln in lines:
        parts = ln.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except (IndexError, ValueError) as exc:
                raise ParseError(f"bad OBJ vertex record: {ln.strip()!r}") from exc
        elif parts[0] == "f":
            idx = []
            for tok in parts[1:]:
                try:
                    i = int(tok.split("/", 1)[0])
                except ValueError as exc:
                    raise ParseError(f"bad OBJ face record: {ln.strip()!r}") from exc
                idx.append(i - 1 if i > 0 else len(verts) + i)
            polys.append(idx)
        # all other records (vn, vt, usemtl, ...) are ignored
    if not verts:
        raise ParseError("OBJ file has no vertices")
    return np.array(verts, dtype=np.float64), polys


def _triangulate(verts: np.ndarray, polys: list) -> np.ndarray:
    tris = []
    for poly in polys:
        if len(poly) == 3:
            tris.append(tuple(poly))
        elif len(poly) == 4:
            tris.extend(_split_quad(poly, verts))
        else:
            raise ParseError(
                f"only triangle and quad faces supported, got {len(poly)}-gon"
            )
    return np.array(tris, dtype=np.int64).reshape(-1, 3)


def load_mesh(path, fmt: str | None = None) -> TriMesh:
    """Load an indexed triangle mesh from an OFF or OBJ file.

    Quads are split along their shorter diagonal. The format is inferred
    from the file suffix unless ``fmt`` is given.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lstrip(".").lower()
    if fmt not in ("off", "obj"):
        raise ParseError(f"unsupported mesh format: {fmt!r}")
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ParseError(f"cannot read mesh file {path}: {exc}") from exc
    verts, polys = _parse_off(lines) if fmt == "off" else _parse_obj(lines)
    return TriMesh(verts, _triangulate(verts, polys))


def save_mesh_off(mesh: TriMesh, path) -> None:
    """Write an OFF file with shortest round-trip decimal coordinates."""
    path = Path(path)
    with path.open("w") as fh:
        fh.write("OFF\n")
        fh.write(f"{mesh.n_vertices} {mesh.n_faces} 0\n")
        for p in mesh.vertices:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
