"""Bounded shortest-path distances on the mesh edge graph.

Edge weights are Euclidean distances between endpoint positions; the
shortest-path length along this graph is the geodesic proxy used by the
operator assembly. Expansion halts once the frontier exceeds the requested
radius, so the cost per source scales with the local patch, not the mesh.
"""
from __future__ import annotations

from dataclasses import dataclass
from heapq import heappop, heappush

import numpy as np

from .errors import ConnectivityMismatch
from .mesh import TriMesh


@dataclass(frozen=True)
class LocalDistanceField:
    """Distances from one source to every vertex within a radius.

    ``vertices`` is sorted ascending and always contains ``source`` with
    distance 0.
    """

    source: int
    vertices: np.ndarray
    distances: np.ndarray

    def as_dict(self) -> dict:
        return dict(zip(self.vertices.tolist(), self.distances.tolist()))


class EdgeGraph:
    """CSR adjacency of a mesh with Euclidean edge weights.

    Built once per mesh and reused for all sources; Dijkstra expansion is
    pure, so rows may be computed in parallel by the caller.
    """

    def __init__(self, mesh: TriMesh):
        e = mesh.edges()
        w = np.linalg.norm(mesh.vertices[e[:, 0]] - mesh.vertices[e[:, 1]], axis=1)
        n = mesh.n_vertices
        heads = np.concatenate([e[:, 0], e[:, 1]])
        tails = np.concatenate([e[:, 1], e[:, 0]])
        ww = np.concatenate([w, w])
        order = np.lexsort((tails, heads))
        heads, tails, ww = heads[order], tails[order], ww[order]
        self.indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(self.indptr, heads + 1, 1)
        np.cumsum(self.indptr, out=self.indptr)
        self.indices = tails
        self.weights = ww
        self.n = n

    def distances(self, source: int, radius: float) -> LocalDistanceField:
        """Dijkstra truncated to ``radius``; ties expand smaller index first."""
        if not (0 <= source < self.n):
            raise IndexError(f"source {source} not in [0, {self.n})")
        dist: dict[int, float] = {source: 0.0}
        done: set[int] = set()
        heap: list[tuple[float, int]] = [(0.0, source)]
        indptr, indices, weights = self.indptr, self.indices, self.weights
        while heap:
            d, u = heappop(heap)
            if u in done:
                continue
            done.add(u)
            for k in range(indptr[u], indptr[u + 1]):
                v = int(indices[k])
                nd = d + weights[k]
                if nd <= radius and nd < dist.get(v, np.inf):
                    dist[v] = nd
                    heappush(heap, (nd, v))
        verts = np.array(sorted(dist), dtype=np.int64)
        return LocalDistanceField(
            source, verts, np.array([dist[v] for v in verts])
        )


def graph_distances(mesh: TriMesh, source: int, radius: float) -> LocalDistanceField:
    """Shortest-path distances from ``source`` truncated to ``radius``.

    Deterministic: heap ties break on the smaller vertex index and the
    result is sorted by vertex index.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    return EdgeGraph(mesh).distances(source, radius)


def epsilon_isometry_defect(
    mesh_a: TriMesh,
    mesh_b: TriMesh,
    radius: float,
    max_sources: int = 64,
) -> float:
    """Worst distance discrepancy between two same-connectivity meshes.

    Samples up to ``max_sources`` evenly spaced source vertices and returns
    the maximum of ``|d_a(p, w) - d_b(p, w)|`` over vertex pairs within
    ``radius`` of the source in either mesh. When a pair is reachable
    within the radius on one mesh only, the other side is re-expanded with
    a 4x radius; pairs still unreachable contribute ``inf``.
    """
    if not mesh_a.same_connectivity(mesh_b):
        raise ConnectivityMismatch("meshes do not share face connectivity")
    if radius <= 0:
        raise ValueError("radius must be positive")
    n = mesh_a.n_vertices
    stride = max(1, n // max_sources)
    sources = range(0, n, stride)
    ga, gb = EdgeGraph(mesh_a), EdgeGraph(mesh_b)
    worst = 0.0
    for s in sources:
        fa = ga.distances(s, radius).as_dict()
        fb = gb.distances(s, radius).as_dict()
        reached = set(fa) | set(fb)
        if reached - set(fa):
            fa = ga.distances(s, 4.0 * radius).as_dict()
        if reached - set(fb):
            fb = gb.distances(s, 4.0 * radius).as_dict()
        for v in reached:
            da = fa.get(v, np.inf)
            db = fb.get(v, np.inf)
            diff = abs(da - db) if np.isfinite(da) or np.isfinite(db) else 0.0
            if diff > worst:
                worst = diff
    return float(worst)
