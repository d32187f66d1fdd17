import itertools

import numpy as np
import pytest

from simspectra import (
    ConnectivityMismatch,
    TriMesh,
    epsilon_isometry_defect,
    graph_distances,
)
from simspectra.errors import DegenerateFaceWarning
from simspectra.geodesics import EdgeGraph

from conftest import rigid_copy


@pytest.fixture(scope="module")
def chain_mesh():
    # collinear vertices: the single (degenerate) face supplies the edges
    with pytest.warns(DegenerateFaceWarning):
        return TriMesh([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


@pytest.fixture(scope="module")
def square_mesh():
    # unit square split along the 0-2 diagonal
    return TriMesh(
        [[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]],
        [[0, 1, 2], [0, 2, 3]],
    )


def brute_force_distance(mesh, a, b):
    """Oracle: enumerate all simple paths over the edge graph."""
    edges = {}
    for i, j in mesh.edges():
        w = float(np.linalg.norm(mesh.vertices[i] - mesh.vertices[j]))
        edges.setdefault(int(i), []).append((int(j), w))
        edges.setdefault(int(j), []).append((int(i), w))
    best = np.inf

    def walk(node, seen, acc):
        nonlocal best
        if node == b:
            best = min(best, acc)
            return
        for nxt, w in edges[node]:
            if nxt not in seen:
                walk(nxt, seen | {nxt}, acc + w)

    walk(a, {a}, 0.0)
    return best


def test_chain_distances(chain_mesh):
    field = graph_distances(chain_mesh, 0, radius=5.0)
    assert field.vertices.tolist() == [0, 1, 2]
    assert np.allclose(field.distances, [0.0, 1.0, 2.0])


def test_chain_truncation(chain_mesh):
    field = graph_distances(chain_mesh, 0, radius=1.5)
    assert field.as_dict() == {0: 0.0, 1: 1.0}


def test_square_direct_edge_beats_corner(square_mesh):
    field = graph_distances(square_mesh, 0, radius=10.0)
    d = field.as_dict()
    for target in (1, 2, 3):
        assert d[target] == pytest.approx(brute_force_distance(square_mesh, 0, target), abs=1e-15)
    assert d[1] == pytest.approx(1.0)  # direct edge, not 1 + 1 via the corner


def test_field_invariants(strip_mesh):
    field = graph_distances(strip_mesh, 17, radius=0.9)
    assert np.all(np.diff(field.vertices) > 0)
    assert field.as_dict()[17] == 0.0
    assert field.distances.min() >= 0.0


def test_symmetry(strip_mesh):
    g = EdgeGraph(strip_mesh)
    radius = 1.2
    fields = {s: g.distances(s, radius).as_dict() for s in range(strip_mesh.n_vertices)}
    for p, fp in fields.items():
        for w, d in fp.items():
            if p in fields[w]:
                assert abs(fields[w][p] - d) <= 1e-12


def test_triangle_inequality(strip_mesh):
    g = EdgeGraph(strip_mesh)
    radius = 2.5
    sources = [0, 13, 40, 79]
    fields = {s: g.distances(s, radius).as_dict() for s in sources}
    for a, b, c in itertools.permutations(sources, 3):
        if b in fields[a] and c in fields[b] and c in fields[a]:
            assert fields[a][c] <= fields[a][b] + fields[b][c] + 1e-12


def test_rigid_motion_invariance(cylinder_mesh):
    moved = rigid_copy(cylinder_mesh, seed=5)
    for source in (0, 33, 77):
        f1 = graph_distances(cylinder_mesh, source, 1.0)
        f2 = graph_distances(moved, source, 1.0)
        assert np.array_equal(f1.vertices, f2.vertices)
        assert np.abs(f1.distances - f2.distances).max() <= 1e-9


def test_defect_identity(strip_mesh):
    assert epsilon_isometry_defect(strip_mesh, strip_mesh, radius=1.0) == 0.0


def test_defect_rigid(cylinder_mesh):
    moved = rigid_copy(cylinder_mesh, seed=11)
    assert epsilon_isometry_defect(cylinder_mesh, moved, radius=1.0) <= 1e-9


def test_defect_scaling(strip_mesh):
    scaled = TriMesh(2.0 * strip_mesh.vertices, strip_mesh.faces)
    radius = 0.8
    got = epsilon_isometry_defect(strip_mesh, scaled, radius=radius, max_sources=32)
    # oracle: doubling scales every distance, so the defect is the largest
    # distance within the radius over the sampled sources
    g = EdgeGraph(strip_mesh)
    stride = max(1, strip_mesh.n_vertices // 32)
    expected = max(
        g.distances(s, radius).distances.max()
        for s in range(0, strip_mesh.n_vertices, stride)
    )
    assert got == pytest.approx(expected, rel=1e-12)


def test_defect_connectivity_mismatch(strip_mesh, cylinder_mesh):
    with pytest.raises(ConnectivityMismatch):
        epsilon_isometry_defect(strip_mesh, cylinder_mesh, radius=1.0)


def test_bad_radius(strip_mesh):
    with pytest.raises(ValueError):
        graph_distances(strip_mesh, 0, radius=0.0)
