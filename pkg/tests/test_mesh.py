import numpy as np
import pytest

from simspectra import DisconnectedMesh, NonFiniteValue, ParseError, TriMesh, load_mesh
from simspectra.errors import DegenerateFaceWarning, NonManifoldWarning
from simspectra.mesh import save_mesh_off
from simspectra.synthetic import make_icosahedron

from conftest import rigid_copy


def test_unit_triangle_vertex_areas(tri_mesh):
    # area 1/2 split three ways
    assert np.allclose(tri_mesh.vertex_area, [1 / 6, 1 / 6, 1 / 6], atol=1e-15)
    assert tri_mesh.vertex_area.sum() == pytest.approx(0.5, rel=1e-15)


def test_icosahedron_off_total_area(tmp_path):
    s = 0.73
    ico = make_icosahedron(edge=s)
    path = tmp_path / "ico.off"
    save_mesh_off(ico, path)
    mesh = load_mesh(path)
    assert mesh.n_vertices == 12 and mesh.n_faces == 20
    analytic = 20 * (np.sqrt(3) / 4) * s**2
    assert mesh.vertex_area.sum() == pytest.approx(analytic, rel=1e-12)


def test_disconnected_mesh_rejected(tmp_path):
    path = tmp_path / "two.off"
    path.write_text(
        "OFF\n6 2 0\n"
        "0 0 0\n1 0 0\n0 1 0\n"
        "5 5 0\n6 5 0\n5 6 0\n"
        "3 0 1 2\n3 3 4 5\n"
    )
    with pytest.raises(DisconnectedMesh):
        load_mesh(path)


def test_quad_split_shorter_diagonal(tmp_path):
    # diagonal 0-2 has length sqrt(2), diagonal 1-3 sqrt(10): split along 0-2
    path = tmp_path / "quad.off"
    path.write_text(
        "OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 3 0\n4 0 1 2 3\n"
    )
    mesh = load_mesh(path)
    assert mesh.n_faces == 2
    faces = {tuple(f) for f in mesh.faces}
    assert faces == {(0, 1, 2), (0, 2, 3)}


def test_obj_parsing_with_slashes_and_negatives(tmp_path):
    path = tmp_path / "m.obj"
    path.write_text(
        "# comment\n"
        "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\n"
        "vn 0 0 1\n"
        "f 1/1/1 2/2/1 3/3/1\n"
        "f -3 -1 -2\n"
    )
    mesh = load_mesh(path)
    assert mesh.n_vertices == 4
    assert {tuple(f) for f in mesh.faces} == {(0, 1, 2), (1, 3, 2)}


def test_face_index_out_of_range():
    with pytest.raises(ParseError):
        TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 3]])


def test_repeated_vertex_face():
    with pytest.raises(ParseError):
        TriMesh([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 1]])


def test_nonfinite_vertices_rejected():
    with pytest.raises(NonFiniteValue):
        TriMesh([[0, 0, 0], [1, 0, np.nan], [0, 1, 0]], [[0, 1, 2]])


def test_nonmanifold_warns():
    verts = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [0, -1, 0]]
    faces = [[0, 1, 2], [0, 1, 3], [0, 1, 4]]  # edge 0-1 in three faces
    with pytest.warns(NonManifoldWarning):
        TriMesh(verts, faces)


def test_degenerate_face_zero_area():
    verts = [[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]]
    faces = [[0, 1, 2], [0, 1, 3]]  # first face collinear
    with pytest.warns(DegenerateFaceWarning):
        mesh = TriMesh(verts, faces)
    # only the proper face contributes: area 1/2 to vertices 0, 1, 3
    assert mesh.vertex_area[2] == pytest.approx(0.0, abs=1e-15)
    assert mesh.vertex_area.sum() == pytest.approx(0.5, rel=1e-12)


def test_vertex_area_rigid_invariance(cylinder_mesh):
    moved = rigid_copy(cylinder_mesh, seed=3)
    rel = np.abs(moved.vertex_area - cylinder_mesh.vertex_area) / cylinder_mesh.vertex_area
    assert rel.max() <= 1e-12


def test_off_roundtrip_bit_exact(tmp_path, strip_mesh):
    noisy = TriMesh(
        strip_mesh.vertices + np.random.default_rng(1).standard_normal(strip_mesh.vertices.shape) * 0.01,
        strip_mesh.faces,
    )
    path = tmp_path / "s.off"
    save_mesh_off(noisy, path)
    back = load_mesh(path)
    assert np.array_equal(back.vertices, noisy.vertices)
    assert np.array_equal(back.faces, noisy.faces)


def test_mesh_is_immutable(tri_mesh):
    with pytest.raises(ValueError):
        tri_mesh.vertices[0, 0] = 5.0


def test_with_vertices_shares_connectivity(strip_mesh):
    moved = strip_mesh.with_vertices(strip_mesh.vertices + 1.0)
    assert moved.same_connectivity(strip_mesh)
    assert not np.array_equal(moved.vertices, strip_mesh.vertices)


def test_unsupported_polygon(tmp_path):
    path = tmp_path / "p.off"
    path.write_text("OFF\n5 1 0\n0 0 0\n1 0 0\n1 1 0\n0.5 1.5 0\n0 1 0\n5 0 1 2 3 4\n")
    with pytest.raises(ParseError):
        load_mesh(path)


def test_missing_file():
    with pytest.raises(ParseError):
        load_mesh("/nonexistent/mesh.off")
