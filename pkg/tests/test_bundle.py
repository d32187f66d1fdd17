import numpy as np
import pytest

from simspectra import (
    FrameSizeMismatch,
    IndexOutOfRange,
    MissingFrame,
    NonFiniteValue,
    SimulationBundle,
    extract_function,
    load_bundle,
    save_bundle,
)


@pytest.fixture()
def small_bundle(strip_mesh):
    rng = np.random.default_rng(7)
    frames = strip_mesh.vertices[None, None] + 0.1 * rng.standard_normal(
        (3, 2, strip_mesh.n_vertices, 3)
    )
    return SimulationBundle(strip_mesh, frames, {"thickness": [0.7, 1.0, 1.3]})


def test_roundtrip_bitwise(tmp_path, small_bundle):
    mpath = save_bundle(small_bundle, tmp_path / "b")
    back = load_bundle(mpath)
    assert np.array_equal(back.frames, small_bundle.frames)
    # frame files byte-identical after a second save
    save_bundle(back, tmp_path / "b2")
    f1 = (tmp_path / "b" / "frames" / "sim0_step1.f64").read_bytes()
    f2 = (tmp_path / "b2" / "frames" / "sim0_step1.f64").read_bytes()
    assert f1 == f2


def test_identity_ingestion(tmp_path, strip_mesh):
    frames = np.repeat(strip_mesh.vertices[None, None], 2, axis=0)
    bundle = SimulationBundle(strip_mesh, frames)
    mpath = save_bundle(bundle, tmp_path / "b")
    back = load_bundle(mpath)
    assert np.array_equal(back.frames[0, 0], strip_mesh.vertices)


def test_labels_roundtrip(tmp_path, small_bundle):
    mpath = save_bundle(small_bundle, tmp_path / "b")
    back = load_bundle(mpath)
    assert back.labels["thickness"] == [0.7, 1.0, 1.3]


def test_frame_size_mismatch(tmp_path, small_bundle):
    mpath = save_bundle(small_bundle, tmp_path / "b")
    fpath = tmp_path / "b" / "frames" / "sim1_step0.f64"
    raw = fpath.read_bytes()
    fpath.write_bytes(raw[:-8])  # drop one value
    with pytest.raises(FrameSizeMismatch):
        load_bundle(mpath)


def test_missing_frame(tmp_path, small_bundle):
    mpath = save_bundle(small_bundle, tmp_path / "b")
    (tmp_path / "b" / "frames" / "sim2_step1.f64").unlink()
    with pytest.raises(MissingFrame):
        load_bundle(mpath)


def test_nonfinite_frames_rejected(strip_mesh):
    frames = np.zeros((1, 1, strip_mesh.n_vertices, 3))
    frames[0, 0, 3, 1] = np.inf
    with pytest.raises(NonFiniteValue):
        SimulationBundle(strip_mesh, frames)


def test_extract_channels_reassemble(small_bundle):
    fx = extract_function(small_bundle, 1, 1, "x")
    fy = extract_function(small_bundle, 1, 1, "y")
    fz = extract_function(small_bundle, 1, 1, "z")
    rebuilt = np.column_stack([fx.values, fy.values, fz.values])
    assert np.array_equal(rebuilt, small_bundle.frames[1, 1])


def test_displacement_norm_diff_identical_steps(strip_mesh):
    frames = np.stack([strip_mesh.vertices, strip_mesh.vertices])[None]
    bundle = SimulationBundle(strip_mesh, frames)
    f = extract_function(bundle, 0, 0, ("displacement_norm_diff", 0, 1))
    assert np.all(f.values == 0.0)


def test_displacement_norm_diff_sqrt_of_norm(strip_mesh):
    frames = np.stack([strip_mesh.vertices, strip_mesh.vertices])[None].copy()
    frames[0, 1, 5] = frames[0, 0, 5] + np.array([3.0, 4.0, 0.0])
    bundle = SimulationBundle(strip_mesh, frames)
    f = extract_function(bundle, 0, 0, ("displacement_norm_diff", 0, 1))
    # value is sqrt of the Euclidean norm: ||(3,4,0)|| = 5
    assert f.values[5] == pytest.approx(np.sqrt(5.0), rel=1e-15)
    assert f.values[0] == 0.0


def test_index_out_of_range(small_bundle):
    with pytest.raises(IndexOutOfRange):
        extract_function(small_bundle, 5, 0, "x")
    with pytest.raises(IndexOutOfRange):
        extract_function(small_bundle, 0, 9, "x")
    with pytest.raises(IndexOutOfRange):
        extract_function(small_bundle, 0, 0, "w")


def test_vertex_count_mismatch(strip_mesh, tri_mesh):
    frames = np.zeros((1, 1, tri_mesh.n_vertices, 3))
    with pytest.raises(FrameSizeMismatch):
        SimulationBundle(strip_mesh, frames)
