import numpy as np
import pytest
from scipy import sparse

from simspectra import (
    GeneratorSpec,
    RadiusTooSmall,
    assemble_lb,
    decompose,
    gen_noisy_isometry,
    lb_convergence_probe,
    make_icosphere,
)
from simspectra.lb import apply_pointwise, default_bandwidth

from conftest import rigid_copy


def test_laplacian_row_sums(strip_mesh, cylinder_mesh):
    for mesh in (strip_mesh, cylinder_mesh):
        op = assemble_lb(mesh)
        rows = np.asarray(op.laplacian().sum(axis=1)).ravel()
        assert np.abs(rows).max() <= 1e-12


def test_operator_invariants(strip_mesh):
    op = assemble_lb(strip_mesh)
    op.validate()
    # positive semidefinite: smallest eigenvalue >= -1e-9 * ||L||
    lap = op.laplacian().toarray()
    vals = np.linalg.eigvalsh(lap)
    assert vals[0] >= -1e-9 * np.abs(vals).max()


def test_rigid_motion_entrywise_invariance(cylinder_mesh):
    moved = rigid_copy(cylinder_mesh, seed=2)
    w1 = assemble_lb(cylinder_mesh).weights
    w2 = assemble_lb(moved).weights
    assert (w1 != 0).sum() == (w2 != 0).sum()
    assert np.abs((w1 - w2).toarray()).max() <= 1e-9


def test_constant_in_kernel(strip_mesh):
    op = assemble_lb(strip_mesh)
    f = np.full(strip_mesh.n_vertices, 3.7)
    out = op.laplacian() @ f
    assert np.abs(out).max() <= 1e-12 * 3.7 * op.degree.max()


def test_radius_too_small(strip_mesh):
    with pytest.raises(RadiusTooSmall):
        assemble_lb(strip_mesh, h=1e-8, rho=1.0)


def test_eq31_weighting_variant(strip_mesh):
    op_sym = assemble_lb(strip_mesh)
    op_eq = assemble_lb(strip_mesh, weighting="eq31")
    op_eq.validate()
    assert op_eq.params["weighting"] == "eq31"
    # same sparsity pattern, different values (unless areas were all equal)
    assert (op_sym.weights != 0).sum() == (op_eq.weights != 0).sum()
    assert np.abs((op_sym.weights - op_eq.weights).toarray()).max() > 0


def test_default_bandwidth(strip_mesh):
    assert default_bandwidth(strip_mesh) == pytest.approx(
        (2 * strip_mesh.mean_edge_length()) ** 2
    )
    op = assemble_lb(strip_mesh)
    assert op.params["h"] == pytest.approx(default_bandwidth(strip_mesh))


def test_thread_count_bitstable(cylinder_mesh):
    w1 = assemble_lb(cylinder_mesh, threads=1).weights
    w2 = assemble_lb(cylinder_mesh, threads=3).weights
    assert (w1 != w2).nnz == 0


def test_near_isometry_eigenvalue_ratios():
    # Gaussian vertex noise of 1e-3 mean edge lengths changes the first ten
    # nontrivial eigenvalue ratios by less than 5%
    spec = GeneratorSpec("isometric_bend", seed=4, m=1, tau=1,
                         params={"nx": 16, "ny": 9, "theta": 1.0, "spread": 0.0})
    clean = gen_noisy_isometry(spec, sigma=0.0)
    noisy = gen_noisy_isometry(spec, sigma=1e-3)
    mesh_a = clean.mesh.with_vertices(clean.frames[0, 0])
    mesh_b = clean.mesh.with_vertices(noisy.frames[0, 0])
    lam_a = decompose(assemble_lb(mesh_a), 11).eigenvalues
    lam_b = decompose(assemble_lb(mesh_b), 11).eigenvalues
    ratios_a = lam_a[2:] / lam_a[1]
    ratios_b = lam_b[2:] / lam_b[1]
    assert np.abs(ratios_a - ratios_b).max() / ratios_a.max() <= 0.05


def test_icosphere_spectrum_clusters():
    sph = make_icosphere(3)
    basis = decompose(assemble_lb(sph), 9)
    lam = basis.eigenvalues
    assert abs(lam[0]) <= 1e-9 * lam.max()
    c1, c2 = lam[1:4], lam[4:9]
    # sphere harmonics: clusters at l(l+1) = 2 and 6 after one global scale
    scale = 2.0 / c1.mean()
    assert np.abs(scale * c1 - 2.0).max() <= 0.2
    assert np.abs(scale * c2 - 6.0).max() <= 0.6
    # multiplicities detected by a 5% relative gap
    assert (c1.max() - c1.min()) / c1.mean() < 0.05
    assert (c2.max() - c2.min()) / c2.mean() < 0.05
    assert (c2.min() - c1.max()) / c2.min() > 0.05


def test_convergence_probe_sphere_monotone():
    res = lb_convergence_probe("sphere", levels=(2, 3))
    errs = [r["sup_error"] for r in res]
    assert errs[1] < errs[0]


def test_convergence_probe_plane_linear_exact():
    res = lb_convergence_probe("plane", levels=(2, 3), rho=3.0)
    for r in res:
        assert r["sup_error"] <= 1e-12


def test_probe_constant_function(strip_mesh):
    op = assemble_lb(strip_mesh)
    out = apply_pointwise(op, strip_mesh, np.ones(strip_mesh.n_vertices))
    assert np.abs(out).max() <= 1e-10


def test_operator_export_roundtrip(tmp_path, strip_mesh):
    from simspectra import load_operator, save_operator

    op = assemble_lb(strip_mesh)
    save_operator(op, tmp_path / "op")
    back, d_d = load_operator(tmp_path / "op")
    assert d_d is None
    assert back.kind == op.kind
    assert back.params["h"] == op.params["h"]
    assert sparse.issparse(back.weights)
    assert (back.weights != op.weights).nnz == 0
